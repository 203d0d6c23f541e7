#pragma once

#include <span>

#include "relorbit/core.hpp"

namespace relorbit {

struct CircularOrbit {
  double r0;
  double omega;
  double ell;
  double gamma;
};

/// Unique circular motion of radius r0: solves V'(r0) = m r0 w^2 / sqrt(1 - r0^2 w^2/c^2)
/// for w in (0, c/r0), in closed form through the momentum ratio gamma r0 w / c.
CircularOrbit circular_orbit(double r0, const Potential& pot, const PhysicalParams& params);

/// Tangential phase-space point on the circular orbit of radius r0, at angle 0
/// and positively oriented.
PhaseState circular_state(const CircularOrbit& orbit, const PhysicalParams& params);

struct MomentumProfile {
  bool constant;
  double max_deviation;  // max |L(r_i) - L(r_1)| / L(r_1)
};

/// Detects potentials whose circular-orbit angular momentum does not depend on
/// the radius. Needs >= 10 radii spanning >= 2 decades.
MomentumProfile momentum_profile_is_constant(const Potential& pot, const PhysicalParams& params,
                                             std::span<const double> radii,
                                             double threshold = 1e-8);

}  // namespace relorbit

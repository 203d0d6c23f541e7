#include "relorbit/circular.hpp"

#include <algorithm>
#include <cmath>


namespace relorbit {

CircularOrbit circular_orbit(double r0, const Potential& pot, const PhysicalParams& params) {
  params.validate();
  if (!(r0 > 0.0)) throw Error(ErrorCode::kInvalidParameter, "circular radius must be positive");
  const double force = pot.dv(r0);
  if (!(force > 0.0)) {
    throw Error(ErrorCode::kNoCircularOrbit, "potential is not attractive at r0");
  }
  // With the momentum ratio s = gamma r0 w / c the balance reads
  // F = V'(r0) r0 / (m c^2) = s^2 / sqrt(1 + s^2), a quadratic in s^2. Working in s
  // keeps gamma accurate when r0 w approaches c.
  const double f = force * r0 / (params.m * params.c * params.c);
  const double s2 = 0.5 * f * (f + std::sqrt(f * f + 4.0));
  if (!std::isfinite(s2) || !(s2 > 0.0)) {
    throw Error(ErrorCode::kNoCircularOrbit, "circular frequency out of range");
  }
  const double s_ratio = std::sqrt(s2);
  CircularOrbit orbit;
  orbit.r0 = r0;
  orbit.gamma = std::sqrt(1.0 + s2);
  orbit.omega = s_ratio / orbit.gamma * params.c / r0;
  orbit.ell = params.m * params.c * r0 * s_ratio;
  return orbit;
}

PhaseState circular_state(const CircularOrbit& orbit, const PhysicalParams& params) {
  const double speed = orbit.r0 * orbit.omega;
  const double p = params.m * orbit.gamma * speed;
  return {{orbit.r0, 0.0}, {0.0, p}};
}

MomentumProfile momentum_profile_is_constant(const Potential& pot, const PhysicalParams& params,
                                             std::span<const double> radii, double threshold) {
  if (radii.size() < 10) {
    throw Error(ErrorCode::kPrecondition, "momentum profile needs at least 10 radii");
  }
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  if (!(*lo > 0.0) || *hi / *lo < 100.0) {
    throw Error(ErrorCode::kPrecondition, "momentum profile radii must span two decades");
  }
  const double ell1 = circular_orbit(radii.front(), pot, params).ell;
  double dev = 0.0;
  for (double r : radii) {
    dev = std::max(dev, std::abs(circular_orbit(r, pot, params).ell - ell1) / ell1);
  }
  return {dev < threshold, dev};
}

}  // namespace relorbit

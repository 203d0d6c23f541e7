#pragma once

#include <cmath>
#include <stdexcept>

#include "relorbit/core.hpp"

namespace relorbit::testing {

// Coulomb state at q = (r0, 0) with L = ell and H = h, moving outward.
// Solved by hand from the energy relation, independent of the library's
// witness construction.
inline PhaseState coulomb_state(double ell, double h, double r0, double k = 1.0,
                                const PhysicalParams& params = {}) {
  const double c = params.c;
  const double mc = params.m * c;
  const double e = (h + mc * c + k / r0) / c;  // sqrt(m^2 c^2 + |p|^2)
  const double p_theta = ell / r0;
  const double p_r2 = e * e - mc * mc - p_theta * p_theta;
  if (p_r2 < 0.0) throw std::invalid_argument("radius not reachable at this (ell, h)");
  return {{r0, 0.0}, {std::sqrt(p_r2), p_theta}};
}

}  // namespace relorbit::testing

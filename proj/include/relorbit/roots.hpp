#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "relorbit/errors.hpp"

namespace relorbit::roots {

/// Root of f on [lo, hi] by TOMS 748 (Brent-class bracketing) to the given
/// relative width. Throws kPrecondition when f(lo), f(hi) share a sign.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, double rel_tol = 1e-14,
                       std::uintmax_t max_iter = 300) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "root not bracketed");
  }
  auto tol = [rel_tol](double a, double b) {
    return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
  };
  std::uintmax_t iters = max_iter;
  const std::pair<double, double> r =
      boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

/// Sign change of g inside [a, b] (either order): bisection down to `tol`,
/// then one Newton step with dg, kept only if it stays inside the bracket.
template <class G, class DG>
double refine_event(G&& g, DG&& dg, double a, double b, double tol) {
  double ga = g(a);
  if (ga == 0.0) return a;
  if (g(b) == 0.0) return b;
  while (std::abs(b - a) > tol) {
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm > 0.0) == (ga > 0.0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  const double mid = 0.5 * (a + b);
  const double slope = dg(mid);
  if (slope != 0.0 && std::isfinite(slope)) {
    const double polished = mid - g(mid) / slope;
    if (polished >= std::min(a, b) && polished <= std::max(a, b)) return polished;
  }
  return mid;
}

}  // namespace relorbit::roots

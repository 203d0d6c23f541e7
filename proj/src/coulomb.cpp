#include "relorbit/coulomb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "relorbit/roots.hpp"

namespace relorbit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_coulomb(const Trajectory& traj) {
  if (traj.potential().kind() != PotentialKind::kCoulomb) {
    throw Error(ErrorCode::kInvalidParameter, "Runge-Lenz analysis needs a Coulomb trajectory");
  }
}

// Energy of q = (|ell|/mu) e1, p = p_r e1 + mu e2.
double witness_energy(double mu, double p_r, double ell_abs, double k,
                      const PhysicalParams& params) {
  const double c = params.c;
  const double mc = params.m * c;
  // c (sqrt(a^2 + mu^2) - mu) written without cancellation, so the critical
  // line |ell| = k/c keeps its strict inequality at large mu.
  const double a2 = mc * mc + p_r * p_r;
  return c * a2 / (std::sqrt(a2 + mu * mu) + mu) + mu * (c - k / ell_abs) - mc * c;
}

}  // namespace

SigmaInfo sigma_and_min_energy(double ell, double k, const PhysicalParams& params) {
  params.validate();
  SigmaInfo out;
  if (ell == 0.0) return out;
  out.sigma2_defined = true;
  out.sigma2 = 1.0 - k * k / (ell * ell * params.c * params.c);
  if (out.sigma2 >= 0.0) {
    out.sigma = std::sqrt(out.sigma2);
    out.h_min_defined = true;
    out.h_min = -params.m * params.c * params.c * (1.0 - out.sigma);
  }
  return out;
}

const char* to_string(EMClass cls) {
  switch (cls) {
    case EMClass::kEmpty: return "Empty";
    case EMClass::kCircular: return "Circular";
    case EMClass::kBoundedNonCollision: return "BoundedNonCollision";
    case EMClass::kUnboundedSupercritical: return "UnboundedSupercritical";
    case EMClass::kSubcritical: return "Subcritical";
    case EMClass::kCriticalMomentum: return "CriticalMomentum";
    case EMClass::kExcludedPoint: return "ExcludedPoint";
  }
  return "Unknown";
}

int class_code(EMClass cls) { return static_cast<int>(cls); }

bool admits_motion(EMClass cls) {
  return cls != EMClass::kEmpty && cls != EMClass::kExcludedPoint;
}

Classification classify(const EMPoint& pt, double k, const PhysicalParams& params, double tol) {
  params.validate();
  if (!(k > 0.0)) throw Error(ErrorCode::kInvalidParameter, "coupling k must be positive");
  const double rest = params.m * params.c * params.c;
  const double gap = pt.ell * pt.ell * params.c * params.c - k * k;
  Classification out{EMClass::kEmpty, sigma_and_min_energy(pt.ell, k, params), {}};

  if (std::abs(gap) <= tol * k * k) {
    // The infimum -m c^2 of the energy is not attained on this line.
    out.note = "critical momentum |ell| = k/c: energies h > -mc^2 admit motion, h = -mc^2 is "
               "excluded";
    if (std::abs(pt.h + rest) <= tol * rest) {
      out.cls = EMClass::kExcludedPoint;
    } else {
      out.cls = pt.h > -rest ? EMClass::kCriticalMomentum : EMClass::kEmpty;
    }
    return out;
  }
  if (gap < 0.0) {
    out.cls = EMClass::kSubcritical;
    return out;
  }
  const double h_min = out.sigma.h_min;
  if (std::abs(pt.h - h_min) <= tol * rest) {
    out.cls = EMClass::kCircular;
  } else if (pt.h < h_min) {
    out.cls = EMClass::kEmpty;
  } else if (pt.h < 0.0) {
    out.cls = EMClass::kBoundedNonCollision;
  } else {
    out.cls = EMClass::kUnboundedSupercritical;
  }
  return out;
}

std::optional<PhaseState> existence_witness(const EMPoint& pt, double k,
                                            const PhysicalParams& params) {
  params.validate();
  const double c = params.c;
  const double mc = params.m * c;
  const double rest = mc * c;
  double h = pt.h;

  if (pt.ell == 0.0) {
    // Radial data: choose |p| so that the kinetic part exceeds h, then solve for |q|.
    double p_r = mc;
    while (c * std::sqrt(mc * mc + p_r * p_r) - rest - h <= 0.0) {
      p_r *= 2.0;
      if (!std::isfinite(p_r)) return std::nullopt;
    }
    const double lambda = k / (c * std::sqrt(mc * mc + p_r * p_r) - rest - h);
    return PhaseState{{lambda, 0.0}, {p_r, 0.0}};
  }

  const double ell_abs = std::abs(pt.ell);
  // A state exists at tangential momentum mu iff the tangential energy at mu
  // does not exceed h; the excess is carried by p_r.
  double mu = 0.0;
  if (ell_abs * c > k) {
    const double sigma = std::sqrt(1.0 - k * k / (ell_abs * ell_abs * c * c));
    mu = params.m * k / (ell_abs * sigma);  // minimizer of the tangential energy
    if (witness_energy(mu, 0.0, ell_abs, k, params) > h) {
      // Only rounding separates h from the minimum on the circular boundary.
      if (witness_energy(mu, 0.0, ell_abs, k, params) - h > 1e-12 * rest) return std::nullopt;
      h = witness_energy(mu, 0.0, ell_abs, k, params);
    }
  } else {
    mu = mc;
    while (witness_energy(mu, 0.0, ell_abs, k, params) > h) {
      mu *= 2.0;
      if (mu > 1e12 * mc) return std::nullopt;
    }
  }
  // p_r^2 = (E/c)^2 - m^2 c^2 - mu^2 with E = h + m c^2 + k mu / |ell|, factored as
  // (E/c - mu)(E/c + mu) - m^2 c^2.
  const double d = (h + rest) / c + mu * (k / (ell_abs * c) - 1.0);
  const double p_r2 = d * (d + 2.0 * mu) - mc * mc;
  const double p_r = std::sqrt(std::max(0.0, p_r2));
  const double sign = pt.ell > 0.0 ? 1.0 : -1.0;
  return PhaseState{{ell_abs / mu, 0.0}, {p_r, sign * mu}};
}

void write_em_diagram(std::ostream& out, double ell_lo, double ell_hi, std::size_t n_ell,
                      double h_lo, double h_hi, std::size_t n_h, double k,
                      const PhysicalParams& params, double tol) {
  if (n_ell < 2 || n_h < 2) throw Error(ErrorCode::kInvalidParameter, "grid needs >= 2 points");
  out << "ell,h,class_code\n";
  for (std::size_t i = 0; i < n_ell; ++i) {
    const double ell = ell_lo + (ell_hi - ell_lo) * static_cast<double>(i) / (n_ell - 1);
    for (std::size_t j = 0; j < n_h; ++j) {
      const double h = h_lo + (h_hi - h_lo) * static_cast<double>(j) / (n_h - 1);
      out << format_double(ell) << ',' << format_double(h) << ','
          << class_code(classify({ell, h}, k, params, tol).cls) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Runge-Lenz vector

Vec2 runge_lenz_vector(const PhaseState& s, double k, const PhysicalParams& params) {
  const double r = norm(s.q);
  if (!(r > 0.0)) throw Error(ErrorCode::kSingularity, "Runge-Lenz vector at the origin");
  const double gamma = lorentz_gamma(s.p, params);
  return (-params.m * k * gamma / r) * s.q + norm2(s.p) * s.q - dot(s.q, s.p) * s.p;
}

double conic_residual(const PhaseState& s, double k, const PhysicalParams& params) {
  const Vec2 rl = runge_lenz_vector(s, k, params);
  const double mkg = params.m * k * lorentz_gamma(s.p, params);
  const double l = cross(s.q, s.p);
  return norm(s.q) + dot(rl, s.q) / mkg - l * l / mkg;
}

RLComponents rl_components(const PhaseState& s, double k, const PhysicalParams& params) {
  const Vec2 rl = runge_lenz_vector(s, k, params);
  const Vec2 alpha = (1.0 / norm(s.q)) * s.q;
  return {dot(rl, alpha), dot(rl, perp(alpha))};
}

PhaseState reflect_orientation(const PhaseState& s) {
  return {{s.q[0], -s.q[1]}, {s.p[0], -s.p[1]}};
}

double time_at_angle(const Trajectory& traj, double theta) {
  const std::size_t n = traj.size();
  if (n < 2 || !(theta >= traj.theta(0)) || !(theta <= traj.theta(n - 1))) {
    throw Error(ErrorCode::kDomain, "angle outside the trajectory");
  }
  std::size_t lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (traj.theta(mid) <= theta ? lo : hi) = mid;
  }
  if (traj.theta(lo) == theta) return traj.time(lo);
  if (traj.theta(hi) == theta) return traj.time(hi);
  return roots::solve_bracketed([&](double t) { return traj.theta_at(t) - theta; },
                                traj.time(lo), traj.time(hi), 1e-15);
}

RLSeries rl_components_and_invariant(const Trajectory& traj, double k,
                                     const PhysicalParams& params, double dtheta) {
  require_coulomb(traj);
  if (traj.size() < 2) throw Error(ErrorCode::kInsufficientData, "trajectory too short");
  if (!(dtheta > 0.0)) throw Error(ErrorCode::kInvalidParameter, "dtheta must be positive");
  const double ell = traj.momentum(0);
  if (!(ell > 0.0)) {
    throw Error(ErrorCode::kOrientation, "needs L > 0; reflect the initial data first");
  }
  const double h = traj.energy(0);
  const double c2 = params.c * params.c;

  RLSeries out;
  out.dtheta = dtheta;
  out.sigma2 = 1.0 - k * k / (ell * ell * c2);

  auto invariant = [&](const RLComponents& rc) {
    return rc.r_alpha * rc.r_alpha + out.sigma2 * rc.r_beta * rc.r_beta;
  };
  out.invariant0 = invariant(rl_components(traj.state(0), k, params));
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const PhaseState s = traj.state(i);
    const RLComponents rc = rl_components(s, k, params);
    out.invariant_drift = std::max(out.invariant_drift, std::abs(invariant(rc) - out.invariant0));
    const double gamma = lorentz_gamma(s.p, params);
    const double linked =
        params.m / k * (ell * ell * c2 - k * k) * gamma - ell * ell / k * (h + params.m * c2);
    out.gamma_link_residual = std::max(out.gamma_link_residual, std::abs(rc.r_alpha - linked));
  }

  const double th0 = traj.theta(0);
  const double th1 = traj.theta(traj.size() - 1);
  const auto steps = static_cast<std::size_t>(std::floor((th1 - th0) / dtheta));
  if (steps < 3) throw Error(ErrorCode::kInsufficientData, "angle span below three steps");
  for (std::size_t i = 0; i <= steps; ++i) {
    const double th = th0 + dtheta * static_cast<double>(i);
    const RLComponents rc = rl_components(traj.at(time_at_angle(traj, th)), k, params);
    out.theta.push_back(th);
    out.r_alpha.push_back(rc.r_alpha);
    out.r_beta.push_back(rc.r_beta);
  }
  for (std::size_t i = 1; i + 1 < out.theta.size(); ++i) {
    const double da = (out.r_alpha[i + 1] - out.r_alpha[i - 1]) / (2.0 * dtheta);
    const double db = (out.r_beta[i + 1] - out.r_beta[i - 1]) / (2.0 * dtheta);
    out.ode_residual = std::max({out.ode_residual, std::abs(da - out.sigma2 * out.r_beta[i]),
                                 std::abs(db + out.r_alpha[i])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form orbit

double orbit_closed_form(double theta, double amp, double theta0, double ell, double h, double k,
                         const PhysicalParams& params) {
  const double c2 = params.c * params.c;
  const double gap = ell * ell * c2 - k * k;
  if (gap == 0.0) throw Error(ErrorCode::kInvalidParameter, "closed form needs ell^2 c^2 != k^2");
  const double sigma2 = gap / (ell * ell * c2);
  const double x = std::sqrt(std::abs(sigma2)) * (theta - theta0);
  const double wave = sigma2 > 0.0 ? std::cos(x) : std::cosh(x);
  const double inv_r = (c2 * amp * wave + k * (h + params.m * c2)) / gap;
  if (!(inv_r > 0.0)) throw Error(ErrorCode::kOutOfBranch, "closed form gives r <= 0 here");
  return 1.0 / inv_r;
}

double ClosedFormFit::inverse_radius(double theta, double k, const PhysicalParams& params) const {
  const double c2 = params.c * params.c;
  const double x = std::sqrt(std::abs(sigma2)) * theta;
  const double cc = sigma2 > 0.0 ? std::cos(x) : std::cosh(x);
  const double ss = sigma2 > 0.0 ? std::sin(x) : std::sinh(x);
  return (c2 * (a * cc + b * ss) + k * (h + params.m * c2)) / (ell * ell * c2 - k * k);
}

ClosedFormFit fit_closed_form(const Trajectory& traj, double k, const PhysicalParams& params) {
  require_coulomb(traj);
  if (traj.size() < 3) throw Error(ErrorCode::kInsufficientData, "trajectory too short");
  const double c2 = params.c * params.c;
  ClosedFormFit fit;
  fit.ell = traj.momentum(0);
  fit.h = traj.energy(0);
  const double gap = fit.ell * fit.ell * c2 - k * k;
  if (gap == 0.0) throw Error(ErrorCode::kInvalidParameter, "closed form needs ell^2 c^2 != k^2");
  fit.sigma2 = gap / (fit.ell * fit.ell * c2);
  const double s = std::sqrt(std::abs(fit.sigma2));
  const bool trig = fit.sigma2 > 0.0;

  double scc = 0.0, scs = 0.0, sss = 0.0, scy = 0.0, ssy = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double x = s * traj.theta(i);
    const double cc = trig ? std::cos(x) : std::cosh(x);
    const double ss = trig ? std::sin(x) : std::sinh(x);
    const double y = (gap / traj.r(i) - k * (fit.h + params.m * c2)) / c2;
    scc += cc * cc;
    scs += cc * ss;
    sss += ss * ss;
    scy += cc * y;
    ssy += ss * y;
  }
  const double det = scc * sss - scs * scs;
  fit.a = (scy * sss - ssy * scs) / det;
  fit.b = (ssy * scc - scy * scs) / det;
  if (trig) {
    fit.amp = std::hypot(fit.a, fit.b);
    fit.theta0 = std::atan2(fit.b, fit.a) / s;
    fit.phase_form = true;
  } else if (std::abs(fit.a) > std::abs(fit.b)) {
    fit.amp = std::copysign(std::sqrt(fit.a * fit.a - fit.b * fit.b), fit.a);
    fit.theta0 = std::atanh(-fit.b / fit.a) / s;
    fit.phase_form = true;
  }
  for (std::size_t i = 0; i < traj.size(); ++i) {
    fit.max_residual = std::max(
        fit.max_residual, std::abs(fit.inverse_radius(traj.theta(i), k, params) - 1.0 / traj.r(i)));
  }
  return fit;
}

Precession apsidal_precession(const Trajectory& traj, double k, const PhysicalParams& params) {
  Precession out;
  for (const Apsis& ap : apsis_times(traj)) {
    if (ap.kind == EventKind::kPerihelion) out.perihelion_angles.push_back(traj.theta_at(ap.time));
  }
  const std::size_t n = out.perihelion_angles.size();
  if (n < 2) throw Error(ErrorCode::kInsufficientData, "need at least two perihelia");
  out.delta_theta = (out.perihelion_angles.back() - out.perihelion_angles.front()) /
                    static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = out.perihelion_angles[i] - out.perihelion_angles[i - 1];
    out.max_spread = std::max(out.max_spread, std::abs(gap - out.delta_theta));
  }
  out.delta_theta = std::abs(out.delta_theta);
  out.per_period = out.delta_theta - kTwoPi;
  const SigmaInfo sig = sigma_and_min_energy(traj.momentum(0), k, params);
  if (sig.sigma2_defined && sig.sigma2 > 0.0) {
    out.predicted = kTwoPi / sig.sigma;
    out.predicted_per_period = kTwoPi * (1.0 / sig.sigma - 1.0);
  } else {
    out.predicted = std::numeric_limits<double>::quiet_NaN();
    out.predicted_per_period = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace relorbit

#include "relorbit/clairaut.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "relorbit/dynamics.hpp"
#include "relorbit/roots.hpp"

namespace relorbit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_ell(double ell) {
  if (!(ell != 0.0) || !std::isfinite(ell)) {
    throw Error(ErrorCode::kInvalidParameter,
                "reduced system needs nonzero angular momentum (radial motion is handled by "
                "the collision flow)");
  }
}

// Value at zero of the polynomial interpolating (x_i, f_i) (Neville).
double extrapolate_to_zero(std::vector<double> x, std::vector<double> f) {
  const std::size_t n = x.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      const double xa = x[i];
      const double xb = x[i + level];
      f[i] = (xb * f[i] - xa * f[i + 1]) / (xb - xa);
    }
  }
  return f[0];
}

// Solves the square system a x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t j = col; j < n; ++j) a[r][j] -= f * a[col][j];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

double clairaut_gamma(double rho, double eta, double ell, const PhysicalParams& params) {
  const double cm = params.c * params.m;
  return std::sqrt(1.0 + ell * ell * (rho * rho + eta * eta) / (cm * cm));
}

std::array<double, 2> clairaut_rhs(const ClairautState& s, const Potential& pot,
                                   const PhysicalParams& params) {
  require_ell(s.ell);
  if (!(s.rho > 0.0)) throw Error(ErrorCode::kDomain, "reduced system needs rho > 0");
  const double gamma = clairaut_gamma(s.rho, s.eta, s.ell, params);
  return {s.eta, -s.rho - params.m / (s.ell * s.ell) * gamma * pot.dw(s.rho)};
}

double clairaut_energy(const ClairautState& s, const Potential& pot,
                       const PhysicalParams& params) {
  const double gamma = clairaut_gamma(s.rho, s.eta, s.ell, params);
  return params.m * params.c * params.c * (gamma - 1.0) + pot.w(s.rho);
}

ClairautPoint to_clairaut(const PhaseState& s) {
  const double r = norm(s.q);
  if (!(r > 0.0)) throw Error(ErrorCode::kSingularity, "reduction at the origin");
  const double ell = angular_momentum(s);
  require_ell(ell);
  // p_r = <q,p>/r = -ell * eta, p_theta = ell / r = ell * rho.
  const double eta = -dot(s.q, s.p) / (r * ell);
  return {{1.0 / r, eta, ell}, std::atan2(s.q[1], s.q[0])};
}

PhaseState from_clairaut(const ClairautState& s, double theta) {
  require_ell(s.ell);
  if (!(s.rho > 0.0)) throw Error(ErrorCode::kDomain, "reduced state needs rho > 0");
  const Vec2 alpha{std::cos(theta), std::sin(theta)};
  const Vec2 beta = perp(alpha);
  const double p_radial = -s.ell * s.eta;
  const double p_angular = s.ell * s.rho;
  return {(1.0 / s.rho) * alpha, p_radial * alpha + p_angular * beta};
}

double equilibrium_residual(double rho, double ell, const Potential& pot,
                            const PhysicalParams& params) {
  require_ell(ell);
  return rho + params.m / (ell * ell) * clairaut_gamma(rho, 0.0, ell, params) * pot.dw(rho);
}

EquilibriumSet equilibrium_solve(double ell, const Potential& pot, const PhysicalParams& params,
                                 double rho_lo, double rho_hi) {
  require_ell(ell);
  if (!(rho_lo > 0.0) || !(rho_hi > rho_lo)) {
    if (const TabulatedProfile* prof = pot.profile()) {
      rho_lo = prof->rho_min();
      rho_hi = prof->rho_max();
    } else {
      rho_lo = 1e-6;
      rho_hi = 1e6;
    }
  }
  constexpr std::size_t kScan = 4000;
  auto f = [&](double rho) { return equilibrium_residual(rho, ell, pot, params); };
  std::vector<double> grid(kScan + 1);
  const double ratio = std::log(rho_hi / rho_lo);
  for (std::size_t i = 0; i <= kScan; ++i) {
    grid[i] = rho_lo * std::exp(ratio * static_cast<double>(i) / kScan);
  }
  grid.front() = rho_lo;
  grid.back() = rho_hi;

  EquilibriumSet out;
  std::vector<double> values(grid.size());
  double max_scaled = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = f(grid[i]);
    max_scaled = std::max(max_scaled, std::abs(values[i]) / grid[i]);
  }
  if (max_scaled < 1e-12) {
    out.continuum = true;
    return out;
  }
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (values[i] == 0.0) {
      out.roots.push_back(grid[i]);
    } else if ((values[i] > 0.0) != (values[i + 1] > 0.0) && values[i + 1] != 0.0) {
      out.roots.push_back(roots::solve_bracketed(f, grid[i], grid[i + 1], 1e-15));
    }
  }
  if (values.back() == 0.0) out.roots.push_back(grid.back());
  return out;
}

Linearization linearized_frequency(double rho0, double ell, const Potential& pot,
                                   const PhysicalParams& params) {
  require_ell(ell);
  const double residual = equilibrium_residual(rho0, ell, pot, params);
  if (!(std::abs(residual) <= 1e-8 * rho0)) {
    throw Error(ErrorCode::kConsistency, "(rho0, 0) is not an equilibrium");
  }
  const double gamma = clairaut_gamma(rho0, 0.0, ell, params);
  const double c2 = params.c * params.c;
  const double dw = pot.dw(rho0);
  Linearization lin;
  lin.a_coeff = 1.0 + rho0 * dw / (c2 * params.m * gamma) +
                params.m / (ell * ell) * gamma * pot.d2w(rho0);
  lin.b_coeff = 0.0;  // B = eta W' / (c^2 m gamma) vanishes on eta = 0
  lin.saddle = lin.a_coeff < 0.0;
  lin.theta0 = lin.a_coeff > 0.0 ? kTwoPi / std::sqrt(lin.a_coeff)
                                 : std::numeric_limits<double>::quiet_NaN();
  return lin;
}

// ---------------------------------------------------------------------------
// Period function

double period_at(double rho0, double ell, double xi, const Potential& pot,
                 const PhysicalParams& params, const PeriodOptions& opt) {
  require_ell(ell);
  if (!(xi > 0.0)) throw Error(ErrorCode::kInvalidParameter, "xi must be positive");
  const double cm2 = params.c * params.c * params.m * params.m;
  const double ell2 = ell * ell;
  // Radial offset from the centre F(R, phi).
  auto offset = [&](double radius, double phi) {
    const double cphi = std::cos(phi);
    const double rho = rho0 + radius * cphi;
    if (!(rho > 0.0)) throw Error(ErrorCode::kBasinExceeded, "orbit leaves rho > 0");
    const double gamma =
        std::sqrt(1.0 + (radius * radius + rho0 * rho0 + 2.0 * radius * rho0 * cphi) * ell2 / cm2);
    return rho0 + params.m / ell2 * gamma * pot.dw(rho);
  };
  // y = (R / xi, elapsed theta).
  auto rhs = [&](double phi, const ode::State<2>& y) -> ode::State<2> {
    const double radius = y[0] * xi;
    if (!(radius > 0.0)) throw Error(ErrorCode::kBasinExceeded, "radius collapsed");
    const double f = offset(radius, phi);
    const double denom = 1.0 + std::cos(phi) * f / radius;
    if (!(denom > 0.0)) throw Error(ErrorCode::kBasinExceeded, "orbit does not wind the centre");
    return {std::sin(phi) * f / (denom * xi), 1.0 / denom};
  };
  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  o.max_step = 0.25;
  const ode::Result<2> res = ode::dopri5<2>(rhs, 0.0, ode::State<2>{1.0, 0.0}, kTwoPi, o);
  if (res.status != ode::Status::kCompleted) {
    throw Error(ErrorCode::kBasinExceeded, "period integration failed: orbit escapes the centre");
  }
  return res.solution.y.back()[1];
}

double return_map_period(double rho0, double ell, double xi, const Potential& pot,
                         const PhysicalParams& params, const PeriodOptions& opt) {
  require_ell(ell);
  auto rhs = [&](double, const ode::State<2>& y) {
    const auto d = clairaut_rhs({y[0], y[1], ell}, pot, params);
    return ode::State<2>{d[0], d[1]};
  };
  const ode::State<2> y0{rho0 + xi, 0.0};
  const double start_slope = rhs(0.0, y0)[1];
  if (start_slope == 0.0) throw Error(ErrorCode::kConsistency, "start point is an equilibrium");
  const bool start_down = start_slope < 0.0;
  // The orbit closes at the second sign change of eta.
  int crossings = 0;
  auto stop = [&](const ode::DenseStep<2>& step) -> std::optional<double> {
    const double e0 = step.eval(step.t0)[1];
    const double e1 = step.eval(step.t1())[1];
    const bool left = step.t0 == 0.0;
    const bool changed = left ? ((e1 < 0.0) != start_down) : ((e0 > 0.0) != (e1 > 0.0));
    if (!changed || left) return std::nullopt;
    if (++crossings < 2) return std::nullopt;
    auto g = [&](double t) { return step.eval(t)[1]; };
    auto dg = [&](double t) { return step.derivative(t)[1]; };
    return roots::refine_event(g, dg, step.t0, step.t1(), 1e-14);
  };
  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol * std::max(1.0, rho0);
  o.max_step = 0.25;
  const ode::Result<2> res = ode::dopri5<2>(rhs, 0.0, y0, 1e3, o, ode::NoVeto{}, stop);
  if (res.status != ode::Status::kStopped) {
    throw Error(ErrorCode::kBasinExceeded, "orbit did not return to the transversal");
  }
  return res.solution.t_back();
}

std::vector<double> default_xis(double rho0) {
  const double xi0 = 0.05 * rho0;
  return {xi0, xi0 / 2.0, xi0 / 4.0, xi0 / 8.0};
}

PeriodFit fit_period_samples(double rho0, double ell, double theta0,
                             std::vector<PeriodSample> samples) {
  PeriodFit fit;
  fit.rho0 = rho0;
  fit.ell = ell;
  fit.theta0 = theta0;
  std::sort(samples.begin(), samples.end(),
            [](const PeriodSample& a, const PeriodSample& b) { return a.xi > b.xi; });
  fit.samples = samples;
  const std::size_t n = samples.size();
  if (n == 0) return fit;

  // c2: extrapolate (P - Theta0) / xi^2 to xi = 0 through all samples, and
  // through all but the largest to estimate the error.
  std::vector<double> x, d;
  for (const PeriodSample& s : samples) {
    x.push_back(s.xi);
    d.push_back((s.period - theta0) / (s.xi * s.xi));
  }
  fit.c2 = extrapolate_to_zero(x, d);
  fit.residual = n > 1 ? std::abs(fit.c2 - extrapolate_to_zero({x.begin() + 1, x.end()},
                                                               {d.begin() + 1, d.end()}))
                       : std::abs(fit.c2);

  // c1: interpolate P - Theta0 with the odd term left free.
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pw = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      pw *= samples[i].xi;
      a[i][j] = pw;
    }
    b[i] = samples[i].period - theta0;
  }
  fit.c1 = solve_dense(std::move(a), std::move(b))[0];
  return fit;
}

PeriodFit period_function(double rho0, double ell, const Potential& pot,
                          const PhysicalParams& params, std::span<const double> xis,
                          const PeriodOptions& opt) {
  const Linearization lin = linearized_frequency(rho0, ell, pot, params);
  if (!(lin.a_coeff > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "equilibrium is not a centre");
  }
  std::vector<PeriodSample> samples;
  for (double xi : xis) samples.push_back({xi, period_at(rho0, ell, xi, pot, params, opt)});
  return fit_period_samples(rho0, ell, lin.theta0, std::move(samples));
}

void write_period_csv(std::ostream& out, const PeriodFit& fit) {
  out << "xi,P\n";
  for (const PeriodSample& s : fit.samples) {
    out << format_double(s.xi) << ',' << format_double(s.period) << '\n';
  }
}

std::string period_fit_json(const PeriodFit& fit) {
  nlohmann::json j = {{"rho0", fit.rho0},     {"ell", fit.ell},
                      {"Theta0", fit.theta0}, {"c2", fit.c2},
                      {"c1", fit.c1},         {"residual", fit.residual}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Orbits and time reconstruction

ClairautState ClairautOrbit::state_at(double theta) const {
  const ode::State<3> y = solution_.eval(theta);
  return {y[0], y[1], ell_};
}

ClairautOrbit integrate_clairaut(const ClairautState& s0, double theta_begin, double theta_end,
                                 double t_begin, const Potential& pot,
                                 const PhysicalParams& params, double rtol, double atol) {
  require_ell(s0.ell);
  if (!(s0.rho > 0.0)) throw Error(ErrorCode::kDomain, "reduced state needs rho > 0");
  const double ell = s0.ell;
  auto rhs = [&](double, const ode::State<3>& y) {
    const auto d = clairaut_rhs({y[0], y[1], ell}, pot, params);
    const double dt = params.m * clairaut_gamma(y[0], y[1], ell, params) / (ell * y[0] * y[0]);
    return ode::State<3>{d[0], d[1], dt};
  };
  ode::Options o;
  o.rtol = rtol;
  o.atol = atol;
  o.max_step = 0.1;
  ode::Result<3> res =
      ode::dopri5<3>(rhs, theta_begin, ode::State<3>{s0.rho, s0.eta, t_begin}, theta_end, o);
  if (res.status != ode::Status::kCompleted) {
    throw Error(ErrorCode::kDomain, "reduced orbit left rho > 0");
  }
  res.solution.make_ascending();
  return ClairautOrbit(std::move(res.solution), ell);
}

std::optional<Fraction> rational_approximation(double x, long long max_den, double tol) {
  if (!std::isfinite(x)) return std::nullopt;
  long long h_prev = 1, h_prev2 = 0;
  long long k_prev = 0, k_prev2 = 1;
  double rem = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double fl = std::floor(rem);
    const auto a = static_cast<long long>(fl);
    const long long h = a * h_prev + h_prev2;
    const long long k = a * k_prev + k_prev2;
    if (k > max_den) return std::nullopt;
    if (std::abs(x - static_cast<double>(h) / static_cast<double>(k)) <= tol) {
      return Fraction{h, k};
    }
    h_prev2 = h_prev;
    h_prev = h;
    k_prev2 = k_prev;
    k_prev = k;
    const double frac = rem - fl;
    if (frac == 0.0) return std::nullopt;
    rem = 1.0 / frac;
  }
  return std::nullopt;
}

TimeReconstruction time_reconstruction(const ClairautState& s0, double theta_period,
                                       const Potential& pot, const PhysicalParams& params,
                                       std::size_t n_samples) {
  if (!(theta_period > 0.0)) throw Error(ErrorCode::kPrecondition, "period must be positive");
  if (n_samples < 2) throw Error(ErrorCode::kPrecondition, "need at least two samples");
  const ClairautOrbit orbit =
      integrate_clairaut(s0, 0.0, 2.0 * theta_period, 0.0, pot, params, 1e-13, 1e-15);
  const ClairautState back = orbit.state_at(theta_period);
  const double scale = std::max(s0.rho, std::abs(s0.eta));
  if (std::abs(back.rho - s0.rho) > 1e-9 * scale || std::abs(back.eta - s0.eta) > 1e-9 * scale) {
    throw Error(ErrorCode::kPrecondition, "solution is not periodic with the given period");
  }

  TimeReconstruction out;
  out.theta_period = theta_period;
  out.drift = orbit.time_at(theta_period) / theta_period;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double th = theta_period * static_cast<double>(i) / static_cast<double>(n_samples);
    const double t = orbit.time_at(th);
    out.theta.push_back(th);
    out.psi.push_back(t - out.drift * th);
    const double shift = orbit.time_at(th + theta_period) - t;
    out.shift_error = std::max(out.shift_error, std::abs(shift - out.drift * theta_period));
  }

  constexpr long long kMaxDen = 64;
  constexpr double kClosureTol = 1e-9;
  if (const auto frac =
          rational_approximation(theta_period / std::numbers::pi, kMaxDen, kClosureTol)) {
    out.closed = true;
    out.theta_over_pi = *frac;
    // Theta / (2 pi) = num / (2 den); the orbit closes after `turns` rho-periods.
    const long long g = std::gcd(frac->num, 2 * frac->den);
    const long long turns = 2 * frac->den / g;
    out.orbit_period = static_cast<double>(turns) * out.drift * theta_period;
  }
  return out;
}

}  // namespace relorbit

#include "relorbit/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "relorbit/roots.hpp"

namespace relorbit {

namespace {

using Y3 = ode::State<3>;

double speed_factor(double r, double w1, double w2, const PhysicalParams& params) {
  const double mr = params.m * r;
  return std::sqrt(mr * mr + (w1 * w1 + w2 * w2) / (params.c * params.c));
}

// Solves the small dense system a x = b (partial pivoting).
template <std::size_t N>
std::array<double, N> solve_small(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < N; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t j = col; j < N; ++j) a[r][j] -= f * a[col][j];
      b[r] -= f * b[col];
    }
  }
  std::array<double, N> x{};
  for (std::size_t i = N; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < N; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

// Least squares y ~ sum_j coef_j basis_j(x) through the normal equations.
template <std::size_t N, class Basis>
std::array<double, N> least_squares(const std::vector<double>& x, const std::vector<double>& y,
                                    Basis basis) {
  std::array<std::array<double, N>, N> ata{};
  std::array<double, N> aty{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::array<double, N> row = basis(x[i]);
    for (std::size_t j = 0; j < N; ++j) {
      aty[j] += row[j] * y[i];
      for (std::size_t l = 0; l < N; ++l) ata[j][l] += row[j] * row[l];
    }
  }
  return solve_small<N>(ata, aty);
}

}  // namespace

CollisionVars w_transform(const PhaseState& s, double k, const PhysicalParams& params) {
  const double r = norm(s.q);
  if (!(r > 0.0)) throw Error(ErrorCode::kDomain, "collision variables need |q| > 0");
  const Potential coulomb = make_potential(PotentialKind::kCoulomb, k, params);
  return {r, std::atan2(s.q[1], s.q[0]), dot(s.q, s.p), cross(s.q, s.p),
          hamiltonian(s, coulomb, params)};
}

PhaseState w_inverse(const Vec2& q, double w1, double w2) {
  const double r2 = norm2(q);
  if (!(r2 > 0.0)) throw Error(ErrorCode::kDomain, "collision variables need |q| > 0");
  return {q, (1.0 / r2) * (w1 * q + w2 * perp(q))};
}

PhaseState to_phase_state(const CollisionVars& v) {
  if (!(v.r > 0.0)) throw Error(ErrorCode::kDomain, "collision variables need r > 0");
  const Vec2 q{v.r * std::cos(v.theta), v.r * std::sin(v.theta)};
  return w_inverse(q, v.w1, v.w2);
}

double manifold_residual(const CollisionVars& v, double k, const PhysicalParams& params) {
  const double c2 = params.c * params.c;
  const double lhs = (v.h + params.m * c2) * v.r;
  const double rhs = c2 * speed_factor(v.r, v.w1, v.w2, params) - k;
  return lhs * lhs - rhs * rhs;
}

RegularizedRates regularized_rhs(const CollisionVars& v, const PhysicalParams& params) {
  const double s = speed_factor(v.r, v.w1, v.w2, params);
  const double mc = params.m * params.c;
  RegularizedRates out;
  out.dr = v.w1 / s;
  out.dw1 = v.h + mc * params.c - mc * mc * v.r / s;
  out.angle_singular = v.r == 0.0 && v.w2 != 0.0;
  out.dtheta = out.angle_singular ? std::numeric_limits<double>::quiet_NaN()
               : v.w2 == 0.0      ? 0.0
                                  : v.w2 / (v.r * s);
  return out;
}

// ---------------------------------------------------------------------------
// Regularized trajectories

CollisionVars RegularizedTrajectory::vars(std::size_t i) const {
  const Y3& y = solution_.y[i];
  return {y[0], y[1], y[2], w2_, h_};
}

CollisionVars RegularizedTrajectory::at(double t) const {
  const Y3 y = solution_.eval(t);
  return {y[0], y[1], y[2], w2_, h_};
}

RegularizedTrajectory integrate_regularized(const CollisionVars& v0, double t_end,
                                            const PhysicalParams& params,
                                            const RegularizedConfig& cfg) {
  params.validate();
  if (!(v0.r > cfg.r_event)) {
    throw Error(ErrorCode::kPrecondition, "initial radius must exceed the stopping radius");
  }
  const double w2 = v0.w2;
  const double h = v0.h;
  auto rhs = [&](double, const Y3& y) {
    const RegularizedRates d = regularized_rhs({y[0], y[1], y[2], w2, h}, params);
    return Y3{d.dr, d.dtheta, d.dw1};
  };
  const double r_event = cfg.r_event;
  auto stop = [&](const ode::DenseStep<3>& step) -> std::optional<double> {
    if (!(step.eval(step.t1())[0] < r_event)) return std::nullopt;
    auto g = [&](double t) { return step.eval(t)[0] - r_event; };
    auto dg = [&](double t) { return step.derivative(t)[0]; };
    return roots::refine_event(g, dg, step.t0, step.t1(), 1e-14 * std::max(1.0, std::abs(step.t0)));
  };
  ode::Options opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  opt.max_step = cfg.max_step;
  ode::Result<3> res =
      ode::dopri5<3>(rhs, 0.0, Y3{v0.r, v0.theta, v0.w1}, t_end, opt, ode::NoVeto{}, stop);
  const bool collided = res.status == ode::Status::kStopped;
  if (res.status == ode::Status::kMaxSteps || res.status == ode::Status::kStepUnderflow) {
    throw Error(ErrorCode::kTruncated, "regularized integration did not complete");
  }
  res.solution.make_ascending();
  return RegularizedTrajectory(std::move(res.solution), w2, h, collided);
}

std::vector<RegularizedApsis> regularized_apses(const RegularizedTrajectory& traj) {
  std::vector<RegularizedApsis> out;
  const auto& sol = traj.solution();
  auto g = [&](double t) { return sol.eval(t)[2]; };
  auto dg = [&](double t) { return sol.derivative(t)[2]; };
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double a = sol.y[i - 1][2];
    const double b = sol.y[i][2];
    if (a == 0.0 || (a > 0.0) == (b > 0.0)) continue;
    if (b == 0.0 && i + 1 < traj.size() && (sol.y[i + 1][2] > 0.0) == (a > 0.0)) continue;
    const double t = roots::refine_event(g, dg, sol.t[i - 1], sol.t[i], 1e-13);
    out.push_back({t, sol.eval(t)[0], a > 0.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collision asymptotics

const char* to_string(CollisionBranch branch) {
  return branch == CollisionBranch::kIncoming ? "incoming" : "outgoing";
}

CollisionRun integrate_to_collision(const PhaseState& state0, double k,
                                    const PhysicalParams& params, CollisionBranch branch,
                                    const CollisionConfig& cfg) {
  params.validate();
  if (!(k > 0.0)) throw Error(ErrorCode::kInvalidParameter, "coupling k must be positive");
  if (!(cfg.r_stop > 0.0) || !(cfg.switch_fraction > 0.0 && cfg.switch_fraction < 1.0) ||
      cfg.window_points < 3) {
    throw Error(ErrorCode::kInvalidParameter, "invalid collision configuration");
  }
  const CollisionVars v0 = w_transform(state0, k, params);
  const double c = params.c;
  const double c2 = c * c;
  if (v0.w2 != 0.0 && v0.w2 * v0.w2 * c2 >= k * k) {
    throw Error(ErrorCode::kWrongRegime, "collisions need |ell| < k/c (or ell = 0)");
  }
  const double w2 = v0.w2;
  const double h = v0.h;
  const double dir = branch == CollisionBranch::kIncoming ? 1.0 : -1.0;

  // Phase 1: the flow in t down to the switch radius.
  RegularizedConfig rc;
  rc.rtol = cfg.rtol;
  rc.atol = cfg.atol;
  rc.r_event = cfg.switch_fraction * v0.r;
  if (!(rc.r_event > cfg.r_stop)) {
    throw Error(ErrorCode::kInvalidParameter, "switch radius must exceed the stopping radius");
  }
  RegularizedTrajectory approach = integrate_regularized(v0, dir * cfg.t_max, params, rc);
  if (!approach.collided()) {
    throw Error(ErrorCode::kPrecondition, "no collision along this branch within t_max");
  }
  const double t_switch = dir > 0.0 ? approach.t_end() : approach.t_begin();
  const CollisionVars vs = approach.at(t_switch);

  // Phase 2: u = ln r as independent variable, y = (t, theta, w1).
  auto rhs = [&](double u, const Y3& y) {
    const double r = std::exp(u);
    const double w1 = y[2];
    if (w1 == 0.0) throw Error(ErrorCode::kConsistency, "w1 vanished near the collision");
    const double s = speed_factor(r, w1, w2, params);
    const double mc = params.m * c;
    return Y3{r * s / w1, w2 / w1, r * (h + mc * c - mc * mc * r / s) * s / w1};
  };
  ode::Options opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  const double u_stop = std::log(cfg.r_stop);
  ode::Result<3> tail_res =
      ode::dopri5<3>(rhs, std::log(vs.r), Y3{t_switch, vs.theta, vs.w1}, u_stop, opt);
  if (tail_res.status != ode::Status::kCompleted) {
    throw Error(ErrorCode::kConsistency, "final approach integration failed");
  }
  ode::DenseSolution<3> tail = std::move(tail_res.solution);
  tail.make_ascending();

  CollisionRun run{std::move(approach), {}, {}};
  for (std::size_t i = 0; i < tail.size(); ++i) {
    run.tail.push_back({tail.t[i], tail.y[i][0], tail.y[i][1], tail.y[i][2]});
  }

  CollisionFit& fit = run.fit;
  fit.branch = branch;
  fit.w2 = w2;
  const Y3 end = tail.eval(u_stop);
  {
    const double r = cfg.r_stop;
    const double w1 = end[2];
    const double s = speed_factor(r, w1, w2, params);
    const double mc = params.m * c;
    const double dw1_dr = (h + mc * c - mc * mc * r / s) * s / w1;
    fit.w10 = w1 - r * dw1_dr;
    fit.t_collision = end[0] + dir * r * s / std::abs(w1);
  }
  if (!(std::abs(fit.w10) > 1e-8 * k / c)) {
    throw Error(ErrorCode::kConsistency, "w1 tends to zero at the collision");
  }
  fit.w_norm_at_collision = std::hypot(fit.w10, w2);
  fit.slope_pred = c2 * std::abs(fit.w10) / k;
  fit.lambda_pred = w2 / fit.w10;
  fit.lambda_pred_ell = cross(state0.q, state0.p) / fit.w10;

  // Manifold and speed audit over both phases.
  auto audit = [&](const CollisionVars& v) {
    fit.max_manifold_residual =
        std::max(fit.max_manifold_residual, std::abs(manifold_residual(v, k, params)));
    fit.max_radial_speed =
        std::max(fit.max_radial_speed, std::abs(regularized_rhs(v, params).dr));
  };
  for (std::size_t i = 0; i < run.approach.size(); ++i) audit(run.approach.vars(i));
  for (const auto& row : run.tail) audit({std::exp(row[0]), row[2], row[3], w2, h});

  // Window reference: last turning point before the collision, else the start.
  double t_ref = 0.0;
  for (const RegularizedApsis& ap : regularized_apses(run.approach)) {
    if (dir > 0.0 ? ap.time > t_ref : ap.time < t_ref) t_ref = ap.time;
  }
  fit.window_start = std::abs(fit.t_collision - t_ref) / 10.0;

  // State at t = t_c - dir * tau, from whichever phase covers it.
  auto radius_angle = [&](double tau) -> std::pair<double, double> {
    const double t = fit.t_collision - dir * tau;
    if (dir > 0.0 ? t <= t_switch : t >= t_switch) {
      const CollisionVars v = run.approach.at(t);
      return {v.r, v.theta};
    }
    // t(u) is monotone along the tail.
    auto g = [&](double u) { return tail.eval(u)[0] - t; };
    const double u = roots::solve_bracketed(g, tail.t_front(), tail.t_back(), 1e-15);
    return {std::exp(u), tail.eval(u)[1]};
  };

  std::vector<double> tau, rr, th, ratio, lt;
  for (std::size_t n = 0; n < cfg.window_points; ++n) {
    const double tn = fit.window_start * std::ldexp(1.0, -static_cast<int>(n));
    const auto [r, theta] = radius_angle(tn);
    tau.push_back(tn);
    rr.push_back(r);
    th.push_back(theta);
    ratio.push_back(r / tn);
    lt.push_back(std::log(tn));
  }
  fit.window = tau;

  const auto lin = least_squares<3>(tau, ratio, [](double x) {
    return std::array<double, 3>{1.0, x, x * x};
  });
  fit.slope = lin[0];
  const auto ang = least_squares<3>(tau, th, [](double x) {
    return std::array<double, 3>{1.0, std::log(x), x};
  });
  fit.theta0 = ang[0];
  fit.lambda = ang[1];
  for (std::size_t i = 0; i < tau.size(); ++i) {
    fit.residual_r = std::max(fit.residual_r, std::abs(ratio[i] - lin[0] - (lin[1] + lin[2] * tau[i]) * tau[i]));
    fit.residual_theta = std::max(
        fit.residual_theta, std::abs(th[i] - ang[0] - ang[1] * lt[i] - ang[2] * tau[i]));
    fit.theta_remainder_ratio =
        std::max(fit.theta_remainder_ratio,
                 std::abs(th[i] - fit.theta0 - fit.lambda * lt[i]) / std::abs(lt[i]));
  }
  // Remainder order of r(t) - slope * tau.
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double rem = std::abs(rr[i] - fit.slope * tau[i]);
    if (rem > 0.0) {
      lx.push_back(lt[i]);
      ly.push_back(std::log(rem));
    }
  }
  if (lx.size() >= 2) {
    fit.r_remainder_exponent =
        least_squares<2>(lx, ly, [](double x) { return std::array<double, 2>{1.0, x}; })[1];
  }
  return run;
}

std::string collision_fit_json(const CollisionFit& fit) {
  nlohmann::json j = {
      {"branch", to_string(fit.branch)},
      {"t_collision", fit.t_collision},
      {"w10", fit.w10},
      {"theta0", fit.theta0},
      {"slope", fit.slope},
      {"slope_pred", fit.slope_pred},
      {"lambda", fit.lambda},
      {"lambda_pred", fit.lambda_pred},
      {"lambda_pred_ell", fit.lambda_pred_ell},
      {"residuals",
       {{"r_over_tau", fit.residual_r},
        {"theta", fit.residual_theta},
        {"r_remainder_exponent", fit.r_remainder_exponent},
        {"theta_remainder_ratio", fit.theta_remainder_ratio},
        {"manifold", fit.max_manifold_residual}}},
      {"w_norm_at_collision", fit.w_norm_at_collision},
      {"window", {{"t_w", fit.window_start}, {"tau", fit.window}}},
  };
  return j.dump(2);
}

}  // namespace relorbit

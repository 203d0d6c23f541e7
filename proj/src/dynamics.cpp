#include "relorbit/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "relorbit/roots.hpp"

namespace relorbit {

namespace {

using Y4 = ode::State<4>;

PhaseState unpack(const Y4& y) { return {{y[0], y[1]}, {y[2], y[3]}}; }
Y4 pack(const PhaseState& s) { return {s.q[0], s.q[1], s.p[0], s.p[1]}; }

// Signed angle swept from a to b, in (-pi, pi].
double swept_angle(const Vec2& a, const Vec2& b) { return std::atan2(cross(a, b), dot(a, b)); }

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0) || !(event_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "integrator tolerances must be positive");
  }
  if (!(max_step > 0.0) || max_steps == 0) {
    throw Error(ErrorCode::kInvalidParameter, "step limits must be positive");
  }
  if (!(collision_radius >= 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "collision radius must be non-negative");
  }
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kCollision: return "collision";
    case EventKind::kTruncated: return "truncated";
    case EventKind::kPerihelion: return "perihelion";
    case EventKind::kAphelion: return "aphelion";
  }
  return "unknown";
}

CartesianRates cartesian_rhs(const PhaseState& state, const Potential& pot,
                             const PhysicalParams& params) {
  const double r = norm(state.q);
  if (!(r > 0.0)) throw Error(ErrorCode::kSingularity, "equations of motion at the origin");
  const double force = pot.dv(r) / r;
  return {velocity_from_momentum(state.p, params), (-force) * state.q};
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(ode::DenseSolution<4> solution, Potential pot, PhysicalParams params,
                       std::vector<Event> events)
    : solution_(std::move(solution)),
      pot_(std::move(pot)),
      params_(params),
      events_(std::move(events)) {
  solution_.make_ascending();
  const std::size_t n = solution_.size();
  r_.resize(n);
  theta_.resize(n);
  energy_.resize(n);
  momentum_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PhaseState s = state(i);
    r_[i] = norm(s.q);
    theta_[i] = i == 0 ? std::atan2(s.q[1], s.q[0])
                       : theta_[i - 1] + swept_angle(state(i - 1).q, s.q);
    energy_[i] = hamiltonian(s, pot_, params_);
    momentum_[i] = angular_momentum(s);
  }
}

PhaseState Trajectory::state(std::size_t i) const { return unpack(solution_.y[i]); }

PhaseState Trajectory::at(double t) const { return unpack(solution_.eval(t)); }

PhaseState Trajectory::rate_at(double t) const { return unpack(solution_.derivative(t)); }

double Trajectory::theta_at(double t) const {
  const std::size_t i = solution_.segment(t);
  const PhaseState s = at(t);
  return theta_[i] + swept_angle(state(i).q, s.q);
}

bool Trajectory::collided() const {
  for (const Event& e : events_) {
    if (e.kind == EventKind::kCollision) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// integrate

Trajectory integrate(const PhaseState& state0, double t_start, double t_stop,
                     const Potential& pot, const PhysicalParams& params,
                     const IntegratorConfig& cfg) {
  params.validate();
  cfg.validate();
  if (!(norm(state0.q) > 0.0)) {
    throw Error(ErrorCode::kSingularity, "initial position at the origin");
  }
  if (!(t_stop != t_start) || !std::isfinite(t_stop - t_start)) {
    throw Error(ErrorCode::kInvalidParameter, "degenerate time span");
  }

  auto rhs = [&](double, const Y4& y) {
    const CartesianRates d = cartesian_rhs(unpack(y), pot, params);
    return Y4{d.dq[0], d.dq[1], d.dp[0], d.dp[1]};
  };
  // Keeps the unwrapped angle well defined: at most a quarter turn per step.
  auto veto = [](double, const Y4& y0, double, const Y4& y1) {
    const Vec2 q0{y0[0], y0[1]};
    const Vec2 q1{y1[0], y1[1]};
    return std::abs(swept_angle(q0, q1)) > 0.5 * std::numbers::pi;
  };
  const double rc = cfg.collision_radius;
  auto stop = [&](const ode::DenseStep<4>& step) -> std::optional<double> {
    const Y4 y1 = step.eval(step.t1());
    if (!(std::hypot(y1[0], y1[1]) < rc)) return std::nullopt;
    auto g = [&](double t) {
      const Y4 y = step.eval(t);
      return std::hypot(y[0], y[1]) - rc;
    };
    auto dg = [&](double t) {
      const Y4 y = step.eval(t);
      const Y4 dy = step.derivative(t);
      return (y[0] * dy[0] + y[1] * dy[1]) / std::hypot(y[0], y[1]);
    };
    return roots::refine_event(g, dg, step.t0, step.t1(), cfg.event_tol);
  };

  ode::Options opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  opt.max_step = cfg.max_step;
  opt.max_steps = cfg.max_steps;
  ode::Result<4> res = ode::dopri5<4>(rhs, t_start, pack(state0), t_stop, opt, veto, stop);

  std::vector<Event> events;
  switch (res.status) {
    case ode::Status::kCompleted: break;
    case ode::Status::kStopped:
    case ode::Status::kStepUnderflow:
      events.push_back({EventKind::kCollision, res.solution.t_back()});
      break;
    case ode::Status::kMaxSteps: {
      events.push_back({EventKind::kTruncated, res.solution.t_back()});
      auto partial =
          std::make_shared<const Trajectory>(std::move(res.solution), pot, params, events);
      throw TruncatedIntegration(std::move(partial));
    }
  }
  return Trajectory(std::move(res.solution), pot, params, std::move(events));
}

// ---------------------------------------------------------------------------
// Apsides

std::vector<Apsis> apsis_times(const Trajectory& traj, double event_tol) {
  std::vector<Apsis> out;
  if (traj.size() < 2) return out;

  // Radial rate sign is tracked through g = <q, p>; samples where g is below
  // the noise floor never flip the tracked sign.
  constexpr double kNoiseFloor = 1e-8;
  auto g_at = [&](double t) {
    const PhaseState s = traj.at(t);
    return dot(s.q, s.p);
  };
  auto dg_at = [&](double t) {
    const PhaseState s = traj.at(t);
    const PhaseState d = traj.rate_at(t);
    return dot(d.q, s.p) + dot(s.q, d.p);
  };

  int last_sign = 0;
  std::size_t last_index = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const PhaseState s = traj.state(i);
    const double g = dot(s.q, s.p);
    if (std::abs(g) <= kNoiseFloor * norm(s.q) * norm(s.p)) continue;
    const int sign = g > 0.0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) {
      const double t = roots::refine_event(g_at, dg_at, traj.time(last_index), traj.time(i),
                                           event_tol);
      const EventKind kind = last_sign < 0 ? EventKind::kPerihelion : EventKind::kAphelion;
      out.push_back({t, norm(traj.at(t).q), kind});
    }
    last_sign = sign;
    last_index = i;
  }
  return out;
}

ConservationReport conservation_report(const Trajectory& traj) {
  ConservationReport rep;
  if (traj.size() == 0) return rep;
  const double h0 = traj.energy(0);
  const double l0 = traj.momentum(0);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    rep.energy_abs = std::max(rep.energy_abs, std::abs(traj.energy(i) - h0));
    rep.momentum_abs = std::max(rep.momentum_abs, std::abs(traj.momentum(i) - l0));
  }
  rep.energy_rel = rep.energy_abs / std::max(std::abs(h0), std::numeric_limits<double>::min());
  rep.momentum_rel = rep.momentum_abs / std::max(std::abs(l0), std::numeric_limits<double>::min());
  return rep;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,q1,q2,p1,p2,r,theta,H,L\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const PhaseState s = traj.state(i);
    out << format_double(traj.time(i)) << ',' << format_double(s.q[0]) << ','
        << format_double(s.q[1]) << ',' << format_double(s.p[0]) << ','
        << format_double(s.p[1]) << ',' << format_double(traj.r(i)) << ','
        << format_double(traj.theta(i)) << ',' << format_double(traj.energy(i)) << ','
        << format_double(traj.momentum(i)) << '\n';
  }
}

}  // namespace relorbit

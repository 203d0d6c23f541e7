#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "relorbit/core.hpp"
#include "relorbit/ode.hpp"

namespace relorbit {

struct IntegratorConfig {
  double rtol = 1e-12;
  double atol = 1e-14;
  double max_step = 1.0;
  std::size_t max_steps = 2'000'000;
  double event_tol = 1e-12;
  double collision_radius = 1e-8;

  void validate() const;
};

enum class EventKind { kCollision, kTruncated, kPerihelion, kAphelion };

const char* to_string(EventKind kind);

struct Event {
  EventKind kind;
  double time;
};

struct CartesianRates {
  Vec2 dq;
  Vec2 dp;
};

CartesianRates cartesian_rhs(const PhaseState& state, const Potential& pot,
                             const PhysicalParams& params);

/// Dense, interpolable time series of a Cartesian integration. Sample times
/// are strictly increasing and the polar angle is unwrapped.
class Trajectory {
 public:
  Trajectory(ode::DenseSolution<4> solution, Potential pot, PhysicalParams params,
             std::vector<Event> events);

  std::size_t size() const { return solution_.size(); }
  double t_begin() const { return solution_.t_front(); }
  double t_end() const { return solution_.t_back(); }

  double time(std::size_t i) const { return solution_.t[i]; }
  PhaseState state(std::size_t i) const;
  double r(std::size_t i) const { return r_[i]; }
  double theta(std::size_t i) const { return theta_[i]; }
  double energy(std::size_t i) const { return energy_[i]; }
  double momentum(std::size_t i) const { return momentum_[i]; }

  /// Dense evaluation; reproduces samples exactly at sample times.
  PhaseState at(double t) const;
  /// Time derivative of the interpolant.
  PhaseState rate_at(double t) const;
  /// Unwrapped polar angle at time t, continuous with the sampled angles.
  double theta_at(double t) const;

  const std::vector<Event>& events() const { return events_; }
  bool collided() const;
  const Potential& potential() const { return pot_; }
  const PhysicalParams& params() const { return params_; }
  const ode::DenseSolution<4>& solution() const { return solution_; }

 private:
  ode::DenseSolution<4> solution_;
  Potential pot_;
  PhysicalParams params_;
  std::vector<Event> events_;
  std::vector<double> r_, theta_, energy_, momentum_;
};

/// Thrown when the step budget runs out; carries the partial trajectory.
class TruncatedIntegration : public Error {
 public:
  explicit TruncatedIntegration(std::shared_ptr<const Trajectory> partial)
      : Error(ErrorCode::kTruncated, "maximum number of steps exceeded"),
        partial_(std::move(partial)) {}
  const Trajectory& partial() const { return *partial_; }

 private:
  std::shared_ptr<const Trajectory> partial_;
};

/// Adaptive Dormand-Prince integration of the Cartesian equations from
/// t_start to t_stop (backward spans allowed). Stops early with a collision
/// event when |q| drops below the collision radius.
Trajectory integrate(const PhaseState& state0, double t_start, double t_stop,
                     const Potential& pot, const PhysicalParams& params,
                     const IntegratorConfig& cfg = {});

struct Apsis {
  double time;
  double r;
  EventKind kind;  // kPerihelion or kAphelion
};

/// Interior turning points of r(t), refined on the dense output.
std::vector<Apsis> apsis_times(const Trajectory& traj, double event_tol = 1e-12);

struct ConservationReport {
  double energy_abs = 0.0;
  double energy_rel = 0.0;
  double momentum_abs = 0.0;
  double momentum_rel = 0.0;
};

ConservationReport conservation_report(const Trajectory& traj);

/// Columns t,q1,q2,p1,p2,r,theta,H,L with 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

/// Formats a double with 17 significant digits.
std::string format_double(double value);

}  // namespace relorbit

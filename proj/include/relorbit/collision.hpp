#pragma once

#include <string>
#include <vector>

#include "relorbit/core.hpp"
#include "relorbit/ode.hpp"

namespace relorbit {

/// Polar coordinates with w1 = <q, p>, w2 = q1 p2 - q2 p1 and the energy h.
struct CollisionVars {
  double r;
  double theta;
  double w1;
  double w2;
  double h;
};

/// Requires |q| > 0; h is the Coulomb energy of the state.
CollisionVars w_transform(const PhaseState& state, double k, const PhysicalParams& params);
/// p = (w1 q + w2 perp(q)) / |q|^2.
PhaseState w_inverse(const Vec2& q, double w1, double w2);
/// Cartesian state of collision variables (r > 0).
PhaseState to_phase_state(const CollisionVars& v);

/// (h + m c^2)^2 r^2 - [c^2 sqrt(m^2 r^2 + |w|^2/c^2) - k]^2.
double manifold_residual(const CollisionVars& v, double k, const PhysicalParams& params);

struct RegularizedRates {
  double dr;
  double dtheta;  // NaN at r = 0 when w2 != 0
  double dw1;
  bool angle_singular;
};

/// Time derivatives of the regularized flow; bounded in (r, w1) at r = 0.
RegularizedRates regularized_rhs(const CollisionVars& v, const PhysicalParams& params);

/// Dense solution of (r, theta, w1) against t; w2 and h are constant.
class RegularizedTrajectory {
 public:
  RegularizedTrajectory(ode::DenseSolution<3> solution, double w2, double h, bool collided)
      : solution_(std::move(solution)), w2_(w2), h_(h), collided_(collided) {}

  double t_begin() const { return solution_.t_front(); }
  double t_end() const { return solution_.t_back(); }
  std::size_t size() const { return solution_.size(); }
  double time(std::size_t i) const { return solution_.t[i]; }
  CollisionVars vars(std::size_t i) const;
  CollisionVars at(double t) const;
  bool collided() const { return collided_; }
  const ode::DenseSolution<3>& solution() const { return solution_; }

 private:
  ode::DenseSolution<3> solution_;
  double w2_;
  double h_;
  bool collided_;
};

struct RegularizedConfig {
  double rtol = 1e-12;
  double atol = 1e-14;
  double max_step = 0.05;
  /// Integration stops when r falls to this radius.
  double r_event = 1e-8;
};

/// Integrates the regularized flow from v0 toward t_end (either direction),
/// stopping at r = r_event.
RegularizedTrajectory integrate_regularized(const CollisionVars& v0, double t_end,
                                            const PhysicalParams& params,
                                            const RegularizedConfig& cfg = {});

struct RegularizedApsis {
  double time;
  double r;
  bool aphelion;
};

/// Sign changes of w1 on the dense output.
std::vector<RegularizedApsis> regularized_apses(const RegularizedTrajectory& traj);

enum class CollisionBranch { kIncoming, kOutgoing };

struct CollisionConfig {
  double rtol = 1e-12;
  double atol = 1e-14;
  /// Switch from t to u = ln r as independent variable below this radius,
  /// relative to the starting radius.
  double switch_fraction = 1e-2;
  double r_stop = 1e-10;
  /// Give up when no collision occurs within this time.
  double t_max = 1e4;
  std::size_t window_points = 21;
};

struct CollisionFit {
  CollisionBranch branch = CollisionBranch::kIncoming;
  double t_collision = 0.0;
  double w10 = 0.0;
  double w2 = 0.0;
  double theta0 = 0.0;
  double slope = 0.0;       // fitted lim r / |t - t_c|
  double slope_pred = 0.0;  // c^2 |w10| / k
  double lambda = 0.0;      // fitted log coefficient of theta
  double lambda_pred = 0.0;        // w2 / w10
  double lambda_pred_ell = 0.0;    // ell / w10
  double residual_r = 0.0;         // max |r/tau - fit|
  double residual_theta = 0.0;     // max |theta - fit|
  /// Log-log slope of |r - slope tau| against tau on the window.
  double r_remainder_exponent = 0.0;
  /// max |theta - theta0 - lambda ln tau| / |ln tau| on the window.
  double theta_remainder_ratio = 0.0;
  double w_norm_at_collision = 0.0;  // |w| extrapolated to r = 0
  double max_manifold_residual = 0.0;
  double max_radial_speed = 0.0;     // max |dr/dt| seen
  double window_start = 0.0;         // t_w
  std::vector<double> window;        // tau values
};

struct CollisionRun {
  RegularizedTrajectory approach;  // integrated in t down to the switch radius
  /// Samples of the final approach in u = ln r: (u, t, theta, w1).
  std::vector<std::array<double, 4>> tail;
  CollisionFit fit;
};

/// Follows the subcritical (or radial) motion through q into the collision
/// along the chosen branch and fits the asymptotic laws.
CollisionRun integrate_to_collision(const PhaseState& state0, double k,
                                    const PhysicalParams& params,
                                    CollisionBranch branch = CollisionBranch::kIncoming,
                                    const CollisionConfig& cfg = {});

const char* to_string(CollisionBranch branch);

std::string collision_fit_json(const CollisionFit& fit);

}  // namespace relorbit

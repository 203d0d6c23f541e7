#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relorbit/core.hpp"
#include "relorbit/dynamics.hpp"

namespace relorbit {

/// sigma^2 = 1 - k^2 / (ell^2 c^2) and the infimum of the energy at fixed ell.
struct SigmaInfo {
  double sigma2 = 0.0;
  bool sigma2_defined = false;  // false for ell = 0
  double sigma = 0.0;           // valid when sigma2 >= 0
  bool h_min_defined = false;   // |ell| >= k / c
  double h_min = 0.0;           // -m c^2 (1 - sigma)
};

SigmaInfo sigma_and_min_energy(double ell, double k, const PhysicalParams& params);

enum class EMClass {
  kEmpty,
  kCircular,
  kBoundedNonCollision,
  kUnboundedSupercritical,
  kSubcritical,
  kCriticalMomentum,
  kExcludedPoint,
};

const char* to_string(EMClass cls);
/// Stable integer code used in diagram output (declaration order).
int class_code(EMClass cls);
/// Whether the level set of the class is nonempty.
bool admits_motion(EMClass cls);

struct EMPoint {
  double ell;
  double h;
};

struct Classification {
  EMClass cls;
  SigmaInfo sigma;
  /// Remark attached to the critical-momentum line, empty elsewhere.
  std::string note;
};

/// Partition of the (ell, h) plane into motion types. Momentum comparisons
/// use tol * k^2 on ell^2 c^2 - k^2; energy comparisons use tol * m c^2.
Classification classify(const EMPoint& pt, double k, const PhysicalParams& params,
                        double tol = 1e-9);

/// Explicit state with L = ell and H = h for the Coulomb potential, built as
/// q = lambda e1, p = p_r e1 + mu e2. Empty when no such state exists.
std::optional<PhaseState> existence_witness(const EMPoint& pt, double k,
                                            const PhysicalParams& params);

/// Rows ell,h,class_code on an n_ell x n_h grid (inclusive bounds).
void write_em_diagram(std::ostream& out, double ell_lo, double ell_hi, std::size_t n_ell,
                      double h_lo, double h_hi, std::size_t n_h, double k,
                      const PhysicalParams& params, double tol = 1e-9);

/// R = -m k gamma q/|q| + q |p|^2 - p <q, p>.
Vec2 runge_lenz_vector(const PhaseState& state, double k, const PhysicalParams& params);

/// |q| + <R, q>/(m k gamma) - |q x p|^2/(m k gamma); zero for every state.
double conic_residual(const PhaseState& state, double k, const PhysicalParams& params);

/// Components of R in the frame alpha = q/|q|, beta = alpha rotated by +90 deg.
struct RLComponents {
  double r_alpha;
  double r_beta;
};

RLComponents rl_components(const PhaseState& state, double k, const PhysicalParams& params);

/// Mirror image (q2, p2) -> (-q2, -p2); flips the sign of L.
PhaseState reflect_orientation(const PhaseState& state);

struct RLSeries {
  double sigma2 = 0.0;
  double dtheta = 0.0;
  std::vector<double> theta;  // uniform grid
  std::vector<double> r_alpha;
  std::vector<double> r_beta;
  /// max |dR_alpha/dtheta - sigma^2 R_beta| and |dR_beta/dtheta + R_alpha|
  /// by central differences on the uniform grid.
  double ode_residual = 0.0;
  /// max |I - I0| of I = R_alpha^2 + sigma^2 R_beta^2 over trajectory samples.
  double invariant_drift = 0.0;
  double invariant0 = 0.0;
  /// max |R_alpha - (m/k)(ell^2 c^2 - k^2) gamma + (ell^2/k)(h + m c^2)|.
  double gamma_link_residual = 0.0;
};

/// Runge-Lenz frame analysis of a Coulomb trajectory with L > 0; throws
/// kOrientation otherwise (reflect the initial data first).
RLSeries rl_components_and_invariant(const Trajectory& traj, double k,
                                     const PhysicalParams& params, double dtheta);

/// Time at which the unwrapped polar angle of a positively oriented
/// trajectory equals theta.
double time_at_angle(const Trajectory& traj, double theta);

/// 1/r = [c^2 amp C(theta) + k (h + m c^2)] / (ell^2 c^2 - k^2) with
/// C = cos(sigma (theta - theta0)) for sigma^2 > 0 and
/// C = cosh(|sigma| (theta - theta0)) for sigma^2 < 0.
double orbit_closed_form(double theta, double amp, double theta0, double ell, double h, double k,
                         const PhysicalParams& params);

/// Least-squares closed form 1/r = [c^2 (a C + b S) + k (h + m c^2)] / (ell^2 c^2 - k^2),
/// with (C, S) = (cos, sin)(sigma theta) or (cosh, sinh)(|sigma| theta).
struct ClosedFormFit {
  double ell = 0.0;
  double h = 0.0;
  double sigma2 = 0.0;
  double a = 0.0;
  double b = 0.0;
  /// Amplitude/phase form; for sigma^2 < 0 valid only when |a| > |b|.
  double amp = 0.0;
  double theta0 = 0.0;
  bool phase_form = false;
  /// max |1/r_fit - 1/r| over the samples used.
  double max_residual = 0.0;

  double inverse_radius(double theta, double k, const PhysicalParams& params) const;
};

ClosedFormFit fit_closed_form(const Trajectory& traj, double k, const PhysicalParams& params);

struct Precession {
  std::vector<double> perihelion_angles;
  double delta_theta = 0.0;  // mean angle between consecutive perihelia
  double max_spread = 0.0;   // max deviation of single gaps from the mean
  double predicted = 0.0;    // 2 pi / sigma
  double per_period = 0.0;   // delta_theta - 2 pi
  double predicted_per_period = 0.0;
};

/// Perihelion-to-perihelion angle; throws kInsufficientData below two perihelia.
Precession apsidal_precession(const Trajectory& traj, double k, const PhysicalParams& params);

}  // namespace relorbit

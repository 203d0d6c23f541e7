#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "relorbit/core.hpp"
#include "relorbit/ode.hpp"

namespace relorbit {

/// Point (rho, eta = d rho / d theta) of the reduced system at fixed angular
/// momentum ell, with rho = 1/r and the polar angle as independent variable.
struct ClairautState {
  double rho;
  double eta;
  double ell;
};

/// gamma(rho, eta; ell) = sqrt(1 + ell^2 (rho^2 + eta^2) / (c^2 m^2)).
double clairaut_gamma(double rho, double eta, double ell, const PhysicalParams& params);

/// (d rho / d theta, d eta / d theta).
std::array<double, 2> clairaut_rhs(const ClairautState& s, const Potential& pot,
                                   const PhysicalParams& params);

/// Energy H expressed on the reduced phase plane: m c^2 (gamma - 1) + W(rho).
double clairaut_energy(const ClairautState& s, const Potential& pot, const PhysicalParams& params);

struct ClairautPoint {
  ClairautState state;
  double theta;
};

/// Cartesian -> reduced coordinates. Requires L(q, p) != 0.
ClairautPoint to_clairaut(const PhaseState& s);
PhaseState from_clairaut(const ClairautState& s, double theta);

/// rho + (m / ell^2) gamma(rho, 0; ell) W'(rho); zero exactly at equilibria.
double equilibrium_residual(double rho, double ell, const Potential& pot,
                            const PhysicalParams& params);

struct EquilibriumSet {
  /// Every rho in the search interval is an equilibrium.
  bool continuum = false;
  std::vector<double> roots;
};

/// All equilibria (rho0, 0) in [rho_lo, rho_hi]. Non-positive bounds select
/// the tabulated range, or [1e-6, 1e6] for analytic potentials.
EquilibriumSet equilibrium_solve(double ell, const Potential& pot, const PhysicalParams& params,
                                 double rho_lo = 0.0, double rho_hi = 0.0);

struct Linearization {
  double a_coeff;  // A(rho0, 0; ell)
  double b_coeff;  // B(rho0, 0; ell), zero at equilibria
  double theta0;   // 2 pi / sqrt(A); NaN for saddles
  bool saddle;
};

Linearization linearized_frequency(double rho0, double ell, const Potential& pot,
                                   const PhysicalParams& params);

struct PeriodOptions {
  double rtol = 1e-13;
  double atol = 1e-15;
};

/// Period of the orbit through (rho0 + xi, 0), from the angle-parametrized
/// radial equation around the centre.
double period_at(double rho0, double ell, double xi, const Potential& pot,
                 const PhysicalParams& params, const PeriodOptions& opt = {});

/// Same period measured as the first return to eta = 0 of the (rho, eta)
/// flow; an independent cross-check of period_at.
double return_map_period(double rho0, double ell, double xi, const Potential& pot,
                         const PhysicalParams& params, const PeriodOptions& opt = {});

struct PeriodSample {
  double xi;
  double period;
};

/// Measured period function with its expansion P(xi) = Theta0 + c1 xi + c2 xi^2 + ...
struct PeriodFit {
  double rho0 = 0.0;
  double ell = 0.0;
  std::vector<PeriodSample> samples;
  double theta0 = 0.0;
  double c2 = 0.0;
  /// Odd coefficient of a fit that leaves it free; vanishes for a centre.
  double c1 = 0.0;
  /// Disagreement between extrapolations with and without the largest xi.
  double residual = 0.0;
};

/// Default sample radii {xi0, xi0/2, xi0/4, xi0/8}, xi0 = 0.05 rho0.
std::vector<double> default_xis(double rho0);

PeriodFit period_function(double rho0, double ell, const Potential& pot,
                          const PhysicalParams& params, std::span<const double> xis,
                          const PeriodOptions& opt = {});

/// c2 by polynomial extrapolation of (P - theta0) / xi^2 to xi = 0; c1 from
/// exact interpolation of P - theta0 in powers xi, ..., xi^n.
PeriodFit fit_period_samples(double rho0, double ell, double theta0,
                             std::vector<PeriodSample> samples);

void write_period_csv(std::ostream& out, const PeriodFit& fit);
/// JSON sidecar {rho0, ell, Theta0, c2, residual}.
std::string period_fit_json(const PeriodFit& fit);

/// Dense solution of (rho, eta, t) against theta.
class ClairautOrbit {
 public:
  ClairautOrbit(ode::DenseSolution<3> solution, double ell)
      : solution_(std::move(solution)), ell_(ell) {}

  double theta_begin() const { return solution_.t_front(); }
  double theta_end() const { return solution_.t_back(); }
  double ell() const { return ell_; }
  ClairautState state_at(double theta) const;
  double time_at(double theta) const { return solution_.eval(theta)[2]; }
  const ode::DenseSolution<3>& solution() const { return solution_; }

 private:
  ode::DenseSolution<3> solution_;
  double ell_;
};

/// Integrates the reduced system together with t(theta), dt/dtheta = m gamma / (ell rho^2).
ClairautOrbit integrate_clairaut(const ClairautState& s0, double theta_begin, double theta_end,
                                 double t_begin, const Potential& pot,
                                 const PhysicalParams& params, double rtol = 1e-12,
                                 double atol = 1e-14);

struct Fraction {
  long long num;
  long long den;
};

/// First continued-fraction convergent p/q of x with q <= max_den and
/// |x - p/q| <= tol, if any.
std::optional<Fraction> rational_approximation(double x, long long max_den, double tol);

struct TimeReconstruction {
  /// Minimal rho-period in theta.
  double theta_period = 0.0;
  /// Mean of dt/dtheta over one period.
  double drift = 0.0;
  std::vector<double> theta;  // samples on [0, Theta)
  std::vector<double> psi;    // periodic part t(theta) - t0 - drift * theta
  /// max |t(theta + Theta) - t(theta) - drift * Theta| over the samples.
  double shift_error = 0.0;
  bool closed = false;
  /// Theta / pi = num / den when closed.
  Fraction theta_over_pi{0, 1};
  /// Period of the planar orbit when closed.
  double orbit_period = 0.0;
};

/// Reconstructs t(theta) along the Theta-periodic solution through s0.
/// Closure is declared when Theta/pi is within 1e-9 of p/q with q <= 64.
TimeReconstruction time_reconstruction(const ClairautState& s0, double theta_period,
                                       const Potential& pot, const PhysicalParams& params,
                                       std::size_t n_samples = 256);

}  // namespace relorbit

#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "relorbit/core.hpp"

namespace relorbit {

/// Rates of the candidate-family constraints along rho0.
struct FamilyRates {
  double dwprime;  // dW'/drho0
  double dell;     // dL/drho0
};

/// Isochrony constraints: W'' = -(a/rho0) W' - W'^3 / (c^2 L^2 rho0) and the
/// implicit derivative of the equilibrium identity.
FamilyRates family_rhs(double rho0, double wprime, double ell, double a,
                       const PhysicalParams& params);

/// W'(rho0) making (rho0, 0) an equilibrium at angular momentum ell.
double equilibrium_wprime(double rho0, double ell, const PhysicalParams& params);

/// W''' and W'''' of a candidate family in closed form.
double w3_formula(double rho0, double wprime, double ell, double a, const PhysicalParams& params);
double w4_formula(double rho0, double wprime, double ell, double a, const PhysicalParams& params);

/// Obstruction polynomial Q(x) for parameter a.
double q_poly(double x, double a);
/// 2 (1 + a) (1 + 6a - 9a^2 + 6a^3) / a^5, equal to Q((1 - a)/a).
double q_at_fixed_point_identity(double a);

/// x = rho0^2 L^2 / (c^2 m^2).
double family_x(double rho0, double ell, const PhysicalParams& params);

/// Closed-form xi^2 coefficient of the period function at (rho0, L).
double period_constant_formula(double rho0, double ell, double a, const PhysicalParams& params);

/// First and second order terms of R(phi, xi) = R1 xi + R2 xi^2 + O(xi^3).
double r1(double phi, double a);
double r2(double phi, double rho0, double ell, double a, const PhysicalParams& params);

/// Lorentz factor of the circular motion at rho0, from W'(rho0) alone.
double gamma_tilde(double rho0, double wprime, const PhysicalParams& params);

/// Tabulated candidate family through (rho_star, ell_star).
struct BertrandFamily {
  double a = 0.0;
  double rho_star = 0.0;
  double ell_star = 0.0;
  PhysicalParams params;
  std::vector<double> rho;
  std::vector<double> wprime;
  std::vector<double> ell;
  std::vector<double> w;  // W(rho_star) = 0
  std::vector<double> w2;
  std::vector<double> w3;
  /// Set when the requested range could not be covered.
  bool truncated = false;
  std::string warning;
  std::shared_ptr<const TabulatedProfile> profile;

  Potential potential() const { return Potential::tabulated(profile, params); }
  std::size_t size() const { return rho.size(); }
  /// Node index of rho0; throws kDomain when rho0 is not a node.
  std::size_t node(double rho0) const;
  /// max |equilibrium residual| / rho over the nodes.
  double max_equilibrium_residual() const;
};

/// Integrates the family constraints from rho_star across [rho_lo, rho_hi]
/// on a uniform grid of about n_nodes nodes containing rho_star.
BertrandFamily build_family(double a, double rho_star, double ell_star, double rho_lo,
                            double rho_hi, const PhysicalParams& params,
                            std::size_t n_nodes = 1501);

struct ObstructionReport {
  double a = 0.0;
  bool k_defined = false;
  double k_value = 0.0;  // K(a) = (1 - a)/a
  double q_direct = 0.0;
  double q_identity = 0.0;
  /// Cubic p(a) = 1 + 6a - 9a^2 + 6a^3 on [0, 1].
  double cubic_at_0 = 0.0;
  double cubic_at_1 = 0.0;
  double derivative_discriminant = 0.0;
  bool cubic_root_free = false;
  /// K(a) is not a positive root of Q.
  bool no_isochronous_family = false;
  /// min of gamma_tilde over a family, when one is supplied.
  double gamma_tilde_min = 0.0;
};

ObstructionReport obstruction_certificate(double a);
ObstructionReport obstruction_certificate(const BertrandFamily& family);

/// Sampled monotonicity of x(rho0) along the family.
bool family_x_monotone(const BertrandFamily& family);

/// Columns rho0,Wprime,L,W.
void write_family_csv(std::ostream& out, const BertrandFamily& family);
/// {a, rho_star, ell_star}.
std::string family_metadata_json(const BertrandFamily& family);

}  // namespace relorbit

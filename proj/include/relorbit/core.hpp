#pragma once

#include <memory>
#include <string>
#include <vector>

#include "relorbit/errors.hpp"
#include "relorbit/vec2.hpp"

namespace relorbit {

/// Rest mass and light speed. Defaults to natural units m = c = 1.
struct PhysicalParams {
  double m = 1.0;
  double c = 1.0;

  /// Throws Error(kInvalidParameter) unless m > 0 and c > 0.
  void validate() const;
};

enum class PotentialKind { kCoulomb, kConstantMomentum, kTabulated };

const char* to_string(PotentialKind kind);
PotentialKind parse_potential_kind(const std::string& name);

/// Clairaut-form profile W'(rho) sampled on a uniform, strictly increasing
/// rho-grid. W, W', W'' and W''' are known at every node; between nodes each
/// quantity is a cubic Hermite interpolant built on the next derivative, so
/// node values and slopes are reproduced exactly.
class TabulatedProfile {
 public:
  TabulatedProfile(std::vector<double> rho, std::vector<double> w, std::vector<double> dw,
                   std::vector<double> d2w, std::vector<double> d3w);

  double rho_min() const { return rho_.front(); }
  double rho_max() const { return rho_.back(); }
  bool contains(double rho) const { return rho >= rho_.front() && rho <= rho_.back(); }

  double w(double rho) const;
  double dw(double rho) const;
  double d2w(double rho) const;
  double d3w(double rho) const;

  const std::vector<double>& rho() const { return rho_; }

 private:
  struct Cell {
    std::size_t index;
    double t;  // local coordinate in [0, 1]
  };
  Cell locate(double rho) const;
  static double hermite(const std::vector<double>& f, const std::vector<double>& df, const Cell& c,
                        double h);
  static double hermite_slope(const std::vector<double>& f, const std::vector<double>& df,
                              const Cell& c, double h);

  std::vector<double> rho_, w_, dw_, d2w_, d3w_;
  double spacing_;
};

/// Attractive central potential V(r) together with its Clairaut form
/// W(rho) = V(1/rho). Immutable; copies share tabulated data.
class Potential {
 public:
  /// Coulomb V = -k/r or the constant-momentum potential
  /// V = -c sqrt(k/r^2 + c^2 m^2).
  static Potential analytic(PotentialKind kind, double k, const PhysicalParams& params);
  static Potential tabulated(std::shared_ptr<const TabulatedProfile> profile,
                             const PhysicalParams& params);

  PotentialKind kind() const { return kind_; }
  /// Coupling constant; zero for tabulated potentials.
  double k() const { return k_; }
  bool attractive() const { return true; }

  double v(double r) const;
  double dv(double r) const;
  double d2v(double r) const;
  double d3v(double r) const;

  double w(double rho) const;
  double dw(double rho) const;
  double d2w(double rho) const;
  double d3w(double rho) const;

  /// Radial domain (r_min, r_max) where the potential is defined.
  double r_min() const;
  double r_max() const;

  const TabulatedProfile* profile() const { return profile_.get(); }

 private:
  Potential(PotentialKind kind, double k, PhysicalParams params,
            std::shared_ptr<const TabulatedProfile> profile)
      : kind_(kind), k_(k), params_(params), profile_(std::move(profile)) {}

  void require_r(double r) const;
  void require_rho(double rho) const;

  PotentialKind kind_;
  double k_;
  PhysicalParams params_;
  std::shared_ptr<const TabulatedProfile> profile_;
};

Potential make_potential(PotentialKind kind, double k, const PhysicalParams& params);

struct PhaseState {
  Vec2 q;
  Vec2 p;
};

double lorentz_gamma(const Vec2& p, const PhysicalParams& params);

/// Relativistic energy with the rest energy subtracted.
double hamiltonian(const PhaseState& state, const Potential& pot, const PhysicalParams& params);

double angular_momentum(const PhaseState& state);

/// p = m v / sqrt(1 - |v|^2/c^2). Throws kSuperluminal for |v| >= c.
Vec2 momentum_from_velocity(const Vec2& v, const PhysicalParams& params);
/// v = p / (m gamma(p)); always |v| < c.
Vec2 velocity_from_momentum(const Vec2& p, const PhysicalParams& params);

}  // namespace relorbit

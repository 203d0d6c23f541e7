#include "relorbit/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace relorbit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kSingularity: return "singularity";
    case ErrorCode::kSuperluminal: return "superluminal";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kNoCircularOrbit: return "no-circular-orbit";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kConsistency: return "consistency";
    case ErrorCode::kBasinExceeded: return "basin-exceeded";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kWrongRegime: return "wrong-regime";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kOrientation: return "orientation";
    case ErrorCode::kOutOfBranch: return "out-of-branch";
  }
  return "unknown";
}

void PhysicalParams::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw Error(ErrorCode::kInvalidParameter, "mass must be positive");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::kInvalidParameter, "light speed must be positive");
  }
}

const char* to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::kCoulomb: return "coulomb";
    case PotentialKind::kConstantMomentum: return "constant-momentum";
    case PotentialKind::kTabulated: return "tabulated";
  }
  return "unknown";
}

PotentialKind parse_potential_kind(const std::string& name) {
  if (name == "coulomb") return PotentialKind::kCoulomb;
  if (name == "constant-momentum") return PotentialKind::kConstantMomentum;
  if (name == "tabulated") return PotentialKind::kTabulated;
  throw Error(ErrorCode::kInvalidParameter, "unknown potential kind: " + name);
}

// ---------------------------------------------------------------------------
// TabulatedProfile

TabulatedProfile::TabulatedProfile(std::vector<double> rho, std::vector<double> w,
                                   std::vector<double> dw, std::vector<double> d2w,
                                   std::vector<double> d3w)
    : rho_(std::move(rho)),
      w_(std::move(w)),
      dw_(std::move(dw)),
      d2w_(std::move(d2w)),
      d3w_(std::move(d3w)) {
  const std::size_t n = rho_.size();
  if (n < 2 || w_.size() != n || dw_.size() != n || d2w_.size() != n || d3w_.size() != n) {
    throw Error(ErrorCode::kInvalidParameter, "tabulated profile needs >= 2 consistent nodes");
  }
  spacing_ = (rho_.back() - rho_.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    if (!(rho_[i] > rho_[i - 1])) {
      throw Error(ErrorCode::kInvalidParameter, "rho-grid must be strictly increasing");
    }
    if (std::abs(rho_[i] - rho_[i - 1] - spacing_) > 1e-9 * spacing_) {
      throw Error(ErrorCode::kInvalidParameter, "rho-grid must be uniform");
    }
  }
  if (!(rho_.front() > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "rho-grid must be positive");
  }
}

TabulatedProfile::Cell TabulatedProfile::locate(double rho) const {
  if (!contains(rho)) {
    std::ostringstream msg;
    msg << "rho=" << rho << " outside tabulated range [" << rho_min() << ", " << rho_max() << "]";
    throw Error(ErrorCode::kDomain, msg.str());
  }
  const double s = (rho - rho_.front()) / spacing_;
  auto i = static_cast<std::size_t>(s);
  if (i >= rho_.size() - 1) i = rho_.size() - 2;
  // Uniform spacing up to rounding: correct the guess against actual nodes.
  while (i > 0 && rho < rho_[i]) --i;
  while (i + 2 < rho_.size() && rho > rho_[i + 1]) ++i;
  const double h = rho_[i + 1] - rho_[i];
  return {i, (rho - rho_[i]) / h};
}

double TabulatedProfile::hermite(const std::vector<double>& f, const std::vector<double>& df,
                                 const Cell& c, double h) {
  const double t = c.t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const std::size_t i = c.index;
  return h00 * f[i] + h10 * h * df[i] + h01 * f[i + 1] + h11 * h * df[i + 1];
}

double TabulatedProfile::hermite_slope(const std::vector<double>& f, const std::vector<double>& df,
                                       const Cell& c, double h) {
  const double t = c.t;
  const double t2 = t * t;
  const double d00 = 6 * t2 - 6 * t;
  const double d10 = 3 * t2 - 4 * t + 1;
  const double d01 = -6 * t2 + 6 * t;
  const double d11 = 3 * t2 - 2 * t;
  const std::size_t i = c.index;
  return (d00 * f[i] + d01 * f[i + 1]) / h + d10 * df[i] + d11 * df[i + 1];
}

double TabulatedProfile::w(double rho) const {
  const Cell c = locate(rho);
  return hermite(w_, dw_, c, rho_[c.index + 1] - rho_[c.index]);
}

double TabulatedProfile::dw(double rho) const {
  const Cell c = locate(rho);
  return hermite(dw_, d2w_, c, rho_[c.index + 1] - rho_[c.index]);
}

double TabulatedProfile::d2w(double rho) const {
  const Cell c = locate(rho);
  return hermite(d2w_, d3w_, c, rho_[c.index + 1] - rho_[c.index]);
}

double TabulatedProfile::d3w(double rho) const {
  const Cell c = locate(rho);
  return hermite_slope(d2w_, d3w_, c, rho_[c.index + 1] - rho_[c.index]);
}

// ---------------------------------------------------------------------------
// Potential

Potential Potential::analytic(PotentialKind kind, double k, const PhysicalParams& params) {
  params.validate();
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw Error(ErrorCode::kInvalidParameter, "coupling k must be positive");
  }
  if (kind == PotentialKind::kTabulated) {
    throw Error(ErrorCode::kInvalidParameter,
                "tabulated potentials are built from a candidate family, not from k");
  }
  return Potential(kind, k, params, nullptr);
}

Potential Potential::tabulated(std::shared_ptr<const TabulatedProfile> profile,
                               const PhysicalParams& params) {
  params.validate();
  if (!profile) throw Error(ErrorCode::kInvalidParameter, "null tabulated profile");
  return Potential(PotentialKind::kTabulated, 0.0, params, std::move(profile));
}

Potential make_potential(PotentialKind kind, double k, const PhysicalParams& params) {
  return Potential::analytic(kind, k, params);
}

double Potential::r_min() const {
  return kind_ == PotentialKind::kTabulated ? 1.0 / profile_->rho_max() : 0.0;
}

double Potential::r_max() const {
  return kind_ == PotentialKind::kTabulated ? 1.0 / profile_->rho_min()
                                            : std::numeric_limits<double>::infinity();
}

void Potential::require_r(double r) const {
  if (!(r > 0.0)) throw Error(ErrorCode::kSingularity, "potential evaluated at r <= 0");
}

void Potential::require_rho(double rho) const {
  if (!(rho > 0.0)) throw Error(ErrorCode::kDomain, "Clairaut form evaluated at rho <= 0");
}

// For the constant-momentum kind, s = k + c^2 m^2 r^2 and u = k rho^2 + c^2 m^2.

double Potential::v(double r) const {
  require_r(r);
  switch (kind_) {
    case PotentialKind::kCoulomb: return -k_ / r;
    case PotentialKind::kConstantMomentum: {
      const double cm = params_.c * params_.m;
      return -params_.c * std::sqrt(k_ / (r * r) + cm * cm);
    }
    case PotentialKind::kTabulated: return profile_->w(1.0 / r);
  }
  return 0.0;
}

double Potential::dv(double r) const {
  require_r(r);
  switch (kind_) {
    case PotentialKind::kCoulomb: return k_ / (r * r);
    case PotentialKind::kConstantMomentum: {
      const double cm = params_.c * params_.m;
      const double s = k_ + cm * cm * r * r;
      return params_.c * k_ / (r * r * std::sqrt(s));
    }
    case PotentialKind::kTabulated: {
      const double rho = 1.0 / r;
      return -profile_->dw(rho) * rho * rho;
    }
  }
  return 0.0;
}

double Potential::d2v(double r) const {
  require_r(r);
  switch (kind_) {
    case PotentialKind::kCoulomb: return -2.0 * k_ / (r * r * r);
    case PotentialKind::kConstantMomentum: {
      const double cm2 = params_.c * params_.c * params_.m * params_.m;
      const double s = k_ + cm2 * r * r;
      const double ss = std::sqrt(s);
      return params_.c * k_ * (-2.0 / (r * r * r * ss) - cm2 / (r * s * ss));
    }
    case PotentialKind::kTabulated: {
      const double rho = 1.0 / r;
      const double rho3 = rho * rho * rho;
      return profile_->d2w(rho) * rho3 * rho + 2.0 * profile_->dw(rho) * rho3;
    }
  }
  return 0.0;
}

double Potential::d3v(double r) const {
  require_r(r);
  switch (kind_) {
    case PotentialKind::kCoulomb: return 6.0 * k_ / (r * r * r * r);
    case PotentialKind::kConstantMomentum: {
      const double cm2 = params_.c * params_.c * params_.m * params_.m;
      const double s = k_ + cm2 * r * r;
      const double ss = std::sqrt(s);
      const double r2 = r * r;
      return params_.c * k_ *
             (6.0 / (r2 * r2 * ss) + 3.0 * cm2 / (r2 * s * ss) + 3.0 * cm2 * cm2 / (s * s * ss));
    }
    case PotentialKind::kTabulated: {
      const double rho = 1.0 / r;
      const double rho2 = rho * rho;
      const double rho4 = rho2 * rho2;
      return -profile_->d3w(rho) * rho4 * rho2 - 6.0 * profile_->d2w(rho) * rho4 * rho -
             6.0 * profile_->dw(rho) * rho4;
    }
  }
  return 0.0;
}

double Potential::w(double rho) const {
  require_rho(rho);
  switch (kind_) {
    case PotentialKind::kCoulomb: return -k_ * rho;
    case PotentialKind::kConstantMomentum: {
      const double cm = params_.c * params_.m;
      return -params_.c * std::sqrt(k_ * rho * rho + cm * cm);
    }
    case PotentialKind::kTabulated: return profile_->w(rho);
  }
  return 0.0;
}

double Potential::dw(double rho) const {
  require_rho(rho);
  switch (kind_) {
    case PotentialKind::kCoulomb: return -k_;
    case PotentialKind::kConstantMomentum: {
      const double cm = params_.c * params_.m;
      const double u = k_ * rho * rho + cm * cm;
      return -params_.c * k_ * rho / std::sqrt(u);
    }
    case PotentialKind::kTabulated: return profile_->dw(rho);
  }
  return 0.0;
}

double Potential::d2w(double rho) const {
  require_rho(rho);
  switch (kind_) {
    case PotentialKind::kCoulomb: return 0.0;
    case PotentialKind::kConstantMomentum: {
      const double cm2 = params_.c * params_.c * params_.m * params_.m;
      const double u = k_ * rho * rho + cm2;
      return -params_.c * k_ * cm2 / (u * std::sqrt(u));
    }
    case PotentialKind::kTabulated: return profile_->d2w(rho);
  }
  return 0.0;
}

double Potential::d3w(double rho) const {
  require_rho(rho);
  switch (kind_) {
    case PotentialKind::kCoulomb: return 0.0;
    case PotentialKind::kConstantMomentum: {
      const double cm2 = params_.c * params_.c * params_.m * params_.m;
      const double u = k_ * rho * rho + cm2;
      return 3.0 * params_.c * k_ * k_ * cm2 * rho / (u * u * std::sqrt(u));
    }
    case PotentialKind::kTabulated: return profile_->d3w(rho);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Kinematics

double lorentz_gamma(const Vec2& p, const PhysicalParams& params) {
  const double cm = params.c * params.m;
  return std::sqrt(cm * cm + norm2(p)) / cm;
}

double hamiltonian(const PhaseState& state, const Potential& pot, const PhysicalParams& params) {
  const double r = norm(state.q);
  if (!(r > 0.0)) throw Error(ErrorCode::kSingularity, "hamiltonian evaluated at the origin");
  const double c2 = params.c * params.c;
  const double kinetic = c2 * std::sqrt(params.m * params.m + norm2(state.p) / c2);
  return kinetic + pot.v(r) - params.m * c2;
}

double angular_momentum(const PhaseState& state) { return cross(state.q, state.p); }

Vec2 momentum_from_velocity(const Vec2& v, const PhysicalParams& params) {
  const double beta2 = norm2(v) / (params.c * params.c);
  if (!(beta2 < 1.0)) throw Error(ErrorCode::kSuperluminal, "|v| >= c");
  return (params.m / std::sqrt(1.0 - beta2)) * v;
}

Vec2 velocity_from_momentum(const Vec2& p, const PhysicalParams& params) {
  return (1.0 / (params.m * lorentz_gamma(p, params))) * p;
}

}  // namespace relorbit

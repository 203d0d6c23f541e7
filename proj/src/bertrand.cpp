#include "relorbit/bertrand.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "relorbit/clairaut.hpp"
#include "relorbit/dynamics.hpp"
#include "relorbit/ode.hpp"

namespace relorbit {

namespace {

void require_family_point(double rho0, double ell) {
  if (!(rho0 > 0.0) || !(ell > 0.0)) {
    throw Error(ErrorCode::kDomain, "family needs rho0 > 0 and L > 0");
  }
}

double cubic(double a) { return 1.0 + 6.0 * a - 9.0 * a * a + 6.0 * a * a * a; }

}  // namespace

FamilyRates family_rhs(double rho0, double wprime, double ell, double a,
                       const PhysicalParams& params) {
  require_family_point(rho0, ell);
  const double c2 = params.c * params.c;
  const double cm2 = c2 * params.m * params.m;
  const double l2 = ell * ell;
  const double r2 = rho0 * rho0;
  FamilyRates out;
  out.dwprime = -a / rho0 * wprime - wprime * wprime * wprime / (c2 * l2 * rho0);
  out.dell = -(1.0 + a) * ell * (cm2 + r2 * l2) / (2.0 * cm2 * rho0 + rho0 * r2 * l2);
  return out;
}

double equilibrium_wprime(double rho0, double ell, const PhysicalParams& params) {
  return -rho0 * ell * ell / (params.m * clairaut_gamma(rho0, 0.0, ell, params));
}

double w3_formula(double rho0, double wprime, double ell, double a, const PhysicalParams& params) {
  require_family_point(rho0, ell);
  const double c2 = params.c * params.c;
  const double cm2 = c2 * params.m * params.m;
  const double l2 = ell * ell;
  const double x = rho0 * rho0 * l2;  // rho0^2 L^2
  const double s = 2.0 * cm2 + x;
  const double mu0 = a * (1.0 + a) * c2 * c2 * l2 * l2 * s;
  const double mu1 = c2 * l2 * (6.0 * a * cm2 + (2.0 * a - 1.0) * x);
  const double mu2 = 6.0 * cm2 + 3.0 * x;
  const double w2 = wprime * wprime;
  return wprime * (mu0 + mu1 * w2 + mu2 * w2 * w2) / (c2 * c2 * rho0 * rho0 * l2 * l2 * s);
}

double w4_formula(double rho0, double wprime, double ell, double a, const PhysicalParams& params) {
  require_family_point(rho0, ell);
  const double c2 = params.c * params.c;
  const double cm2 = c2 * params.m * params.m;
  const double l2 = ell * ell;
  const double x = rho0 * rho0 * l2;
  const double s = 2.0 * cm2 + x;
  const double s3 = s * s * s;
  const double c4 = c2 * c2;
  const double c6 = c4 * c2;
  const double l4 = l2 * l2;
  const double l6 = l4 * l2;
  const double eta0 = a * (1.0 + a) * (2.0 + a) * c6 * l6 * s3;
  const double eta1 =
      c4 * l4 *
      (8.0 * a * (4.0 + 7.0 * a) * cm2 * cm2 * cm2 + 12.0 * a * (2.0 + 5.0 * a) * cm2 * cm2 * x +
       2.0 * (10.0 * a * a - 1.0) * cm2 * x * x + 3.0 * a * a * x * x * x);
  const double eta2 = 9.0 * c2 * l2 * (4.0 * a * cm2 + (a - 1.0) * x) * s * s;
  const double eta3 = 15.0 * s3;
  const double w2 = wprime * wprime;
  return -wprime * (eta0 + eta1 * w2 + eta2 * w2 * w2 + eta3 * w2 * w2 * w2) /
         (c6 * rho0 * rho0 * rho0 * l6 * s3);
}

double q_poly(double x, double a) {
  const double coeff[6] = {
      8.0 * (3.0 - a) * a,
      28.0 * (3.0 - a) * a,
      2.0 * (3.0 - a) * (8.0 + 19.0 * a),
      63.0 + 46.0 * a - 25.0 * a * a,
      22.0 + 10.0 * a - 8.0 * a * a,
      2.0 + 2.0 * a - a * a,
  };
  double acc = 0.0;
  for (int i = 5; i >= 0; --i) acc = acc * x + coeff[i];
  return acc;
}

double q_at_fixed_point_identity(double a) {
  return 2.0 * (1.0 + a) * cubic(a) / std::pow(a, 5);
}

double family_x(double rho0, double ell, const PhysicalParams& params) {
  const double cm = params.c * params.m;
  return rho0 * rho0 * ell * ell / (cm * cm);
}

double period_constant_formula(double rho0, double ell, double a, const PhysicalParams& params) {
  const double cm2 = params.c * params.c * params.m * params.m;
  const double x = family_x(rho0, ell, params);
  const double y = rho0 * rho0 * ell * ell;
  const double s = 2.0 * cm2 + y;
  const double u = cm2 + y;
  return -std::numbers::pi * std::pow(cm2, 5) * q_poly(x, a) /
         (12.0 * std::sqrt(1.0 + a) * rho0 * rho0 * s * s * s * u * u);
}

double r1(double phi, double a) {
  const double cphi = std::cos(phi);
  return std::sqrt(1.0 + a) / std::sqrt(1.0 + a * cphi * cphi);
}

double r2(double phi, double rho0, double ell, double a, const PhysicalParams& params) {
  const double cm2 = params.c * params.c * params.m * params.m;
  const double y = rho0 * rho0 * ell * ell;
  const double lambda1 = -(2.0 * a * cm2 * cm2 + 3.0 * (2.0 + a) * cm2 * y + (2.0 + a) * y * y);
  const double lambda2 = 3.0 * y * (2.0 * cm2 + y);
  const double lambda3 = 2.0 * a * (1.0 + a) * cm2 * cm2 + 3.0 * a * (3.0 + a) * cm2 * y +
                         (a * a + 3.0 * a - 1.0) * y * y;
  const double cphi = std::cos(phi);
  const double one = r1(phi, a);
  const double inner =
      lambda1 + one / (1.0 + a * cphi * cphi) * (lambda2 * cphi + lambda3 * cphi * cphi * cphi);
  return one * inner / (6.0 * rho0 * (2.0 * cm2 * cm2 + 3.0 * cm2 * y + y * y));
}

double gamma_tilde(double rho0, double wprime, const PhysicalParams& params) {
  const double b = rho0 * wprime / (params.m * params.c * params.c);
  return 0.5 * (-b + std::sqrt(b * b + 4.0));
}

// ---------------------------------------------------------------------------
// Family construction

std::size_t BertrandFamily::node(double rho0) const {
  const auto it = std::lower_bound(rho.begin(), rho.end(), rho0);
  for (auto cand : {it, it == rho.begin() ? it : it - 1}) {
    if (cand != rho.end() && std::abs(*cand - rho0) <= 1e-12 * rho0) {
      return static_cast<std::size_t>(cand - rho.begin());
    }
  }
  throw Error(ErrorCode::kDomain, "rho0 is not a family node");
}

double BertrandFamily::max_equilibrium_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double g = rho[i] + params.m / (ell[i] * ell[i]) *
                                  clairaut_gamma(rho[i], 0.0, ell[i], params) * wprime[i];
    worst = std::max(worst, std::abs(g) / rho[i]);
  }
  return worst;
}

BertrandFamily build_family(double a, double rho_star, double ell_star, double rho_lo,
                            double rho_hi, const PhysicalParams& params, std::size_t n_nodes) {
  params.validate();
  if (!(a > -1.0)) throw Error(ErrorCode::kInvalidParameter, "family needs a > -1");
  if (!(ell_star > 0.0)) throw Error(ErrorCode::kInvalidParameter, "family needs ell_star > 0");
  if (!(rho_lo > 0.0) || !(rho_lo <= rho_star) || !(rho_star <= rho_hi) || !(rho_lo < rho_hi)) {
    throw Error(ErrorCode::kInvalidParameter, "need 0 < rho_lo <= rho_star <= rho_hi");
  }
  if (n_nodes < 3) throw Error(ErrorCode::kInvalidParameter, "family needs >= 3 nodes");

  const double h = (rho_hi - rho_lo) / static_cast<double>(n_nodes - 1);
  // Nodes rho_star + j h, j in [j_lo, j_hi].
  const auto j_lo = static_cast<long>(std::ceil((rho_lo - rho_star) / h - 1e-9));
  const auto j_hi = static_cast<long>(std::floor((rho_hi - rho_star) / h + 1e-9));

  BertrandFamily fam;
  fam.a = a;
  fam.rho_star = rho_star;
  fam.ell_star = ell_star;
  fam.params = params;

  struct Node {
    double rho, wprime, ell, w;
  };
  using Y = ode::State<3>;  // (W', L, W)
  auto rhs = [&](double rho, const Y& y) {
    const FamilyRates d = family_rhs(rho, y[0], y[1], a, params);
    return Y{d.dwprime, d.dell, y[0]};
  };
  ode::Options opt;
  opt.rtol = 1e-13;
  opt.atol = 1e-15;

  const Node start{rho_star, equilibrium_wprime(rho_star, ell_star, params), ell_star, 0.0};
  auto sweep = [&](int dir, long count) {
    std::vector<Node> nodes;
    Y y{start.wprime, start.ell, start.w};
    double rho = start.rho;
    for (long j = 1; j <= count; ++j) {
      const double next = rho_star + static_cast<double>(dir * j) * h;
      const ode::Result<3> res = ode::dopri5<3>(rhs, rho, y, next, opt);
      if (res.status != ode::Status::kCompleted || !(res.solution.y.back()[1] > 1e-12)) {
        fam.truncated = true;
        std::ostringstream msg;
        msg << "family truncated near rho0=" << rho << ": L reaches zero or integration failed";
        fam.warning = msg.str();
        break;
      }
      y = res.solution.y.back();
      rho = next;
      nodes.push_back({rho, y[0], y[1], y[2]});
    }
    return nodes;
  };
  std::vector<Node> down = sweep(-1, -j_lo);
  std::vector<Node> up = sweep(+1, j_hi);

  std::vector<Node> all(down.rbegin(), down.rend());
  all.push_back(start);
  all.insert(all.end(), up.begin(), up.end());
  for (const Node& n : all) {
    fam.rho.push_back(n.rho);
    fam.wprime.push_back(n.wprime);
    fam.ell.push_back(n.ell);
    fam.w.push_back(n.w);
    fam.w2.push_back(family_rhs(n.rho, n.wprime, n.ell, a, params).dwprime);
    fam.w3.push_back(w3_formula(n.rho, n.wprime, n.ell, a, params));
  }
  if (fam.rho.size() < 2) {
    throw Error(ErrorCode::kDomain, "family could not be continued away from rho_star");
  }
  fam.profile =
      std::make_shared<const TabulatedProfile>(fam.rho, fam.w, fam.wprime, fam.w2, fam.w3);
  return fam;
}

// ---------------------------------------------------------------------------
// Obstruction

ObstructionReport obstruction_certificate(double a) {
  if (!(a > -1.0)) throw Error(ErrorCode::kInvalidParameter, "obstruction needs a > -1");
  ObstructionReport rep;
  rep.a = a;
  rep.cubic_at_0 = cubic(0.0);
  rep.cubic_at_1 = cubic(1.0);
  // p'(a) = 18a^2 - 18a + 6 has discriminant 18^2 - 4 * 18 * 6 < 0: p is
  // increasing, so positive endpoints exclude roots on [0, 1].
  rep.derivative_discriminant = 18.0 * 18.0 - 4.0 * 18.0 * 6.0;
  rep.cubic_root_free = rep.cubic_at_0 > 0.0 && rep.cubic_at_1 > 0.0 &&
                        rep.derivative_discriminant < 0.0;
  rep.k_defined = a != 0.0;
  if (rep.k_defined) {
    rep.k_value = (1.0 - a) / a;
    rep.q_direct = q_poly(rep.k_value, a);
    rep.q_identity = q_at_fixed_point_identity(a);
    const bool positive_root = rep.k_value > 0.0 && rep.q_direct == 0.0;
    rep.no_isochronous_family = rep.cubic_root_free && !positive_root;
  } else {
    rep.no_isochronous_family = rep.cubic_root_free;
  }
  return rep;
}

ObstructionReport obstruction_certificate(const BertrandFamily& family) {
  ObstructionReport rep = obstruction_certificate(family.a);
  rep.gamma_tilde_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) {
    rep.gamma_tilde_min =
        std::min(rep.gamma_tilde_min, gamma_tilde(family.rho[i], family.wprime[i], family.params));
  }
  return rep;
}

bool family_x_monotone(const BertrandFamily& family) {
  if (family.size() < 2) return true;
  int dir = 0;
  for (std::size_t i = 1; i < family.size(); ++i) {
    const double dx = family_x(family.rho[i], family.ell[i], family.params) -
                      family_x(family.rho[i - 1], family.ell[i - 1], family.params);
    const int s = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
    if (s == 0) return false;
    if (dir == 0) dir = s;
    if (s != dir) return false;
  }
  return true;
}

void write_family_csv(std::ostream& out, const BertrandFamily& family) {
  out << "rho0,Wprime,L,W\n";
  for (std::size_t i = 0; i < family.size(); ++i) {
    out << format_double(family.rho[i]) << ',' << format_double(family.wprime[i]) << ','
        << format_double(family.ell[i]) << ',' << format_double(family.w[i]) << '\n';
  }
}

std::string family_metadata_json(const BertrandFamily& family) {
  nlohmann::json j = {
      {"a", family.a}, {"rho_star", family.rho_star}, {"ell_star", family.ell_star}};
  return j.dump(2);
}

}  // namespace relorbit

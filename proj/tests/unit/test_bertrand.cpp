#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "relorbit/bertrand.hpp"
#include "relorbit/clairaut.hpp"

using namespace relorbit;
using doctest::Approx;

namespace {

const PhysicalParams kUnit{};

BertrandFamily standard_family(double a, double ell_star = 2.0, std::size_t nodes = 3001) {
  return build_family(a, 1.0, ell_star, 0.5, 2.0, kUnit, nodes);
}

// R(phi) around the centre (rho0, 0): rho - rho0 = R cos(phi), integrated with
// fixed-step RK4 from R(0) = xi.
double polar_radius(const Potential& pot, double rho0, double ell, double xi, double phi_end) {
  auto rate = [&](double phi, double radius) {
    const double cphi = std::cos(phi);
    const double rho = rho0 + radius * cphi;
    const double gamma = std::sqrt(
        1.0 + ell * ell * (radius * radius + rho0 * rho0 + 2.0 * radius * rho0 * cphi));
    const double f = rho0 + gamma * pot.dw(rho) / (ell * ell);
    return std::sin(phi) * f / (1.0 + cphi * f / radius);
  };
  const int steps = 20000;
  const double h = phi_end / steps;
  double radius = xi;
  for (int i = 0; i < steps; ++i) {
    const double phi = i * h;
    const double k1 = rate(phi, radius);
    const double k2 = rate(phi + 0.5 * h, radius + 0.5 * h * k1);
    const double k3 = rate(phi + 0.5 * h, radius + 0.5 * h * k2);
    const double k4 = rate(phi + h, radius + h * k3);
    radius += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  return radius;
}

// Least squares by normal equations with Gaussian elimination.
std::vector<double> poly_fit(const std::vector<double>& x, const std::vector<double>& y, int deg) {
  const int n = deg + 1;
  std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m[i][j] += std::pow(x[k], i + j);
      m[i][n] += std::pow(x[k], i) * y[k];
    }
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int j = c; j <= n; ++j) m[r][j] -= f * m[c][j];
    }
  }
  std::vector<double> coeff(n);
  for (int i = 0; i < n; ++i) coeff[i] = m[i][n] / m[i][i];
  return coeff;
}

}  // namespace

TEST_CASE("family rates") {
  const double wp = -4.0 / std::sqrt(5.0);
  const FamilyRates r = family_rhs(1.0, wp, 2.0, 0.5, kUnit);
  CHECK(r.dwprime == Approx(-0.5 * wp - wp * wp * wp / 4.0).epsilon(1e-15));
  CHECK(r.dwprime == Approx(2.3255107).epsilon(1e-7));
  CHECK(r.dell == Approx(-2.5).epsilon(1e-15));

  const FamilyRates flat = family_rhs(0.7, -1.3, 1.1, 0.0, kUnit);
  CHECK(flat.dwprime == Approx(1.3 * 1.3 * 1.3 / (1.1 * 1.1 * 0.7)).epsilon(1e-15));

  CHECK_THROWS_AS(family_rhs(1.0, wp, 0.0, 0.5, kUnit), Error);
  CHECK_THROWS_AS(family_rhs(0.0, wp, 2.0, 0.5, kUnit), Error);
}

TEST_CASE("family construction") {
  const BertrandFamily fam = standard_family(0.5);
  REQUIRE_FALSE(fam.truncated);
  const std::size_t star = fam.node(1.0);
  CHECK(fam.wprime[star] == Approx(-4.0 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(fam.ell[star] == 2.0);
  CHECK(fam.w[star] == 0.0);
  CHECK(fam.rho.front() == Approx(0.5).epsilon(1e-15));
  CHECK(fam.rho.back() == Approx(2.0).epsilon(1e-15));
  CHECK(fam.max_equilibrium_residual() < 1e-10);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    CHECK(fam.ell[i] > 0.0);
    CHECK(fam.wprime[i] < 0.0);
    const double g = equilibrium_residual(fam.rho[i], fam.ell[i], fam.potential(), kUnit);
    CHECK(std::abs(g) < 1e-10);
  }
  CHECK_THROWS_AS(fam.node(1.00012345), Error);
  CHECK_THROWS_AS(build_family(-1.0, 1.0, 2.0, 0.5, 2.0, kUnit), Error);
  CHECK_THROWS_AS(build_family(0.5, 3.0, 2.0, 0.5, 2.0, kUnit), Error);
  CHECK_THROWS_AS(build_family(0.5, 1.0, -2.0, 0.5, 2.0, kUnit), Error);
}

TEST_CASE("tabulated derivatives are consistent") {
  // Central differences of the tabulated columns against the next column.
  auto fd_error = [](std::size_t nodes, int column) {
    const BertrandFamily fam = standard_family(0.5, 2.0, nodes);
    const std::size_t i = fam.node(1.25);
    const double h = fam.rho[1] - fam.rho[0];
    switch (column) {
      case 0: return std::abs((fam.w[i + 1] - fam.w[i - 1]) / (2 * h) - fam.wprime[i]);
      case 1: return std::abs((fam.wprime[i + 1] - fam.wprime[i - 1]) / (2 * h) - fam.w2[i]);
      case 2: return std::abs((fam.w2[i + 1] - fam.w2[i - 1]) / (2 * h) - fam.w3[i]);
      default: {
        const double w4 = w4_formula(fam.rho[i], fam.wprime[i], fam.ell[i], fam.a, kUnit);
        return std::abs((fam.w3[i + 1] - fam.w3[i - 1]) / (2 * h) - w4);
      }
    }
  };
  for (int column = 0; column < 4; ++column) {
    CAPTURE(column);
    const double coarse = fd_error(301, column);
    const double fine = fd_error(601, column);
    CHECK(coarse / fine == Approx(4.0).epsilon(0.02));
  }
}

TEST_CASE("third derivative formula matches the tabulated column") {
  const BertrandFamily fam = standard_family(1.0);
  for (std::size_t i = 0; i < fam.size(); i += 150) {
    CHECK(w3_formula(fam.rho[i], fam.wprime[i], fam.ell[i], 1.0, kUnit) ==
          Approx(fam.w3[i]).epsilon(1e-14));
  }
}

TEST_CASE("obstruction polynomial") {
  CHECK(q_poly(0.0, 1.0) == 16.0);
  CHECK(q_at_fixed_point_identity(1.0) == 16.0);
  for (double a : {-0.5, 0.25, 0.5, 1.0, 2.0, 3.0}) {
    const double k = (1.0 - a) / a;
    CHECK(q_poly(k, a) == Approx(q_at_fixed_point_identity(a)).epsilon(1e-12));
  }
  CHECK(q_poly(0.0, 0.5) == Approx(8.0 * 2.5 * 0.5).epsilon(1e-15));
}

TEST_CASE("first and second order radius terms") {
  CHECK(r1(M_PI / 2, 0.5) == Approx(std::sqrt(1.5)).epsilon(1e-15));
  CHECK(r1(0.0, 0.5) == Approx(1.0).epsilon(1e-15));
  for (double phi : {0.0, 0.4, 1.3, 2.9}) CHECK(r1(phi, 0.0) == 1.0);

  // Extract R2 from the numerical radius: (R/xi - R1)/xi = R2 + O(xi), with
  // one Richardson step to remove the O(xi) term.
  for (double a : {0.5, 1.0}) {
    const BertrandFamily fam = standard_family(a);
    const Potential pot = fam.potential();
    for (double rho0 : {0.8, 1.3}) {
      const double ell = fam.ell[fam.node(rho0)];
      for (double phi : {0.7, 1.9, 3.0, 4.4}) {
        CAPTURE(a);
        CAPTURE(rho0);
        CAPTURE(phi);
        auto estimate = [&](double xi) {
          return (polar_radius(pot, rho0, ell, xi, phi) / xi - r1(phi, a)) / xi;
        };
        const double xi = 1e-3 * rho0;
        const double measured = 2.0 * estimate(xi / 2) - estimate(xi);
        const double formula = r2(phi, rho0, ell, a, kUnit);
        CHECK(measured == Approx(formula).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("period constant against measurement") {
  for (double a : {0.25, 0.5, 1.0}) {
    const BertrandFamily fam = standard_family(a);
    REQUIRE_FALSE(fam.truncated);
    const Potential pot = fam.potential();
    for (double rho0 : {0.8, 1.0, 1.3}) {
      CAPTURE(a);
      CAPTURE(rho0);
      const double ell = fam.ell[fam.node(rho0)];
      const Linearization lin = linearized_frequency(rho0, ell, pot, kUnit);
      // The family fixes the linear period everywhere.
      CHECK(lin.a_coeff == Approx(1.0 + a).epsilon(1e-9));
      const PeriodFit fit = period_function(rho0, ell, pot, kUnit, default_xis(rho0));
      const double closed = period_constant_formula(rho0, ell, a, kUnit);
      REQUIRE(q_poly(family_x(rho0, ell, kUnit), a) != 0.0);
      CHECK(fit.c2 == Approx(closed).epsilon(1e-2));
      CHECK(std::abs(fit.c2) > 10.0 * fit.residual);
    }
  }
}

TEST_CASE("obstruction polynomial recovered from measured periods") {
  const double a = 0.5;
  std::vector<double> xs, qs;
  for (double ell_star : {0.4, 0.8, 1.5, 2.5, 4.0}) {
    const BertrandFamily fam = standard_family(a, ell_star);
    REQUIRE_FALSE(fam.truncated);
    const Potential pot = fam.potential();
    for (double rho0 : {0.6, 1.0, 1.6}) {
      const double ell = fam.ell[fam.node(rho0)];
      const double x = family_x(rho0, ell, kUnit);
      const PeriodFit fit = period_function(rho0, ell, pot, kUnit, default_xis(rho0));
      // c2 = prefactor * Q(x); the prefactor does not involve Q.
      const double prefactor = period_constant_formula(rho0, ell, a, kUnit) / q_poly(x, a);
      xs.push_back(x);
      qs.push_back(fit.c2 / prefactor);
    }
  }
  const std::vector<double> coeff = poly_fit(xs, qs, 5);
  const double expected[6] = {8.0 * 2.5 * 0.5, 28.0 * 2.5 * 0.5, 2.0 * 2.5 * 17.5,
                              63.0 + 23.0 - 6.25, 22.0 + 5.0 - 2.0, 2.0 + 1.0 - 0.25};
  for (int i = 0; i < 6; ++i) {
    CAPTURE(i);
    CHECK(coeff[i] == Approx(expected[i]).epsilon(1e-3));
  }
}

TEST_CASE("obstruction certificate") {
  const ObstructionReport one = obstruction_certificate(1.0);
  CHECK(one.k_defined);
  CHECK(one.k_value == 0.0);
  CHECK(one.q_direct == 16.0);
  CHECK(one.q_identity == 16.0);
  CHECK(one.cubic_at_0 == 1.0);
  CHECK(one.cubic_at_1 == 4.0);
  CHECK(one.derivative_discriminant == 324.0 - 432.0);
  CHECK(one.cubic_root_free);
  CHECK(one.no_isochronous_family);

  const ObstructionReport zero = obstruction_certificate(0.0);
  CHECK_FALSE(zero.k_defined);
  CHECK(zero.cubic_root_free);

  for (double a : {0.1, 0.25, 0.5, 0.9}) {
    const ObstructionReport r = obstruction_certificate(a);
    CHECK(r.q_direct == Approx(r.q_identity).epsilon(1e-12));
    CHECK(r.q_direct > 0.0);
    CHECK(r.no_isochronous_family);
  }
  // Sampled positivity of the cubic on [0, 1], independent of the certificate.
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    CHECK(1.0 + 6.0 * a - 9.0 * a * a + 6.0 * a * a * a > 0.0);
  }
}

TEST_CASE("gamma from the potential slope") {
  const BertrandFamily fam = standard_family(0.5);
  for (std::size_t i = 0; i < fam.size(); i += 100) {
    const double g = gamma_tilde(fam.rho[i], fam.wprime[i], kUnit);
    CHECK(g >= 1.0);
    CHECK(g == Approx(clairaut_gamma(fam.rho[i], 0.0, fam.ell[i], kUnit)).epsilon(1e-12));
  }
  const ObstructionReport rep = obstruction_certificate(fam);
  CHECK(rep.gamma_tilde_min >= 1.0);
  CHECK(rep.no_isochronous_family);
  for (double wp : {-1e-6, -0.3, -5.0, -1e4}) CHECK(gamma_tilde(0.7, wp, kUnit) >= 1.0);
}

TEST_CASE("x is monotone along families") {
  for (double a : {-0.5, 0.25, 0.5, 1.0, 3.0}) {
    const BertrandFamily fam = standard_family(a, 2.0, 1501);
    CHECK(family_x_monotone(fam));
    // Independent sampling of x = rho^2 L^2.
    double prev = 0.0;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      const double x = fam.rho[i] * fam.rho[i] * fam.ell[i] * fam.ell[i];
      if (i > 0) CHECK((x - prev) * (fam.rho.back() * fam.ell.back() - fam.rho[0] * fam.ell[0]) > 0.0);
      prev = x;
    }
  }
}

TEST_CASE("family export") {
  const BertrandFamily fam = standard_family(0.5, 2.0, 11);
  std::ostringstream csv;
  write_family_csv(csv, fam);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "rho0,Wprime,L,W");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(fam.size()));
  CHECK(rows >= 10);  // the grid is shifted to contain rho_star and stays inside the range
  const std::string meta = family_metadata_json(fam);
  for (const char* key : {"\"a\"", "\"rho_star\"", "\"ell_star\""}) {
    CHECK(meta.find(key) != std::string::npos);
  }
}

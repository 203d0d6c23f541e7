#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "relorbit/circular.hpp"
#include "relorbit/coulomb.hpp"
#include "relorbit/dynamics.hpp"
#include "support.hpp"

using namespace relorbit;
using doctest::Approx;

namespace {

const PhysicalParams kUnit{};
const Potential kCoulomb = make_potential(PotentialKind::kCoulomb, 1.0, kUnit);
const double kHmin2 = -(1.0 - std::sqrt(3.0) / 2.0);  // ell = 2

EMClass cls(double ell, double h, double tol = 1e-9) {
  return classify({ell, h}, 1.0, kUnit, tol).cls;
}

}  // namespace

TEST_CASE("sigma and minimum energy") {
  const SigmaInfo two = sigma_and_min_energy(2.0, 1.0, kUnit);
  CHECK(two.sigma2_defined);
  CHECK(two.sigma == Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(two.h_min_defined);
  CHECK(two.h_min == Approx(kHmin2).epsilon(1e-14));
  CHECK(two.h_min == Approx(-0.1339746).epsilon(1e-6));

  const SigmaInfo one = sigma_and_min_energy(1.0, 1.0, kUnit);
  CHECK(one.sigma == 0.0);
  CHECK(one.h_min == -1.0);

  const SigmaInfo sub = sigma_and_min_energy(0.5, 1.0, kUnit);
  CHECK(sub.sigma2 == Approx(-3.0).epsilon(1e-15));
  CHECK_FALSE(sub.h_min_defined);

  CHECK_FALSE(sigma_and_min_energy(0.0, 1.0, kUnit).sigma2_defined);

  const PhysicalParams other{2.0, 3.0};
  const SigmaInfo s = sigma_and_min_energy(1.5, 2.0, other);
  CHECK(s.sigma2 == Approx(1.0 - 4.0 / (1.5 * 1.5 * 9.0)).epsilon(1e-15));
  CHECK(s.h_min == Approx(-2.0 * 9.0 * (1.0 - std::sqrt(s.sigma2))).epsilon(1e-14));
}

TEST_CASE("energy-momentum classes") {
  CHECK(cls(2.0, -0.05) == EMClass::kBoundedNonCollision);
  CHECK(cls(2.0, kHmin2) == EMClass::kCircular);
  // The rounded boundary value needs a tolerance matching its seven digits.
  CHECK(cls(2.0, -0.1339746, 1e-7) == EMClass::kCircular);
  CHECK(cls(1.0, -1.0) == EMClass::kExcludedPoint);
  CHECK(cls(-1.0, -1.0) == EMClass::kExcludedPoint);
  CHECK(cls(2.0, -0.2) == EMClass::kEmpty);
  CHECK(cls(2.0, 0.0) == EMClass::kUnboundedSupercritical);
  CHECK(cls(2.0, 3.0) == EMClass::kUnboundedSupercritical);
  CHECK(cls(0.5, -5.0) == EMClass::kSubcritical);
  CHECK(cls(0.0, 0.3) == EMClass::kSubcritical);
  CHECK(cls(1.0, -0.5) == EMClass::kCriticalMomentum);
  CHECK(cls(1.0, -1.5) == EMClass::kEmpty);

  const Classification crit = classify({1.0, -0.5}, 1.0, kUnit);
  CHECK_FALSE(crit.note.empty());
  CHECK(classify({2.0, -0.05}, 1.0, kUnit).note.empty());

  CHECK(class_code(EMClass::kEmpty) == 0);
  CHECK(class_code(EMClass::kExcludedPoint) == 6);
  CHECK(std::string(to_string(EMClass::kBoundedNonCollision)) == "BoundedNonCollision");
  CHECK_FALSE(admits_motion(EMClass::kEmpty));
  CHECK_FALSE(admits_motion(EMClass::kExcludedPoint));
  CHECK(admits_motion(EMClass::kSubcritical));
}

TEST_CASE("classification is even in ell and matches the witness") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ell_dist(-3.0, 3.0);
  std::uniform_real_distribution<double> h_dist(-1.5, 1.0);
  for (int i = 0; i < 3000; ++i) {
    const double ell = ell_dist(rng), h = h_dist(rng);
    const Classification c = classify({ell, h}, 1.0, kUnit);
    CHECK(classify({-ell, h}, 1.0, kUnit).cls == c.cls);
    if (c.cls == EMClass::kCircular || c.cls == EMClass::kBoundedNonCollision) {
      CHECK(ell * ell > 1.0);
    }
    const std::optional<PhaseState> w = existence_witness({ell, h}, 1.0, kUnit);
    CHECK(w.has_value() == admits_motion(c.cls));
    if (w) {
      CHECK(std::abs(angular_momentum(*w) - ell) < 1e-10);
      CHECK(std::abs(hamiltonian(*w, kCoulomb, kUnit) - h) < 1e-10);
    }
  }
}

TEST_CASE("witnesses on the boundaries") {
  for (double ell : {1.5, 2.0, 4.0}) {
    const double hmin = sigma_and_min_energy(ell, 1.0, kUnit).h_min;
    const auto w = existence_witness({ell, hmin}, 1.0, kUnit);
    REQUIRE(w);
    CHECK(std::abs(hamiltonian(*w, kCoulomb, kUnit) - hmin) < 1e-10);
    // The witness of the minimum energy is the circular orbit of that momentum;
    // p_r is the square root of a rounding-level quantity.
    CHECK(std::abs(w->p[0]) < 1e-6);
  }
  for (double h : {-0.99, -0.5, 0.0, 2.0}) {
    const auto w = existence_witness({1.0, h}, 1.0, kUnit);
    REQUIRE(w);
    CHECK(std::abs(hamiltonian(*w, kCoulomb, kUnit) - h) < 1e-10);
    CHECK(std::abs(angular_momentum(*w) - 1.0) < 1e-10);
  }
  CHECK_FALSE(existence_witness({1.0, -1.0}, 1.0, kUnit));
  CHECK_FALSE(existence_witness({2.0, -0.2}, 1.0, kUnit));
}

TEST_CASE("diagram export") {
  std::ostringstream out;
  write_em_diagram(out, -2.0, 2.0, 5, -1.0, 0.0, 3, 1.0, kUnit);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "ell,h,class_code");
  int rows = 0;
  bool excluded = false;
  while (std::getline(in, line)) {
    ++rows;
    if (line == "-1,-1,6" || line == "1,-1,6") excluded = true;
  }
  CHECK(rows == 15);
  CHECK(excluded);
}

TEST_CASE("runge-lenz vector") {
  const Vec2 r = runge_lenz_vector({{1.0, 0.0}, {0.0, 1.0}}, 1.0, kUnit);
  CHECK(r[0] == Approx(1.0 - std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r[1] == Approx(0.0));

  const Vec2 rest = runge_lenz_vector({{0.6, -0.8}, {0.0, 0.0}}, 2.0, PhysicalParams{3.0, 1.0});
  CHECK(rest[0] == Approx(-6.0 * 0.6).epsilon(1e-15));
  CHECK(rest[1] == Approx(6.0 * 0.8).epsilon(1e-15));

  for (double r0 : {0.01, 0.5, 2.0, 30.0}) {
    const PhaseState s = circular_state(circular_orbit(r0, kCoulomb, kUnit), kUnit);
    CHECK(norm(runge_lenz_vector(s, 1.0, kUnit)) < 1e-10);
  }
  CHECK_THROWS_AS(runge_lenz_vector({{0.0, 0.0}, {1.0, 0.0}}, 1.0, kUnit), Error);
}

TEST_CASE("conic identity holds pointwise") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const PhaseState s{{u(rng), u(rng)}, {u(rng), u(rng)}};
    if (norm(s.q) < 1e-3) continue;
    CHECK(std::abs(conic_residual(s, 1.0, kUnit)) < 1e-12 * std::max(1.0, norm(s.q)));
  }
}

TEST_CASE("rate of the runge-lenz vector") {
  // dR/dt = -m k (d gamma/dt) q/|q|, checked by central differences on the dense output.
  const Trajectory traj =
      integrate(testing::coulomb_state(2.0, -0.05, 5.0), 0.0, 100.0, kCoulomb, kUnit);
  auto err = [&](double t, double dt) {
    const Vec2 dr = (1.0 / (2 * dt)) * (runge_lenz_vector(traj.at(t + dt), 1.0, kUnit) -
                                        runge_lenz_vector(traj.at(t - dt), 1.0, kUnit));
    const double dg = (lorentz_gamma(traj.at(t + dt).p, kUnit) -
                       lorentz_gamma(traj.at(t - dt).p, kUnit)) / (2 * dt);
    const PhaseState s = traj.at(t);
    const Vec2 pred = (-dg / norm(s.q)) * s.q;
    return norm(dr - pred);
  };
  for (double t : {10.0, 33.0, 71.0}) {
    CHECK(err(t, 1e-2) < 1e-4);
    const double ratio = err(t, 2e-2) / err(t, 1e-2);
    CHECK(ratio == Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("runge-lenz frame along a bounded orbit") {
  const Trajectory traj =
      integrate(testing::coulomb_state(2.0, -0.05, 5.0), 0.0, 600.0, kCoulomb, kUnit);
  const RLSeries coarse = rl_components_and_invariant(traj, 1.0, kUnit, 0.02);
  const RLSeries fine = rl_components_and_invariant(traj, 1.0, kUnit, 0.01);
  CHECK(fine.sigma2 == Approx(0.75).epsilon(1e-15));
  CHECK(fine.invariant_drift < 1e-8);
  CHECK(coarse.ode_residual / fine.ode_residual == Approx(4.0).epsilon(0.05));
  CHECK(fine.gamma_link_residual < 1e-9);
  REQUIRE(fine.theta.size() == fine.r_alpha.size());
  REQUIRE(fine.theta.size() == fine.r_beta.size());
  CHECK(fine.theta[1] - fine.theta[0] == Approx(0.01).epsilon(1e-12));

  // Independent invariant: amplitude from the apsidal radii,
  // 1/r_p - 1/r_a = 2 c^2 A / (ell^2 c^2 - k^2).
  double rmin = INFINITY, rmax = 0.0;
  for (const Apsis& a : apsis_times(traj)) {
    rmin = std::min(rmin, a.r);
    rmax = std::max(rmax, a.r);
  }
  const double amp = (1.0 / rmin - 1.0 / rmax) * 3.0 / 2.0;
  CHECK(std::sqrt(fine.invariant0) == Approx(amp).epsilon(1e-7));
}

// Escaping orbits for sigma^2 = 0 and sigma^2 < 0, a bounded one for sigma^2 > 0.
TEST_CASE("quadratic invariant in every momentum regime") {
  struct Case {
    double ell, h, r0;
  };
  for (const Case c : {Case{1.0, 0.3, 2.0}, Case{0.5, 0.2, 5.0}, Case{3.0, 0.5, 4.0}}) {
    CAPTURE(c.ell);
    const Trajectory traj =
        integrate(testing::coulomb_state(c.ell, c.h, c.r0), 0.0, 50.0, kCoulomb, kUnit);
    const RLSeries s = rl_components_and_invariant(traj, 1.0, kUnit, 0.001);
    CHECK(s.sigma2 == Approx(1.0 - 1.0 / (c.ell * c.ell)).epsilon(1e-15));
    CHECK(s.invariant_drift < 1e-8);
    CHECK(s.gamma_link_residual < 1e-9);
  }
}

TEST_CASE("runge-lenz frame on a circular orbit") {
  const PhaseState s = circular_state(circular_orbit(3.0, kCoulomb, kUnit), kUnit);
  const Trajectory traj = integrate(s, 0.0, 100.0, kCoulomb, kUnit);
  const RLSeries series = rl_components_and_invariant(traj, 1.0, kUnit, 0.05);
  for (std::size_t i = 0; i < series.theta.size(); ++i) {
    CHECK(std::abs(series.r_alpha[i]) < 1e-10);
    CHECK(std::abs(series.r_beta[i]) < 1e-10);
  }
}

TEST_CASE("orientation") {
  const PhaseState s = testing::coulomb_state(2.0, -0.05, 5.0);
  const PhaseState m = reflect_orientation(s);
  CHECK(angular_momentum(m) == Approx(-2.0).epsilon(1e-15));
  CHECK(hamiltonian(m, kCoulomb, kUnit) == Approx(hamiltonian(s, kCoulomb, kUnit)).epsilon(1e-15));
  const Trajectory neg = integrate(m, 0.0, 50.0, kCoulomb, kUnit);
  try {
    rl_components_and_invariant(neg, 1.0, kUnit, 0.01);
    FAIL("expected an orientation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOrientation);
  }
  // Mirror-image orbits share the invariant.
  const Trajectory pos = integrate(s, 0.0, 50.0, kCoulomb, kUnit);
  const Trajectory back = integrate(reflect_orientation(m), 0.0, 50.0, kCoulomb, kUnit);
  CHECK(rl_components_and_invariant(back, 1.0, kUnit, 0.01).invariant0 ==
        Approx(rl_components_and_invariant(pos, 1.0, kUnit, 0.01).invariant0).epsilon(1e-14));
}

TEST_CASE("newtonian limit keeps the vector fixed") {
  const PhysicalParams slow{1.0, 1e4};
  const Potential pot = make_potential(PotentialKind::kCoulomb, 1.0, slow);
  const PhaseState s0 = testing::coulomb_state(1.2, -0.3, 1.5, 1.0, slow);
  const Trajectory traj = integrate(s0, 0.0, 20.0, pot, slow);
  const Vec2 r0 = runge_lenz_vector(s0, 1.0, slow);
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    worst = std::max(worst, norm(runge_lenz_vector(traj.state(i), 1.0, slow) - r0));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("closed-form orbit") {
  const double sigma = std::sqrt(0.75);
  const double r = orbit_closed_form(0.7, 0.0, 0.0, 2.0, kHmin2, 1.0, kUnit);
  CHECK(1.0 / r == Approx(sigma / 3.0).epsilon(1e-14));
  CHECK(r == Approx(2.0 * std::sqrt(3.0)).epsilon(1e-14));

  const PhaseState s0 = testing::coulomb_state(2.0, -0.05, 5.0);
  const Trajectory traj = integrate(s0, 0.0, 5.0 * 7.2551975 * 25.0, kCoulomb, kUnit);
  const ClosedFormFit fit = fit_closed_form(traj, 1.0, kUnit);
  CHECK(fit.max_residual < 1e-7);
  CHECK(fit.phase_form);
  for (std::size_t i = 0; i < traj.size(); i += 7) {
    const double inv =
        1.0 / orbit_closed_form(traj.theta(i), fit.amp, fit.theta0, 2.0, -0.05, 1.0, kUnit);
    CHECK(std::abs(inv - 1.0 / traj.r(i)) < 1e-7);
    CHECK(std::abs(fit.inverse_radius(traj.theta(i), 1.0, kUnit) - inv) < 1e-12);
    // m c^2 gamma - m c^2 - h = k / r
    const double gamma = lorentz_gamma(traj.state(i).p, kUnit);
    CHECK(std::abs(gamma - 1.0 + 0.05 - 1.0 / traj.r(i)) < 1e-9);
  }
}

TEST_CASE("closed-form orbit in the hyperbolic regime") {
  // ell = 0.5, h = 0.2, moving outward: sigma^2 = -3 and the orbit escapes.
  const Trajectory traj =
      integrate(testing::coulomb_state(0.5, 0.2, 5.0), 0.0, 200.0, kCoulomb, kUnit);
  const ClosedFormFit fit = fit_closed_form(traj, 1.0, kUnit);
  CHECK(fit.sigma2 == Approx(-3.0).epsilon(1e-15));
  CHECK(fit.max_residual < 1e-7);
  for (std::size_t i = 0; i < traj.size(); i += 5) {
    CHECK(std::abs(fit.inverse_radius(traj.theta(i), 1.0, kUnit) - 1.0 / traj.r(i)) < 1e-7);
  }
}

TEST_CASE("closed form outside its branch") {
  // Subcritical: the denominator ell^2 c^2 - k^2 = -0.75 is negative, so r > 0 needs
  // amp cosh(|sigma| (theta - theta0)) < -k (h + m c^2) = -1.2.
  CHECK(orbit_closed_form(0.0, -2.0, 0.0, 0.5, 0.2, 1.0, kUnit) == Approx(0.75 / 0.8).epsilon(1e-14));
  CHECK(orbit_closed_form(3.0, -0.5, 0.0, 0.5, 0.2, 1.0, kUnit) > 0.0);
  try {
    orbit_closed_form(0.0, -0.5, 0.0, 0.5, 0.2, 1.0, kUnit);
    FAIL("expected out-of-branch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfBranch);
  }
  CHECK_THROWS_AS(orbit_closed_form(0.0, 0.1, 0.0, 1.0, -0.5, 1.0, kUnit), Error);
}

TEST_CASE("apsidal precession") {
  const Trajectory traj =
      integrate(testing::coulomb_state(2.0, -0.05, 5.0), 0.0, 1000.0, kCoulomb, kUnit);
  const Precession p = apsidal_precession(traj, 1.0, kUnit);
  CHECK(p.perihelion_angles.size() >= 2);
  CHECK(std::abs(p.delta_theta - 4.0 * M_PI / std::sqrt(3.0)) < 1e-6);
  CHECK(p.predicted == Approx(4.0 * M_PI / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(p.predicted_per_period == Approx(2.0 * M_PI * (2.0 / std::sqrt(3.0) - 1.0)).epsilon(1e-14));
  CHECK(p.max_spread < 1e-6);

  const PhysicalParams slow{1.0, 1e4};
  const Potential pot = make_potential(PotentialKind::kCoulomb, 1.0, slow);
  const Trajectory newton =
      integrate(testing::coulomb_state(1.2, -0.3, 1.5, 1.0, slow), 0.0, 60.0, pot, slow);
  CHECK(std::abs(apsidal_precession(newton, 1.0, slow).per_period) < 1e-7);

  const PhaseState circ = circular_state(circular_orbit(2.0, kCoulomb, kUnit), kUnit);
  try {
    apsidal_precession(integrate(circ, 0.0, 100.0, kCoulomb, kUnit), 1.0, kUnit);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
}

TEST_CASE("time at a given angle") {
  const Trajectory traj =
      integrate(testing::coulomb_state(2.0, -0.05, 5.0), 0.0, 300.0, kCoulomb, kUnit);
  for (double th : {0.5, 2.0, 4.5}) {
    const double t = time_at_angle(traj, th);
    CHECK(traj.theta_at(t) == Approx(th).epsilon(1e-12));
  }
}

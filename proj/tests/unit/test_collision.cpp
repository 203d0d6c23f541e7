#include <doctest.h>

#include <cmath>
#include <random>

#include "relorbit/collision.hpp"
#include "relorbit/dynamics.hpp"
#include "support.hpp"

using namespace relorbit;
using doctest::Approx;

namespace {

const PhysicalParams kUnit{};
const Potential kCoulomb = make_potential(PotentialKind::kCoulomb, 1.0, kUnit);

PhaseState inward(double ell, double h, double r0) {
  PhaseState s = testing::coulomb_state(ell, h, r0);
  s.p[0] = -s.p[0];
  return s;
}

}  // namespace

TEST_CASE("w variables") {
  const CollisionVars a = w_transform({{1.0, 0.0}, {2.0, 3.0}}, 1.0, kUnit);
  CHECK(a.w1 == 2.0);
  CHECK(a.w2 == 3.0);
  CHECK(a.w1 * a.w1 + a.w2 * a.w2 == 13.0);
  CHECK(a.r == 1.0);
  CHECK(a.theta == 0.0);

  const CollisionVars b = w_transform({{0.0, 2.0}, {1.0, 0.0}}, 1.0, kUnit);
  CHECK(b.w1 == 0.0);
  CHECK(b.w2 == -2.0);
  CHECK(b.theta == Approx(M_PI / 2).epsilon(1e-15));

  CHECK_THROWS_AS(w_transform({{0.0, 0.0}, {1.0, 0.0}}, 1.0, kUnit), Error);
  CHECK_THROWS_AS(w_inverse({0.0, 0.0}, 1.0, 0.0), Error);
}

TEST_CASE("w roundtrip and norm identity") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 2000; ++i) {
    const PhaseState s{{u(rng), u(rng)}, {u(rng), u(rng)}};
    if (norm(s.q) < 1e-3) continue;
    const CollisionVars v = w_transform(s, 1.0, kUnit);
    CHECK(v.w1 * v.w1 + v.w2 * v.w2 ==
          Approx(norm2(s.q) * norm2(s.p)).epsilon(1e-12));
    const PhaseState back = w_inverse(s.q, v.w1, v.w2);
    CHECK(norm(back.p - s.p) < 1e-12 * std::max(1.0, norm(s.p)));
    const PhaseState polar = to_phase_state(v);
    CHECK(norm(polar.q - s.q) < 1e-12 * std::max(1.0, norm(s.q)));
    CHECK(norm(polar.p - s.p) < 1e-12 * std::max(1.0, norm(s.p)));
    CHECK(v.h == Approx(hamiltonian(s, kCoulomb, kUnit)).epsilon(1e-14));
    CHECK(std::abs(manifold_residual(v, 1.0, kUnit)) < 1e-10 * std::max(1.0, norm2(s.q) * norm2(s.p)));
  }
}

TEST_CASE("regularized rates at the origin") {
  const CollisionVars at0{0.0, 0.3, -0.8, 0.6, -0.2};
  const RegularizedRates r = regularized_rhs(at0, kUnit);
  CHECK(r.dw1 == Approx(-0.2 + 1.0).epsilon(1e-15));
  // |w| = 1 = k/c here, so dr/dt = c^2 w1 / k.
  CHECK(r.dr == Approx(-0.8).epsilon(1e-15));
  CHECK(r.angle_singular);
  CHECK(std::isnan(r.dtheta));

  const RegularizedRates radial = regularized_rhs({0.0, 0.3, 0.5, 0.0, 0.0}, kUnit);
  CHECK_FALSE(radial.angle_singular);
  CHECK(radial.dr == Approx(1.0).epsilon(1e-15));

  const PhysicalParams other{2.0, 3.0};
  const RegularizedRates scaled = regularized_rhs({0.0, 0.0, 0.4, 0.3, 1.0}, other);
  CHECK(scaled.dr == Approx(3.0 * 0.4 / 0.5).epsilon(1e-15));
  CHECK(scaled.dw1 == Approx(1.0 + 2.0 * 9.0).epsilon(1e-15));
}

TEST_CASE("regularized and cartesian flows agree away from the origin") {
  for (const PhaseState s0 : {testing::coulomb_state(2.0, -0.05, 5.0), inward(0.5, 0.0, 1.0)}) {
    const Trajectory cart = integrate(s0, 0.0, 40.0, kCoulomb, kUnit);
    const CollisionVars v0 = w_transform(s0, 1.0, kUnit);
    const RegularizedTrajectory reg = integrate_regularized(v0, cart.t_end(), kUnit);
    const double t_stop = std::min(cart.t_end(), reg.t_end());
    double worst = 0.0;
    for (std::size_t i = 0; i < cart.size() && cart.time(i) <= t_stop; ++i) {
      if (cart.r(i) < 1e-3) continue;
      const CollisionVars v = reg.at(cart.time(i));
      worst = std::max(worst, std::abs(v.r - cart.r(i)) + std::abs(v.theta - cart.theta(i)));
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("regularized flow invariants") {
  const CollisionVars v0 = w_transform(inward(0.5, 0.0, 1.0), 1.0, kUnit);
  const RegularizedTrajectory reg = integrate_regularized(v0, 50.0, kUnit);
  CHECK(reg.collided());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const CollisionVars v = reg.vars(i);
    CHECK(v.w2 == v0.w2);
    CHECK(v.h == v0.h);
    CHECK(std::abs(manifold_residual(v, 1.0, kUnit)) < 1e-9);
    CHECK(std::abs(regularized_rhs(v, kUnit).dr) < 1.0);
  }
}

TEST_CASE("radial motion has one aphelion between collisions") {
  // Radial, bound, leaving the origin: h = -0.5, r = 0.5.
  const PhaseState s0 = testing::coulomb_state(0.0, -0.5, 0.5);
  const CollisionVars v0 = w_transform(s0, 1.0, kUnit);
  const RegularizedTrajectory fwd = integrate_regularized(v0, 100.0, kUnit);
  const RegularizedTrajectory bwd = integrate_regularized(v0, -100.0, kUnit);
  REQUIRE(fwd.collided());
  REQUIRE(bwd.collided());
  const auto ahead = regularized_apses(fwd);
  const auto behind = regularized_apses(bwd);
  CHECK(ahead.size() + behind.size() == 1);
  for (const auto& a : ahead) {
    CHECK(a.aphelion);
    // Turning point of radial motion: 1 + h + 1/r = 1 at rest, r = 1/|h|.
    CHECK(a.r == Approx(2.0).epsilon(1e-10));
  }
  for (std::size_t i = 0; i < fwd.size(); ++i) CHECK(fwd.vars(i).theta == v0.theta);
}

TEST_CASE("incoming collision asymptotics") {
  const CollisionRun run = integrate_to_collision(inward(0.5, 0.0, 1.0), 1.0, kUnit);
  const CollisionFit& f = run.fit;
  const double w10 = -std::sqrt(1.0 - 0.25);  // |w|^2 = k^2/c^2 at r = 0
  CHECK(f.w10 == Approx(w10).epsilon(1e-8));
  CHECK(f.w2 == 0.5);
  CHECK(f.slope_pred == Approx(std::abs(w10)).epsilon(1e-8));
  CHECK(f.slope == Approx(f.slope_pred).epsilon(5e-3));
  CHECK(f.lambda_pred == Approx(0.5 / w10).epsilon(1e-8));
  CHECK(f.lambda_pred_ell == f.lambda_pred);
  CHECK(f.lambda == Approx(f.lambda_pred).epsilon(1e-2));
  CHECK(std::abs(f.w_norm_at_collision - 1.0) < 1e-6);
  CHECK(f.max_manifold_residual < 1e-9);
  CHECK(f.max_radial_speed < 1.0);
  CHECK(f.r_remainder_exponent >= 1.5);
  CHECK(f.theta_remainder_ratio < 0.05);
  CHECK(f.window.size() == 21);
  CHECK(f.t_collision > 0.0);
  CHECK(std::string(to_string(f.branch)) == "incoming");

  // Collision time agrees with the Cartesian integration stopping at its radius.
  const Trajectory cart = integrate(inward(0.5, 0.0, 1.0), 0.0, 10.0, kCoulomb, kUnit);
  REQUIRE(cart.collided());
  CHECK(cart.t_end() == Approx(f.t_collision).epsilon(1e-6));
}

TEST_CASE("outgoing branch") {
  const PhaseState s0 = testing::coulomb_state(0.5, 0.0, 1.0);
  const CollisionFit in = integrate_to_collision(inward(0.5, 0.0, 1.0), 1.0, kUnit).fit;
  const CollisionFit out =
      integrate_to_collision(s0, 1.0, kUnit, CollisionBranch::kOutgoing).fit;
  CHECK(out.branch == CollisionBranch::kOutgoing);
  CHECK(out.t_collision < 0.0);
  CHECK(out.w10 > 0.0);
  CHECK(out.slope > 0.0);
  CHECK(out.slope == Approx(out.slope_pred).epsilon(5e-3));
  CHECK(out.lambda == Approx(out.lambda_pred).epsilon(1e-2));
  // Time reversal of the incoming run.
  CHECK(out.t_collision == Approx(-in.t_collision).epsilon(1e-9));
  CHECK(out.w10 == Approx(-in.w10).epsilon(1e-9));
}

TEST_CASE("radial collision") {
  const CollisionFit f = integrate_to_collision(inward(0.0, -0.2, 1.0), 1.0, kUnit).fit;
  CHECK(f.lambda_pred == 0.0);
  CHECK(std::abs(f.lambda) < 1e-9);
  CHECK(f.w10 == Approx(-1.0).epsilon(1e-8));
  CHECK(f.slope == Approx(1.0).epsilon(5e-3));
}

TEST_CASE("collision preconditions") {
  try {
    integrate_to_collision(testing::coulomb_state(2.0, -0.05, 5.0), 1.0, kUnit);
    FAIL("expected wrong-regime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWrongRegime);
  }
  CollisionConfig cfg;
  cfg.t_max = 100.0;
  try {
    // Subcritical but escaping.
    integrate_to_collision(testing::coulomb_state(0.5, 0.2, 5.0), 1.0, kUnit,
                           CollisionBranch::kIncoming, cfg);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPrecondition);
  }
}

TEST_CASE("fit report") {
  const CollisionFit f = integrate_to_collision(inward(0.5, 0.0, 1.0), 1.0, kUnit).fit;
  const std::string json = collision_fit_json(f);
  for (const char* key : {"\"w10\"", "\"theta0\"", "\"slope\"", "\"slope_pred\"", "\"lambda\"",
                          "\"lambda_pred\"", "\"window\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

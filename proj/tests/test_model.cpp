#include <doctest.h>

#include <cmath>
#include <random>

#include "hwq/model.hpp"

using namespace hwq;

namespace {

SystemParams two_class(Vec lambda, Vec mu, Vec gamma, Vec hl, Vec hm) {
  SystemParams p;
  p.m = lambda.size();
  p.lambda = lambda;
  p.mu = mu;
  p.gamma = gamma;
  p.hat_lambda = hl;
  p.hat_mu = hm;
  p.scv.assign(p.m, 1.0);
  return p;
}

// Drift written directly from its formula for the oracle.
Vec ref_drift(const Vec& x, const Vec& u, double varrho, const Vec& mu, const Vec& gamma, double c) {
  const double m = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  const double sp = std::max(s, 0.0);
  Vec b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    b[i] = -varrho * mu[i] / m - mu[i] * (x[i] - sp * u[i]) - (x[i] <= c ? gamma[i] * sp * u[i] : 0.0);
  return b;
}

}  // namespace

TEST_CASE("spare capacity examples") {
  CHECK(spare_capacity(two_class({1}, {1}, {0}, {0}, {0})) == 0.0);
  CHECK(spare_capacity(two_class({0.5, 0.5}, {1, 1}, {0, 0}, {-0.5, -0.5}, {0, 0})) == doctest::Approx(1.0));
  // μ̂_i = λ̂_i/ρ_i cancels term by term
  CHECK(std::fabs(spare_capacity(two_class({0.25, 1.5}, {0.5, 3}, {0, 0}, {0.3, -0.2}, {0.6, -0.4}))) < 1e-15);
  CHECK(spare_capacity(SystemParams::balanced(3, 2.0)) == doctest::Approx(2.0));
}

TEST_CASE("system validation") {
  CHECK_THROWS_AS(two_class({0.5, 0.6}, {1, 1}, {0, 0}, {0, 0}, {0, 0}).validate(), PreconditionError);
  CHECK_THROWS_AS(two_class({0.5, 0.5}, {1, -1}, {0, 0}, {0, 0}, {0, 0}).validate(), PreconditionError);
  CHECK_NOTHROW(SystemParams::balanced(4, 1.0, 2.0, 0.5).validate());
}

TEST_CASE("prelimit parameters carry the spare capacity identity") {
  const auto sys = SystemParams::balanced(2, 1.0);
  const auto p = PrelimitParams::from_system(sys, 100);
  CHECK(p.lambda_n()[0] == doctest::Approx(45.0));
  CHECK(p.varrho_n() == doctest::Approx(1.0));
  double load = 0.0;
  for (std::size_t i = 0; i < 2; ++i) load += p.lambda_n()[i] / (100.0 * p.mu_n()[i]);
  CHECK(p.varrho_n() == doctest::Approx(10.0 * (1.0 - load)).epsilon(1e-15));
}

TEST_CASE("control vectors live on the simplex") {
  CHECK_NOTHROW(ControlVector({0.5, 0.5 + 1e-13}));
  CHECK_THROWS_AS(ControlVector({0.5, 0.6}), ControlError);
  CHECK_THROWS_AS(ControlVector({1.1, -0.1}), ControlError);
  const ControlVector u({0.5 - 5e-13, 0.5});
  CHECK(u[0] + u[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(u[0] >= 0.0);
}

TEST_CASE("drift examples") {
  const auto d = DiffusionSpec::make(1.0, {1, 1}, {0, 0}, {0.5, 0.5});
  const Vec b = drift(Vec{1, 1}, ControlVector({1, 0}), d);
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(-1.5));
  const auto d2 = DiffusionSpec::make(2.0, {1, 2}, {0.3, 0.7}, {0.5, 0.5});
  const Vec b2 = drift(Vec{-1, -1}, ControlVector({0.2, 0.8}), d2);
  CHECK(std::fabs(b2[0]) < 1e-15);
  CHECK(std::fabs(b2[1]) < 1e-15);
  const Vec b0 = drift(Vec{0, 0}, ControlVector({0.2, 0.8}), d2);
  CHECK(b0[0] == doctest::Approx(-1.0));
  CHECK(b0[1] == doctest::Approx(-2.0));
}

TEST_CASE("drift matches the reference formula, truncated and not") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-5, 5), P(0, 1);
  const auto d = DiffusionSpec::make(0.7, {1, 2, 0.5}, {1, 0, 2}, {0.2, 0.6, 0.1});
  for (int k = 0; k < 500; ++k) {
    Vec x{U(rng), U(rng), U(rng)};
    Vec w{P(rng), P(rng), P(rng)};
    const double s = w[0] + w[1] + w[2];
    for (auto& v : w) v /= s;
    const ControlVector u(w);
    for (double c : {1.0, 2.5, kInf}) {
      const Vec b = drift_truncated(x, u, d, c);
      const Vec r = ref_drift(x, u.values(), 0.7, d.mu, d.gamma, c);
      for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(r[i]).epsilon(1e-13));
    }
    const Vec full = drift(x, u, d), inf = drift_truncated(x, u, d, kInf);
    for (int i = 0; i < 3; ++i) CHECK(full[i] == inf[i]);
  }
  CHECK_THROWS_AS(drift_truncated(Vec{0, 0, 0}, ControlVector::barycenter(3), d, 0.5), PreconditionError);
}

TEST_CASE("truncation drops the abandonment term only above the level") {
  const auto d = DiffusionSpec::make(1.0, {1, 1}, {1, 1}, {0.5, 0.5});
  const Vec x{5, 0.5};
  const ControlVector u({0.5, 0.5});
  const Vec full = drift(x, u, d), trunc = drift_truncated(x, u, d, 1.0);
  CHECK(trunc[0] == doctest::Approx(full[0] + 1.0 * 5.5 * 0.5));
  CHECK(trunc[1] == full[1]);
  const auto d0 = DiffusionSpec::make(1.0, {1, 1}, {0, 0}, {0.5, 0.5});
  const Vec a = drift(x, u, d0), t1 = drift_truncated(x, u, d0, 1.0);
  CHECK(a == t1);
}

TEST_CASE("drift is control-free on the negative half-space and continuous across it") {
  const auto d = DiffusionSpec::make(1.3, {1, 2}, {0.5, 1.5}, {0.5, 0.5});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-4, 4), P(0, 1);
  for (int k = 0; k < 200; ++k) {
    Vec x{U(rng), U(rng)};
    if (x[0] + x[1] > 0) x[1] = -x[0] - std::fabs(U(rng));
    const double a = P(rng), b = P(rng);
    const Vec b1 = drift(x, ControlVector({a, 1 - a}), d), b2 = drift(x, ControlVector({b, 1 - b}), d);
    CHECK(b1 == b2);
    // boundary point: approaching from the positive side gives the same value
    Vec on{x[0], -x[0]};
    Vec above{x[0], -x[0] + 1e-10};
    const Vec v0 = drift(on, ControlVector({a, 1 - a}), d), v1 = drift(above, ControlVector({a, 1 - a}), d);
    for (int i = 0; i < 2; ++i) CHECK(std::fabs(v0[i] - v1[i]) < 1e-8);
  }
}

TEST_CASE("cone membership") {
  CHECK(cone_membership(Vec{1, -2}, 0.0) == Cone::Minus);
  CHECK(cone_membership(Vec{1, 2}, 1.0) == Cone::Plus);
  CHECK(cone_membership(Vec{3, -1}, 0.5) == Cone::Plus);
  CHECK(cone_membership(Vec{0, 0}, 0.3) == Cone::Both);
  CHECK(cone_membership(Vec{2, -1.5}, 0.5) == Cone::Neither);
  CHECK_THROWS_AS(cone_membership(Vec{1}, 1.5), PreconditionError);
}

TEST_CASE("positive parts on cone boundaries") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-3, 3);
  for (double delta : {0.0, 0.25, 0.5, 1.0}) {
    for (int sign : {+1, -1}) {
      for (int k = 0; k < 200; ++k) {
        // put x on {⟨e,x⟩ = sign·δ‖x‖₁} by solving for the last coordinate, scanning x₃ ≥ 0 or ≤ 0
        Vec x{U(rng), U(rng), 0.0};
        const double s2 = x[0] + x[1], n2 = std::fabs(x[0]) + std::fabs(x[1]);
        // x₃ = t with t·(1 − sign·δ·sgn t) = sign·δ·n2 − s2
        const double rhs = sign * delta * n2 - s2;
        const double denom = rhs >= 0 ? 1.0 - sign * delta : 1.0 + sign * delta;
        if (std::fabs(denom) < 1e-12) continue;
        x[2] = rhs / denom;
        const double n1 = l1_norm(x);
        if (std::fabs(sum(x) - sign * delta * n1) > 1e-9) continue;
        CHECK(pos_part_sum(x) == doctest::Approx((1.0 + sign * delta) / 2.0 * n1).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("scaling map") {
  const auto p = PrelimitParams::from_system(SystemParams::balanced(2, 1.0), 100);
  const std::vector<std::int64_t> x{50, 50};
  const Vec xh = scale_state(x, p);
  CHECK(std::fabs(xh[0]) < 1e-14);
  CHECK(std::fabs(xh[1]) < 1e-14);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> U(0, 300);
  for (int k = 0; k < 1000; ++k) {
    std::vector<std::int64_t> y{U(rng), U(rng)};
    const Vec yh = scale_state(y, p);
    CHECK(unscale_state(yh, p) == y);
    CHECK(sum(yh) == doctest::Approx((static_cast<double>(y[0] + y[1]) - 100.0) / 10.0).epsilon(1e-12));
  }
  const std::vector<std::int64_t> full{60, 40};
  CHECK(std::fabs(sum(scale_state(full, p))) < 1e-13);
}

TEST_CASE("allocation to control") {
  CHECK(!allocation_to_control(Vec{-1, 0.5}, Vec{-1, 0.5}).has_value());
  const auto u = allocation_to_control(Vec{2, 1}, Vec{0, 0});
  REQUIRE(u.has_value());
  CHECK((*u)[0] == doctest::Approx(2.0 / 3.0));
  CHECK((*u)[1] == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(allocation_to_control(Vec{2, 1}, Vec{3, -2}), ControlError);
}

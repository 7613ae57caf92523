#include <doctest.h>

#include <cmath>

#include "hwq/verifier.hpp"

using namespace hwq;

namespace {

SamplerConfig sampler(std::size_t count, std::uint64_t seed = 3) {
  SamplerConfig s;
  s.seed = seed;
  s.count = count;
  return s;
}

}  // namespace

TEST_CASE("lemma21 holds on the single-class example") {
  const auto sys = SystemParams::balanced(1, 1.0);
  const auto d = DiffusionSpec::from_system(sys);
  LyapunovSpec s;
  s.family = Family::ExpLinear;
  s.mu = {1.0};
  s.theta = 0.1;
  s.epsilon = 0.01;
  const auto rep = verify_lemma21(d, s, kInf, Region::full(50.0), sampler(100000));
  CHECK(rep.passed);
  CHECK(rep.violations == 0);
  CHECK(rep.samples >= 100000);
  CHECK(std::isfinite(rep.worst_margin));
}

TEST_CASE("lemma21 branches at the origin") {
  const auto sys = SystemParams::balanced(3, 1.5, 1.0, 0.5);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T21, sys);
  const Vec x0{0, 0, 0};
  const auto f = evaluate(s, x0);
  const Vec b = drift(x0, ControlVector::barycenter(3), d);
  double lhs = 0.0;
  for (std::size_t i = 0; i < 3; ++i) lhs += f.grad[i] * b[i];
  const double eps = s.epsilon, th = s.theta, rho = d.varrho, m = 3.0;
  const double minus = eps * (th * rho + (m / (2 * eps)) * (1 + eps * th));
  const double plus = -eps * (rho / m - th * rho - th * m / 2.0);
  CHECK(minus >= lhs);
  CHECK(plus >= lhs);
}

TEST_CASE("lemma21 without abandonment does not depend on the truncation level") {
  const auto sys = SystemParams::balanced(2, 1.0);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T21, sys);
  const auto region = Region::full(3 * 2 / s.epsilon);
  const auto a = verify_lemma21(d, s, 1.0, region, sampler(20000));
  const auto b = verify_lemma21(d, s, kInf, region, sampler(20000));
  CHECK(a.passed);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.worst_x == b.worst_x);
}

TEST_CASE("lemma21 with abandonment at several truncation levels") {
  const auto sys = SystemParams::balanced(2, 1.0, 1.0, 1.5);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T21, sys);
  for (double c : {1.0, 5.0, kInf}) CHECK(verify_lemma21(d, s, c, Region::full(3 * 2 / s.epsilon), sampler(20000)).passed);
}

TEST_CASE("abandonment cap violation is a precondition error") {
  SystemParams sys;
  sys.m = 2;
  sys.lambda = {0.5, 0.5};
  sys.mu = {1, 1};
  sys.gamma = {3, 3};
  sys.hat_lambda = {-0.5, -0.5};
  sys.hat_mu = {0, 0};
  sys.scv = {1, 1};
  const auto d = DiffusionSpec::from_system(sys);
  LyapunovSpec s;
  s.family = Family::ExpLinear;
  s.mu = sys.mu;
  s.theta = 2.0;
  s.epsilon = 0.01;
  CHECK_THROWS_AS(verify_lemma21(d, s, kInf, Region::full(10), sampler(100)), PreconditionError);
}

TEST_CASE("verification is deterministic on replay") {
  const auto sys = SystemParams::balanced(2, 1.0, 1.0, 0.5);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T21, sys);
  VerifyOptions two;
  two.threads = 2;
  const auto a = verify_lemma21(d, s, kInf, Region::full(100), sampler(10000, 9));
  const auto b = verify_lemma21(d, s, kInf, Region::full(100), sampler(10000, 9), two);
  CHECK(a.csv_row() == b.csv_row());
  CHECK(a.detail() == b.detail());
  const auto c = verify_foster_T21(d, s, Region::full(100), sampler(10000, 9), {}, 0.5);
  const auto e = verify_foster_T21(d, s, Region::full(100), sampler(10000, 9), two, 0.5);
  CHECK(c.csv_row() == e.csv_row());
}

TEST_CASE("stated T21 decay fails deep in the negative cone; the scaled form holds") {
  const auto sys = SystemParams::balanced(2, 1.0, 1.0, 0.5);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T21, sys);
  const double eps = s.epsilon, th = s.theta, rho = d.varrho, m = 2.0;
  double cbar = 0.0;
  for (std::size_t i = 0; i < 2; ++i) cbar += d.lambda_tilde(i) / (d.mu[i] * d.mu[i]);
  // Closed form once every coordinate is below -1/ε: ℒV/V = εθϱ − εθ‖x⁻‖₁ + ε²θ²C̄.
  for (double depth : {2.0, 5.0, 20.0}) {
    const Vec x{-depth / eps, -1.3 * depth / eps};
    const auto g = generator_eval(LyapunovFunction(s), x, ControlVector::barycenter(2), d);
    const double n = neg_part_sum(x);
    CHECK(g.ratio == doctest::Approx(eps * th * rho - eps * th * n + eps * eps * th * th * cbar).epsilon(1e-10));
    const double excess = g.ratio + eps * (rho / (2 * m) + th * n);
    CHECK(excess == doctest::Approx(eps * (th * rho + rho / (2 * m)) + eps * eps * th * th * cbar).epsilon(1e-9));
    CHECK(excess > 0.0);
  }
  const auto region = Region::full(3 * m / eps);
  const auto stated = verify_foster_T21(d, s, region, sampler(20000));
  CHECK(stated.id == "foster_T21");
  CHECK_FALSE(stated.passed);
  const auto scaled = verify_foster_T21(d, s, region, sampler(20000), {}, 0.5);
  CHECK(scaled.id == "foster_T21_scaled");
  CHECK(scaled.passed);
  CHECK(scaled.constants.at("kappa0") >= generator_eval(LyapunovFunction(s), Vec{0, 0}, ControlVector::barycenter(2), d)
                                                .ratio + eps * rho / (2 * m));
  CHECK_THROWS_AS(verify_foster_T21(d, s, region, sampler(10), {}, 1.5), PreconditionError);
}

TEST_CASE("T22 holds without a sign on the spare capacity") {
  for (double spare : {-1.0, 0.0, 1.0}) {
    const auto sys = SystemParams::balanced(2, spare, 1.0, 1.0);
    const auto d = DiffusionSpec::from_system(sys);
    const auto s = select_parameters(Goal::T22, sys);
    const auto rep = verify_foster_T22(d, s, Region::full(3.0 * 2 / s.epsilon), sampler(20000));
    CHECK(rep.passed);
    CHECK(rep.constants.at("decay_coefficient") > 0.0);
    const double at0 = generator_eval(LyapunovFunction(s), Vec{0, 0}, ControlVector::barycenter(2), d).ratio;
    CHECK(rep.constants.at("kappa0") >= at0);
  }
}

TEST_CASE("T22 kappa0 is stable beyond the attainment radius") {
  const auto sys = SystemParams::balanced(2, -1.0, 1.0, 1.0);
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T22, sys);
  const auto est = estimate_kappa0(Goal::T22, d, s, Region::full(3.0 * 2 / s.epsilon), sampler(20000));
  REQUIRE(std::isfinite(est.kappa0));
  CHECK(est.radius <= 0.8 * est.outer);
  const auto wide = estimate_kappa0(Goal::T22, d, s, Region::full(2 * est.outer), sampler(20000));
  CHECK(wide.kappa0 == doctest::Approx(est.kappa0).epsilon(0.01));
  const auto other = estimate_kappa0(Goal::T22, d, s, Region::full(3.0 * 2 / s.epsilon), sampler(20000, 77));
  CHECK(other.kappa0 == doctest::Approx(est.kappa0).epsilon(0.05));
  CHECK_THROWS_AS(estimate_kappa0(Goal::R26, d, s, Region::full(20), sampler(10)), PreconditionError);
}

TEST_CASE("T22 region must reach past the sign change of Psi*") {
  SystemParams sys;
  sys.m = 2;
  sys.mu = {1.8519, 1.04038};
  sys.gamma = {3.7038, 1.08465};
  sys.lambda = {0.5 * 1.8519, 0.5 * 1.04038};
  sys.hat_mu = {0.0, 0.0};
  sys.hat_lambda = {-0.25 * 1.8519, -0.25 * 1.04038};
  sys.scv = {1.0, 1.0};
  const auto d = DiffusionSpec::from_system(sys);
  const auto s = select_parameters(Goal::T22, sys);
  // ψ(εx) < 0 outweighs the negative-part term at moderate depth
  const Vec x{-0.9 / s.epsilon, -0.85 / s.epsilon};
  CHECK(big_psi_star(x, s.epsilon, s.theta, d.mu).value < 0.0);
  CHECK_FALSE(verify_foster_T22(d, s, Region::full(20), sampler(20000)).passed);
  const auto rep = verify_foster_T22(d, s, Region::full(3.0 * 2 / s.epsilon), sampler(20000));
  CHECK(rep.passed);
  CHECK(rep.constants.at("attainment_radius") > 20.0);
}

TEST_CASE("T22 decay coefficient vanishes as abandonment vanishes") {
  CHECK(ParameterRules::theta_bar(0.5, 0.0) == 0.0);
  CHECK(ParameterRules::theta_bar(0.5, 1e-6) == doctest::Approx(1e-12));
}

TEST_CASE("R26 holds for several eta and rejects missing abandonment") {
  const auto sys = SystemParams::balanced(2, 1.0, 1.0, 1.0);
  const auto d = DiffusionSpec::from_system(sys);
  for (double eta : {0.5, 1.0, 2.0}) {
    const auto rep = verify_R26(d, eta, Region::full(20), sampler(20000));
    CHECK(rep.passed);
    CHECK(rep.constants.at("kappa1") > 0.0);
  }
  const auto a = verify_R26(d, 1.0, Region::full(20), sampler(20000));
  const auto b = verify_R26(d, 1.0, Region::full(20), sampler(40000));
  CHECK(b.constants.at("kappa1") == doctest::Approx(a.constants.at("kappa1")).epsilon(0.1));
  CHECK_THROWS_AS(verify_R26(DiffusionSpec::from_system(SystemParams::balanced(2, 1.0)), 1.0, Region::full(20),
                             sampler(10)),
                  PreconditionError);
}

TEST_CASE("negative-part checks") {
  SUBCASE("all classes slow, no abandonment") {
    const auto sys = SystemParams::balanced(2, 1.0);
    const auto d = DiffusionSpec::from_system(sys);
    auto neg = select_parameters(Goal::L22, sys);
    CHECK(neg.class_subset.size() == 2);
    const auto base = select_parameters(Goal::T21, sys);
    for (double eta : {0.5, 1.0, 2.0, 4.0}) {
      neg.eta = eta;
      const auto rep = verify_L22_T23(d, {neg, base}, Region::full(3 * 2 / base.epsilon), sampler(20000));
      CHECK(rep.id == "L22");
      CHECK(rep.passed);
    }
    const auto t = verify_L22_T23(d, {select_parameters(Goal::T23, sys), base}, Region::full(3 * 2 / base.epsilon),
                                  sampler(20000));
    CHECK(t.id == "T23");
    CHECK(t.passed);
    CHECK(t.constants.at("eta_star") > 0.0);
  }
  SUBCASE("no slow classes") {
    const auto sys = SystemParams::balanced(2, 1.0, 1.0, 2.0);
    const auto d = DiffusionSpec::from_system(sys);
    const auto neg = select_parameters(Goal::L22, sys);
    CHECK(neg.class_subset.empty());
    const auto base = select_parameters(Goal::T21, sys);
    const auto rep = verify_L22_T23(d, {neg, base}, Region::full(3 * 2 / base.epsilon), sampler(20000));
    CHECK(rep.passed);
  }
}

TEST_CASE("curvature joints") {
  LyapunovSpec s;
  s.family = Family::ExpLinear;
  s.mu = {1.0};
  s.epsilon = 0.1;
  s.theta = 0.5;
  const auto j = curvature_joints(s);
  CHECK(j.size() == 3);
  CHECK(j[1] == 1.0);
  CHECK(j[2] == doctest::Approx(-10.0));
}

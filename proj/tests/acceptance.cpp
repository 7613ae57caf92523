// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hwq/diffusion.hpp"
#include "hwq/fit.hpp"
#include "hwq/prelimit.hpp"
#include "hwq/queue.hpp"
#include "hwq/sampling.hpp"
#include "hwq/verifier.hpp"

using namespace hwq;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<double> trace;  // numbers the replay check compares bit for bit

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
  void keep(double v) { trace.push_back(v); }
};

std::uint64_t fingerprint(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

void info(const std::string& line) { std::cout << "    " << line << '\n'; }

void keep_report(Outcome& o, const VerificationReport& r) {
  o.keep(static_cast<double>(r.violations));
  o.keep(r.worst_margin);
  for (const auto& [k, v] : r.constants) o.keep(v);
}

// Random system with the given class count, spare capacity and largest abandonment ratio.
SystemParams random_system(std::size_t m, double spare, double beta_max, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Vec rho = dirichlet_point(m, seed);
  SystemParams p;
  p.m = m;
  for (std::size_t i = 0; i < m; ++i) {
    const double mu = 0.5 + 1.5 * U(g);
    const double beta = i == 0 ? beta_max : beta_max * U(g);
    p.mu.push_back(mu);
    p.lambda.push_back(rho[i] * mu);
    p.gamma.push_back(beta * mu);
    p.hat_mu.push_back(0.0);
    p.hat_lambda.push_back(-spare * rho[i] * mu);
    p.scv.push_back(1.0);
  }
  p.validate();
  return p;
}

SamplerConfig sampler(std::size_t count, std::uint64_t seed, const LyapunovSpec& spec) {
  SamplerConfig s;
  s.seed = seed;
  s.count = count;
  s.joints = curvature_joints(spec);
  return s;
}

// ---------------------------------------------------------------- 1

Outcome cutoff_calculus() {
  Outcome o;
  struct Row {
    double t, v, d1, d2;
  };
  // hand-evaluated from the piecewise definition
  const Row rows[] = {{-2.0, -0.5, 0.0, 0.0},
                      {-1.0, -0.5, 0.0, 0.0},
                      {-0.5, 0.125 - 0.03125 - 0.5, 0.5, 1.5},
                      {0.0, 0.0, 1.0, 0.0},
                      {1.0, 1.0, 1.0, 0.0}};
  for (const auto& r : rows) {
    o.require(psi(r.t) == r.v && psi_d1(r.t) == r.d1 && psi_d2(r.t) == r.d2, "mismatch at t=" + num(r.t));
    o.keep(psi(r.t));
  }
  o.require(psi_d1(-0.5) == 0.5, "psi'(-1/2) != 1/2");
  double sup = -kInf;
  const std::size_t n = 100001;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = -2.0 + 3.0 * static_cast<double>(k) / static_cast<double>(n - 1);
    sup = std::max(sup, psi_d2(t));
  }
  o.keep(sup);
  o.require(std::fabs(sup - 1.5) <= 1e-9, "sup psi'' = " + num(sup, 12));
  o.note("sup psi'' = " + num(sup, 12));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome identity_suite() {
  Outcome o;
  const Vec mu{0.5, 1.0, 3.0};
  const double mu_min = 0.5, mu_max = 3.0, slack = 1e-9;
  const double half_m = 1.5;
  std::mt19937_64 g(202);
  std::uniform_real_distribution<double> U(-1.0, 1.0), R(0.0, 100.0);
  std::size_t bad[4] = {0, 0, 0, 0};
  std::size_t printed_form_breaks = 0, checked = 0;
  for (double eps : {0.01, 0.1}) {
    for (double theta : {0.1, 0.5, 1.0}) {
      for (int k = 0; k < 100000; ++k) {
        Vec x{U(g), U(g), U(g)};
        const double scale = R(g) / l1_norm(x);
        for (double& v : x) v *= scale;
        double n1 = 0.0, xp = 0.0, xm = 0.0, s = 0.0, dneg = 0.0, dpos = 0.0;
        for (double v : x) {
          n1 += std::fabs(v);
          xp += std::max(v, 0.0);
          xm += std::max(-v, 0.0);
          s += v;
          dneg += psi_d1(-v) * v;
          dpos += eps * psi_d1(eps * v) * v;
        }
        const double ps = big_psi_star(x, eps, theta, mu).value;
        if (!(ps >= eps * std::min(1.0, theta) / mu_max * n1 - half_m - slack &&
              ps <= eps * std::max(1.0, theta) / mu_min * n1 + slack))
          ++bad[0];
        if (!(dpos >= eps * xp - half_m - slack && -dneg >= xm - half_m - slack)) ++bad[1];
        // left inequality with the sign that makes it true: εΣψ′(−x_i)x_i ≤ ε⟨e,x⟩
        if (!(eps * dneg <= eps * s + slack)) ++bad[2];
        if (!(eps * s <= dpos + slack)) ++bad[3];
        if (-eps * dneg > eps * s + slack) ++printed_form_breaks;
        ++checked;
        if (k % 1000 == 0) o.keep(ps);
      }
    }
  }
  for (int j = 0; j < 4; ++j) o.keep(static_cast<double>(bad[j]));
  o.require(bad[0] == 0, "Psi* two-sided bound: " + std::to_string(bad[0]) + " failures");
  o.require(bad[1] == 0, "derivative lower bounds: " + std::to_string(bad[1]) + " failures");
  o.require(bad[2] == 0 && bad[3] == 0,
            "derivative sandwich: " + std::to_string(bad[2]) + "+" + std::to_string(bad[3]) + " failures");
  o.note(std::to_string(checked) + " states");
  info("sandwich left side with a leading minus fails on " + std::to_string(printed_form_breaks) + " of " +
       std::to_string(checked) + " states; checked with the sign flipped");
  return o;
}

// ---------------------------------------------------------------- 3

Outcome derivative_oracle() {
  Outcome o;
  const Vec mu{1.0, 2.0, 0.5};
  const double h = 1e-5, tol = 1e-5;
  std::mt19937_64 g(303);
  std::uniform_real_distribution<double> U(-8.0, 8.0);
  double worst = 0.0;
  for (Family fam : {Family::ExpLinear, Family::SubGaussian, Family::Power, Family::AbandonExp, Family::NegPartExp,
                     Family::NegPartSubGaussian}) {
    LyapunovSpec s;
    s.family = fam;
    s.mu = mu;
    s.epsilon = 0.3;
    s.theta = 0.7;
    s.eta = 0.6;
    s.p = 2.5;
    s.class_subset = {0, 2};
    double fam_worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const Vec x{U(g), U(g), U(g)};
      const LogDerivatives d = evaluate(s, x);
      const Vec grad = d.gradient(), hess = d.hessian();
      Vec fd_grad(3), fd_hess(9);
      for (std::size_t i = 0; i < 3; ++i) {
        Vec up = x, dn = x;
        up[i] += h;
        dn[i] -= h;
        const LogDerivatives du = evaluate(s, up), dd = evaluate(s, dn);
        fd_grad[i] = (du.value() - dd.value()) / (2.0 * h);
        const Vec gu = du.gradient(), gd = dd.gradient();
        for (std::size_t j = 0; j < 3; ++j) fd_hess[j * 3 + i] = (gu[j] - gd[j]) / (2.0 * h);
      }
      double gscale = 0.0, hscale = 0.0, gerr = 0.0, herr = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        gscale = std::max({gscale, std::fabs(grad[i]), std::fabs(fd_grad[i])});
        gerr = std::max(gerr, std::fabs(grad[i] - fd_grad[i]));
      }
      for (std::size_t i = 0; i < 9; ++i) {
        hscale = std::max({hscale, std::fabs(hess[i]), std::fabs(fd_hess[i])});
        herr = std::max(herr, std::fabs(hess[i] - fd_hess[i]));
      }
      // relative to the largest entry; a zero vector is matched exactly
      const double rel = std::max(gscale > 0 ? gerr / gscale : gerr, hscale > 0 ? herr / hscale : herr);
      fam_worst = std::max(fam_worst, rel);
    }
    o.keep(fam_worst);
    info(std::string(family_name(fam)) + ": worst relative error " + num(fam_worst, 3));
    o.require(fam_worst <= tol, std::string(family_name(fam)) + " error " + num(fam_worst, 3));
    worst = std::max(worst, fam_worst);
  }
  o.note("worst relative error " + num(worst, 3));
  return o;
}

// ---------------------------------------------------------------- 4

Outcome lemma_certification() {
  Outcome o;
  const std::size_t ms[] = {1, 2, 3, 5};
  const double spares[] = {0.5, 1.0, 2.0}, betas[] = {0.0, 0.5, 2.0};
  std::mt19937_64 g(404);
  std::size_t total = 0, violations = 0;
  for (int set = 0; set < 5; ++set) {
    // the first sets walk the grids so every listed value appears at least once
    const std::size_t m = set < 4 ? ms[set] : ms[g() % 4];
    const double spare = set < 3 ? spares[set] : spares[g() % 3];
    const double beta = set < 3 ? betas[(set + 1) % 3] : betas[g() % 3];
    const SystemParams sys = random_system(m, spare, beta, 4000 + static_cast<std::uint64_t>(set));
    const DiffusionSpec d = DiffusionSpec::from_system(sys);
    const LyapunovSpec spec = select_parameters(Goal::T21, sys);
    const Region region = Region::full(3.0 * static_cast<double>(m) / spec.epsilon);
    for (double c : {1.0, 5.0, kInf}) {
      const auto r = verify_lemma21(d, spec, c, region, sampler(100000, 40 + static_cast<std::uint64_t>(set), spec));
      keep_report(o, r);
      total += r.samples;
      violations += r.violations;
      o.require(r.violations == 0, "set " + std::to_string(set) + " c=" + num(c) + ": " +
                                       std::to_string(r.violations) + " violations");
    }
    info("set " + std::to_string(set) + ": m=" + std::to_string(m) + " spare=" + num(spare) + " beta_max=" +
         num(beta) + " eps=" + num(spec.epsilon) + " theta=" + num(spec.theta));
  }
  o.note(std::to_string(total) + " samples, " + std::to_string(violations) + " violations");
  return o;
}

// ---------------------------------------------------------------- 5

Outcome theorem_certification() {
  Outcome o;
  const std::size_t N = 50000;
  auto check = [&](const std::string& label, const VerificationReport& r) {
    keep_report(o, r);
    bool finite = true;
    for (const auto& [k, v] : r.constants) finite = finite && std::isfinite(v);
    const bool ok = r.passed && finite;
    std::string line = label + " " + r.id + ": " + (ok ? "pass" : "FAIL") + ", " + std::to_string(r.violations) +
                       " violations, worst margin " + num(r.worst_margin);
    if (r.constants.count("kappa0")) line += ", kappa0 " + num(r.constants.at("kappa0"));
    if (r.constants.count("attainment_radius")) line += ", attainment radius " + num(r.constants.at("attainment_radius"));
    info(line);
    o.require(ok, label + " " + r.id);
  };

  const std::vector<SystemParams> positive{SystemParams::balanced(2, 1.0, 1.0, 0.5), random_system(3, 0.5, 0.0, 51),
                                           random_system(1, 2.0, 2.0, 52)};
  for (std::size_t k = 0; k < positive.size(); ++k) {
    const auto& sys = positive[k];
    const DiffusionSpec d = DiffusionSpec::from_system(sys);
    const LyapunovSpec base = select_parameters(Goal::T21, sys);
    const Region region = Region::full(3.0 * static_cast<double>(sys.m) / base.epsilon);
    const std::string label = "set " + std::to_string(k);
    check(label, verify_foster_T21(d, base, region, sampler(N, 50 + k, base)));
    const auto scaled = verify_foster_T21(d, base, region, sampler(N, 50 + k, base), {}, 0.5);
    info(label + " " + scaled.id + " (diagnostic, halved negative-part decay): " + (scaled.passed ? "pass" : "FAIL"));
    for (Goal goal : {Goal::L22, Goal::T23}) {
      const SpecPair pair{select_parameters(goal, sys), base};
      SamplerConfig sc = sampler(N, 50 + k, base);
      for (double j : curvature_joints(pair.negpart)) sc.joints.push_back(j);
      check(label, verify_L22_T23(d, pair, region, sc));
    }
  }

  // T22 needs no sign on the spare capacity; the first instance has ϱ < 0.
  const std::vector<SystemParams> abandon{SystemParams::balanced(2, -1.0, 1.0, 1.0), random_system(3, 1.0, 0.5, 53),
                                          random_system(2, 0.5, 2.0, 54)};
  for (std::size_t k = 0; k < abandon.size(); ++k) {
    SystemParams sys = abandon[k];
    // every class abandons
    for (std::size_t i = 0; i < sys.m; ++i)
      if (sys.gamma[i] == 0.0) sys.gamma[i] = 0.25 * sys.mu[i];
    const DiffusionSpec d = DiffusionSpec::from_system(sys);
    const std::string label = "set " + std::to_string(k + 3) + (d.varrho < 0 ? " (negative spare)" : "");
    const LyapunovSpec t22 = select_parameters(Goal::T22, sys);
    check(label, verify_foster_T22(d, t22, Region::full(3.0 * static_cast<double>(sys.m) / t22.epsilon),
                                    sampler(N, 60 + k, t22)));
    const LyapunovSpec r26 = select_parameters(Goal::R26, sys);
    check(label, verify_R26(d, r26.eta, Region::full(20.0), sampler(N, 60 + k, r26)));
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome generator_consistency_slope() {
  Outcome o;
  const SystemParams sys = SystemParams::balanced(2, 1.0, 1.0, 0.5);
  LyapunovSpec spec;
  spec.family = Family::ExpLinear;
  spec.epsilon = 0.3;
  spec.theta = 0.3;
  spec.mu = sys.mu;
  std::mt19937_64 g(606);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  // pairs share the n grid, so the common slope with per-pair intercepts is a fit on centered logs
  Vec cx, cy;
  double worst = -kInf;
  for (int k = 0; k < 20; ++k) {
    const Vec xh{U(g), U(g)};
    const ControlVector u(dirichlet_point(2, 6000 + static_cast<std::uint64_t>(k)));
    Vec ln, le;
    for (std::size_t n : {100u, 1000u, 10000u}) {
      const auto c = generator_consistency(sys, spec, xh, u, n);
      ln.push_back(std::log(static_cast<double>(n)));
      le.push_back(std::log(c.error()));
      o.keep(c.error());
    }
    worst = std::max(worst, fit_line(ln, le).slope);
    const double mx = (ln[0] + ln[1] + ln[2]) / 3.0, my = (le[0] + le[1] + le[2]) / 3.0;
    for (std::size_t j = 0; j < 3; ++j) {
      cx.push_back(ln[j] - mx);
      cy.push_back(le[j] - my);
    }
  }
  const double pooled = fit_line(cx, cy).slope;
  o.keep(pooled);
  info("largest single-pair slope " + num(worst));
  o.require(pooled <= -0.4, "pooled slope " + num(pooled));
  o.note("pooled slope over 20 pairs " + num(pooled));
  return o;
}

// ---------------------------------------------------------------- 7

Outcome idleness_identity() {
  Outcome o;
  // unequal service rates so the control actually moves the total
  const SystemParams sys = random_system(2, 1.0, 0.0, 71);
  const DiffusionSpec d = DiffusionSpec::from_system(sys);
  SimConfig cfg;
  cfg.horizon = 1e5;
  cfg.h = 1e-3;
  cfg.seed = 707;
  cfg.batches = 50;
  const std::vector<std::pair<std::string, ControlPolicy>> controls{
      {"vertex 0", ControlPolicy::constant({1.0, 0.0})},
      {"vertex 1", ControlPolicy::constant({0.0, 1.0})},
      {"barycenter", ControlPolicy::constant({0.5, 0.5})}};
  // independent seeds: with shared noise the estimates coincide almost exactly
  for (const auto& [name, pol] : controls) {
    ++cfg.seed;
    const DiffusionRun run = simulate(d, pol, cfg);
    const IdlenessReport rep = check_idleness_identity(run.measure, d, 0.05);
    o.keep(rep.estimate);
    o.keep(rep.se);
    info("diffusion " + name + ": " + num(rep.estimate) + " +- " + num(rep.se));
    o.require(rep.passed && run.blowups() == 0, "diffusion " + name + " estimate " + num(rep.estimate));
  }
  const PrelimitParams p = PrelimitParams::from_system(sys, 400);
  SimConfig qc;
  qc.horizon = 5000.0;
  qc.seed = 708;
  const std::vector<std::pair<std::string, SchedulingPolicy>> policies{
      {"priority 0>1", SchedulingPolicy::static_priority({0, 1})},
      {"priority 1>0", SchedulingPolicy::static_priority({1, 0})},
      {"longest queue first", SchedulingPolicy::longest_queue_first()}};
  for (const auto& [name, pol] : policies) {
    ++qc.seed;
    const QueueRun run = simulate_ctmc(p, pol, qc);
    const MeanSE neg = run.measure.neg_sum();
    o.keep(neg.mean);
    const double rel = std::fabs(neg.mean - p.varrho_n()) / p.varrho_n();
    info("prelimit n=400 " + name + ": " + num(neg.mean) + " vs " + num(p.varrho_n()));
    o.require(rel <= 0.1, "prelimit " + name + " off by " + num(100 * rel) + "%");
  }
  return o;
}

// ---------------------------------------------------------------- 8

Outcome tail_dichotomy() {
  Outcome o;
  SimConfig cfg;
  cfg.horizon = 1e5;
  cfg.h = 5e-3;
  cfg.thin = 0.5;
  cfg.seed = 808;
  const DiffusionSpec d0 = DiffusionSpec::from_system(SystemParams::balanced(2, 1.0));
  const DiffusionRun r0 = simulate(d0, ControlPolicy::constant({0.5, 0.5}), cfg);
  const TailFit e0 = estimate_tail(r0.measure, TailForm::Exponential, TailDirection::l1());
  o.keep(e0.slope);
  o.keep(e0.r2);
  info("no abandonment, exponential fit: slope " + num(e0.slope) + ", R2 " + num(e0.r2) + " on [" + num(e0.r_lo) +
       ", " + num(e0.r_hi) + "]");
  o.require(e0.slope < 0.0 && e0.r2 >= 0.95, "exponential fit without abandonment");

  const DiffusionSpec d1 = DiffusionSpec::from_system(SystemParams::balanced(2, 1.0, 1.0, 1.0));
  const DiffusionRun r1 = simulate(d1, ControlPolicy::constant({0.5, 0.5}), cfg);
  const TailFit e1 = estimate_tail(r1.measure, TailForm::Exponential, TailDirection::l1());
  const TailFit s1 = estimate_tail(r1.measure, TailForm::SubGaussian, TailDirection::l1());
  o.keep(e1.r2);
  o.keep(s1.r2);
  info("unit abandonment: sub-Gaussian R2 " + num(s1.r2, 6) + ", exponential R2 " + num(e1.r2, 6));
  o.require(s1.r2 > e1.r2, "sub-Gaussian fit does not beat the exponential fit with abandonment");
  return o;
}

// ---------------------------------------------------------------- 9

Outcome transience() {
  Outcome o;
  const SystemParams sys = SystemParams::balanced(2, -1.0);
  const DiffusionSpec d = DiffusionSpec::from_system(sys);
  SimConfig cfg;
  cfg.horizon = 1e4;
  cfg.h = 1e-2;
  cfg.replicas = 32;
  cfg.blowup = 500.0;
  cfg.seed = 909;
  for (const auto& [name, pol] : std::vector<std::pair<std::string, ControlPolicy>>{
           {"barycenter", ControlPolicy::constant({0.5, 0.5})}, {"priority 0>1", ControlPolicy::static_priority({0, 1})}}) {
    ++cfg.seed;
    const DiffusionRun run = simulate(d, pol, cfg);
    double latest = 0.0;
    for (const auto& r : run.replicas) latest = std::max(latest, r.blew_up ? r.blowup_time : kInf);
    o.keep(latest);
    info("diffusion " + name + ": " + std::to_string(run.blowups()) + "/32 blew up, latest at t=" + num(latest));
    o.require(run.blowups() == 32, "diffusion " + name);
  }
  const PrelimitParams p = PrelimitParams::from_system(sys, 100);
  for (const auto& [name, pol] : std::vector<std::pair<std::string, SchedulingPolicy>>{
           {"priority 0>1", SchedulingPolicy::static_priority({0, 1})},
           {"longest queue first", SchedulingPolicy::longest_queue_first()}}) {
    ++cfg.seed;
    const QueueRun run = simulate_ctmc(p, pol, cfg);
    double latest = 0.0;
    for (const auto& r : run.replicas) latest = std::max(latest, r.blew_up ? r.blowup_time : kInf);
    o.keep(latest);
    info("n=100 " + name + ": " + std::to_string(run.blowups()) + "/32 blew up, latest at t=" + num(latest));
    o.require(run.blowups() == 32, "prelimit " + name);
  }
  return o;
}

// ---------------------------------------------------------------- 10

Outcome prelimit_foster() {
  Outcome o;
  const PrelimitParams p = PrelimitParams::from_system(SystemParams::balanced(2, 1.0), 100);
  PrelimitSampling s;
  s.seed = 1010;
  s.states = 10000;
  const LyapunovSpec spec = select_prelimit_parameters(PrelimitMode::C31, p, ArrivalSpec::poisson(), s);
  const VerificationReport r = verify_prelimit_foster(PrelimitMode::C31, p, ArrivalSpec::poisson(), spec, s);
  keep_report(o, r);
  info("eps " + num(spec.epsilon) + ", theta " + num(spec.theta) + ", " + std::to_string(r.samples) +
       " (state, allocation) pairs");
  o.require(r.passed, std::to_string(r.violations) + " violations");
  o.note(std::to_string(r.violations) + " violations, worst margin " + num(r.worst_margin));
  return o;
}

// ---------------------------------------------------------------- 11

Outcome renewal_machinery() {
  Outcome o;
  const SystemParams sys = SystemParams::balanced(2, 1.0);
  const PrelimitParams p = PrelimitParams::from_system(sys, 100);
  const ArrivalSpec arr = ArrivalSpec::renewal({Interarrival::hyperexponential(2.0), Interarrival::hyperexponential(4.0)});

  PrelimitSampling ps;
  ps.seed = 1111;
  ps.states = 1500;
  LyapunovSpec spec = select_prelimit_parameters(PrelimitMode::T31, p, arr, ps);
  spec.epsilon = sandwich_epsilon(p, arr, spec.theta);
  const RenewalLyapunov f = renewal_lyapunov(p, arr, spec);
  std::mt19937_64 g(1112);
  std::uniform_real_distribution<double> X(-40.0, 40.0);
  std::exponential_distribution<double> S(1.0);
  double lo = kInf, hi = -kInf;
  for (int k = 0; k < 10000; ++k) {
    const Vec xh{X(g), X(g)};
    const Vec s{5.0 * S(g) / p.lambda_n()[0], 5.0 * S(g) / p.lambda_n()[1]};
    const double r = f.evaluate(xh, s).ratio;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  o.keep(lo);
  o.keep(hi);
  info("(a) eps at the sandwich bound " + num(spec.epsilon) + ": lifted/base ratio in [" + num(lo, 8) + ", " + num(hi, 8) + "] on 1e4 states");
  o.require(lo >= 0.5 && hi <= 1.5, "(a) sandwich");

  // (b) dζⁿ/dτ − rⁿζⁿ = −λⁿ with the derivative from a fourth-order central difference
  double resid = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const Interarrival law = arr.law(i);
    const double lam = p.lambda_n()[i];
    const double step = 1e-3 / lam;
    for (int k = 1; k <= 200; ++k) {
      const double tau = 0.05 * k / lam;
      const auto z = [&](double t) { return scaled_mrl(law, lam, t); };
      const double dz = (-z(tau + 2 * step) + 8 * z(tau + step) - 8 * z(tau - step) + z(tau - 2 * step)) / (12 * step);
      const double r = (dz - scaled_hazard(law, lam, tau) * z(tau) + lam) / lam;
      resid = std::max(resid, std::fabs(r));
    }
  }
  o.keep(resid);
  info("(b) residual-life identity: largest residual " + num(resid, 3) + " relative to the arrival rate");
  o.require(resid <= 1e-8, "(b) residual " + num(resid, 3));

  // (c)
  const PrelimitParams pc = PrelimitParams::from_system(SystemParams::balanced(2, 1.0, 1.0, 0.5), 25);
  SimConfig cfg;
  cfg.horizon = 4000.0;
  cfg.replicas = 4;
  cfg.seed = 1113;
  const auto pol = SchedulingPolicy::static_priority({0, 1});
  const EmpiricalMeasure a = simulate_ctmc(pc, pol, cfg).measure;
  cfg.seed = 1114;
  const EmpiricalMeasure b =
      simulate_renewal(pc, ArrivalSpec::renewal({Interarrival::exponential(), Interarrival::exponential()}), pol, cfg)
          .measure;
  for (const auto& [name, x, y] : {std::tuple{"idleness", a.neg_sum(), b.neg_sum()}, std::tuple{"l1", a.l1(), b.l1()}}) {
    const double gap = std::fabs(x.mean - y.mean), band = 3.0 * std::hypot(x.se, y.se);
    o.keep(x.mean);
    o.keep(y.mean);
    info(std::string("(c) ") + name + ": Poisson " + num(x.mean) + " +- " + num(x.se) + ", exponential renewal " +
         num(y.mean) + " +- " + num(y.se));
    o.require(gap <= band, std::string("(c) ") + name + " gap " + num(gap) + " > " + num(band));
  }
  return o;
}

// ---------------------------------------------------------------- 12

Outcome mm1_oracle() {
  Outcome o;
  const PrelimitParams p(1, {0.8}, {1.0}, {0.0});
  SimConfig cfg;
  cfg.horizon = 2e6;
  cfg.seed = 1212;
  cfg.batches = 100;
  cfg.histogram = HistogramSpec::uniform(1, -1.5, 10.5, 12);
  const QueueRun run = simulate_ctmc(p, SchedulingPolicy::static_priority({0}), cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k <= 10; ++k) {
    const MeanSE c = run.measure.cell_probability(k);
    const double exact = 0.2 * std::pow(0.8, static_cast<double>(k));
    o.keep(c.mean);
    worst = std::max(worst, std::fabs(c.mean - exact) / c.se);
  }
  o.require(worst <= 3.0, "largest deviation " + num(worst) + " SE");
  o.note("largest deviation " + num(worst) + " SE");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "cutoff calculus", cutoff_calculus},
      {2, "identity suite", identity_suite},
      {3, "derivative oracle", derivative_oracle},
      {4, "drift lemma certification", lemma_certification},
      {5, "Foster-Lyapunov certification", theorem_certification},
      {6, "generator consistency", generator_consistency_slope},
      {7, "idleness identity", idleness_identity},
      {8, "tail dichotomy", tail_dichotomy},
      {9, "transience dichotomy", transience},
      {10, "prelimit Foster-Lyapunov", prelimit_foster},
      {11, "renewal machinery", renewal_machinery},
      {12, "M/M/1 oracle", mm1_oracle},
  };
  bool all = true;
  std::vector<std::uint64_t> prints(criteria.size() + 1);
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    prints[c.id] = fingerprint(o.trace);
    all = all && o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << " [" << num(secs, 3) << " s]" << std::endl;
  }

  Outcome replay;
  for (int id : {4, 9, 12}) {
    const auto& c = criteria[static_cast<std::size_t>(id - 1)];
    const std::uint64_t again = fingerprint(c.run().trace);
    replay.require(again == prints[id], "criterion " + std::to_string(id) + " differs on replay");
    if (again == prints[id]) replay.note("criterion " + std::to_string(id) + " identical");
  }
  all = all && replay.pass;
  std::cout << "criterion 13 (replay): " << (replay.pass ? "PASS" : "FAIL") << " - " << replay.detail << std::endl;
  return all ? 0 : 1;
}

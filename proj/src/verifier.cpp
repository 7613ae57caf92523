#include "hwq/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "hwq/kernels.hpp"
#include "hwq/parallel.hpp"

namespace hwq {

namespace {

enum class Part { Generator, DriftOnly };

using Include = std::function<bool(std::span<const double>)>;
using Decay = std::function<double(std::span<const double>)>;  // NaN: not checked at this x

struct Sweep {
  std::size_t m = 0;
  Vec xs;  // row-major samples
  Vec norm, sum, log_f, ratio;
  std::vector<std::uint32_t> arg;  // 0: sampled control, 1 + i: vertex i
  std::vector<char> used;
  std::size_t pairs = 0;

  std::span<const double> x(std::size_t j) const { return {xs.data() + j * m, m}; }
};

double ratio_for(const LogDerivatives& f, std::span<const double> x, const ControlVector& u, const DiffusionSpec& d,
                 double c, Part part) {
  const Vec b = drift_truncated(x, u, d, c);
  double r = 0.0;
  for (std::size_t i = 0; i < d.m; ++i) {
    r += b[i] * f.grad[i];
    if (part == Part::Generator) r += 0.5 * d.a(i) * f.h(i, i);
  }
  return r;
}

// Max over Δ of the ratio. The ratio is affine in u, so the vertices attain it.
double max_ratio_vertices(const LogDerivatives& f, std::span<const double> x, const DiffusionSpec& d, double c,
                          Part part, std::uint32_t* arg = nullptr) {
  double best = -kInf;
  for (std::size_t i = 0; i < d.m; ++i) {
    const double r = ratio_for(f, x, ControlVector::vertex(d.m, i), d, c, part);
    if (r > best) {
      best = r;
      if (arg) *arg = static_cast<std::uint32_t>(1 + i);
    }
  }
  return best;
}

Sweep run_sweep(const LyapunovFunction& f, const DiffusionSpec& d, double c, Part part, const StateSampler& sampler,
                const Include& include, const VerifyOptions& opts) {
  const std::size_t m = d.m;
  const std::size_t N = sampler.count();
  Sweep sw;
  sw.m = m;
  sw.xs.resize(N * m);
  sw.norm.resize(N);
  sw.sum.resize(N);
  sw.log_f.resize(N);
  sw.ratio.resize(N);
  sw.arg.resize(N);
  sw.used.resize(N);
  const std::size_t B = std::max<std::size_t>(1, opts.chunk);
  const std::size_t chunks = (N + B - 1) / B;
  std::vector<std::size_t> pairs(chunks, 0);
  const auto& terms = f.terms();

  parallel_for(chunks, opts.threads, [&](std::size_t ci) {
    const std::size_t j0 = ci * B, j1 = std::min(N, j0 + B), nb = j1 - j0;
    Vec X(m * nb);
    for (std::size_t k = 0; k < nb; ++k) {
      const Vec x = sampler.state(j0 + k);
      std::copy(x.begin(), x.end(), sw.xs.begin() + static_cast<std::ptrdiff_t>((j0 + k) * m));
      for (std::size_t i = 0; i < m; ++i) X[i * nb + k] = x[i];
    }
    const std::size_t T = terms.size();
    std::vector<Vec> nv(T), n1(T), n2(T), pv(T), p1(T), p2(T);
    for (std::size_t t = 0; t < T; ++t) {
      nv[t].resize(m * nb), n1[t].resize(m * nb), n2[t].resize(m * nb);
      kernels::cutoff_batch(X.data(), m * nb, -terms[t].neg_scale(), nv[t].data(), n1[t].data(), n2[t].data());
      if (terms[t].uses_pos()) {
        pv[t].resize(m * nb), p1[t].resize(m * nb), p2[t].resize(m * nb);
        kernels::cutoff_batch(X.data(), m * nb, terms[t].pos_scale(), pv[t].data(), p1[t].data(), p2[t].data());
      }
    }
    std::vector<CutoffValue> neg(m), pos(m);
    std::vector<LogDerivatives> parts(T);
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t j = j0 + k;
      const std::span<const double> x = sw.x(j);
      sw.norm[j] = l1_norm(x);
      sw.sum[j] = hwq::sum(x);
      if (include && !include(x)) continue;
      sw.used[j] = 1;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < m; ++i) {
          neg[i] = {nv[t][i * nb + k], n1[t][i * nb + k], n2[t][i * nb + k]};
          if (terms[t].uses_pos()) pos[i] = {pv[t][i * nb + k], p1[t][i * nb + k], p2[t][i * nb + k]};
        }
        parts[t] = evaluate_from_cutoffs(terms[t], x, neg, pos);
      }
      const LogDerivatives ld = f.combine(parts);
      sw.log_f[j] = ld.log_value;
      std::uint32_t arg = 0;
      double best = ratio_for(ld, x, sampler.control(j), d, c, part);
      const double vmax = max_ratio_vertices(ld, x, d, c, part, &arg);
      if (vmax > best) {
        best = vmax;
      } else {
        arg = 0;
      }
      sw.ratio[j] = best;
      sw.arg[j] = arg;
      pairs[ci] += m + 1;
    }
  });
  for (std::size_t p : pairs) sw.pairs += p;
  return sw;
}

Vec control_of(const Sweep& sw, const StateSampler& sampler, std::size_t j) {
  if (sw.arg[j] == 0) return sampler.control(j).values();
  return ControlVector::vertex(sw.m, sw.arg[j] - 1).values();
}

struct PointValue {
  double log_f;
  double ratio;
};

PointValue point_value(const LyapunovFunction& f, std::span<const double> x, const DiffusionSpec& d, double c,
                       Part part) {
  const LogDerivatives ld = f.evaluate(x);
  return {ld.log_value, max_ratio_vertices(ld, x, d, c, part)};
}

double kappa_value(double r, double log_f) {
  if (r > 0.0) return std::exp(std::log(r) + log_f);
  return r * std::exp(log_f);
}

struct FosterOutcome {
  double kappa0 = -kInf;
  double radius = 0.0;
  double outer = 0.0;
  std::size_t checked = 0;
  std::size_t shell_samples = 0;
  std::size_t violations = 0;
  double worst_margin = kInf;
  Vec worst_x, worst_u, argmax;
  bool ok = false;
};

FosterOutcome foster_fit(const Sweep& sw, const StateSampler& sampler, const Decay& decay, const LyapunovFunction& f,
                         const DiffusionSpec& d, double c, const VerifyOptions& opts) {
  FosterOutcome out;
  const Region& region = sampler.region();
  out.outer = region.outer();
  const double boundary = (1.0 - opts.shell_fraction) * out.outer;
  std::vector<std::pair<double, std::size_t>> top;
  for (std::size_t j = 0; j < sw.norm.size(); ++j) {
    if (!sw.used[j]) continue;
    const double dec = decay(sw.x(j));
    if (std::isnan(dec)) continue;
    ++out.checked;
    const double r = sw.ratio[j] + dec;
    if (r >= 0.0) out.radius = std::max(out.radius, sw.norm[j]);
    const double kv = kappa_value(r, sw.log_f[j]);
    if (kv > out.kappa0) {
      out.kappa0 = kv;
      out.argmax.assign(sw.x(j).begin(), sw.x(j).end());
    }
    if (r > 0.0) top.emplace_back(std::log(r) + sw.log_f[j], j);
    if (sw.norm[j] > boundary) {
      ++out.shell_samples;
      const double margin = -r;
      if (margin < -slack_for(dec)) ++out.violations;
      if (margin < out.worst_margin) {
        out.worst_margin = margin;
        out.worst_x.assign(sw.x(j).begin(), sw.x(j).end());
        out.worst_u = control_of(sw, sampler, j);
      }
    }
  }
  const std::size_t k = std::min(opts.polish_starts, top.size());
  std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  auto objective = [&](const Vec& x) {
    const double dec = decay(x);
    if (std::isnan(dec)) return -kInf;
    const PointValue pv = point_value(f, x, d, c, Part::Generator);
    return kappa_value(pv.ratio + dec, pv.log_f);
  };
  for (std::size_t s = 0; s < k; ++s) {
    const auto x0 = sw.x(top[s].second);
    const PolishResult pr = polish_max(objective, Vec(x0.begin(), x0.end()), region, 0.05 * std::max(1.0, l1_norm(x0)));
    if (pr.value > out.kappa0) {
      out.kappa0 = pr.value;
      out.argmax = pr.x;
    }
    if (pr.value >= 0.0) out.radius = std::max(out.radius, l1_norm(pr.x));
  }
  out.ok = std::isfinite(out.kappa0) && out.radius <= boundary && out.violations == 0;
  return out;
}

// Half the smallest observed decay slope -ratio/‖x‖ over the outer half of the region.
double fit_kappa1(const Sweep& sw, const StateSampler& sampler, const Include& branch, const LyapunovFunction& f,
                  const DiffusionSpec& d, double c, const VerifyOptions& opts) {
  const Region& region = sampler.region();
  const double start = 0.5 * region.outer();
  double worst = -kInf;  // max of ratio/‖x‖
  std::vector<std::pair<double, std::size_t>> top;
  for (std::size_t j = 0; j < sw.norm.size(); ++j) {
    if (!sw.used[j] || sw.norm[j] < start || !branch(sw.x(j))) continue;
    const double q = sw.ratio[j] / sw.norm[j];
    worst = std::max(worst, q);
    top.emplace_back(q, j);
  }
  if (top.empty()) return -kInf;
  const std::size_t k = std::min(opts.polish_starts, top.size());
  std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  auto objective = [&](const Vec& x) {
    const double n1 = l1_norm(x);
    if (n1 < start || !branch(x)) return -kInf;
    return point_value(f, x, d, c, Part::Generator).ratio / n1;
  };
  for (std::size_t s = 0; s < k; ++s) {
    const auto x0 = sw.x(top[s].second);
    worst = std::max(worst, polish_max(objective, Vec(x0.begin(), x0.end()), region, 0.02 * l1_norm(x0)).value);
  }
  return -0.5 * worst;
}

StateSampler make_sampler(std::size_t m, const Region& region, SamplerConfig cfg, const LyapunovFunction& f) {
  if (cfg.joints.empty())
    for (const auto& t : f.terms())
      for (double j : curvature_joints(t)) cfg.joints.push_back(j);
  return StateSampler(m, region, std::move(cfg));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

double beta_max_of(const DiffusionSpec& d) {
  double b = 0.0;
  for (std::size_t i = 0; i < d.m; ++i) b = std::max(b, d.gamma[i] / d.mu[i]);
  return b;
}

double beta_min_of(const DiffusionSpec& d) {
  double b = kInf;
  for (std::size_t i = 0; i < d.m; ++i) b = std::min(b, d.gamma[i] / d.mu[i]);
  return b;
}

double mu_max_of(const DiffusionSpec& d) { return *std::max_element(d.mu.begin(), d.mu.end()); }

void fill_from(VerificationReport& rep, const FosterOutcome& o, std::size_t pairs) {
  rep.samples = pairs;
  rep.violations = o.violations;
  rep.worst_margin = o.worst_margin;
  rep.worst_x = o.worst_x;
  rep.worst_u = o.worst_u;
  rep.constants["kappa0"] = o.kappa0;
  rep.constants["attainment_radius"] = o.radius;
  rep.constants["sampling_radius"] = o.outer;
  rep.passed = o.ok;
}

// Foster fit with automatic doubling of the sampling radius while decay is not yet visible.
template <class MakeDecay>
std::pair<FosterOutcome, std::size_t> foster_with_expansion(const LyapunovFunction& f, const DiffusionSpec& d,
                                                            double c, const Region& region,
                                                            const SamplerConfig& scfg, const Include& include,
                                                            MakeDecay make_decay, const VerifyOptions& opts) {
  Region reg = region;
  FosterOutcome out;
  std::size_t pairs = 0;
  for (int attempt = 0;; ++attempt) {
    const StateSampler sampler = make_sampler(d.m, reg, scfg, f);
    const Sweep sw = run_sweep(f, d, c, Part::Generator, sampler, include, opts);
    pairs += sw.pairs;
    const Decay decay = make_decay(sw, sampler);
    if (decay) {
      out = foster_fit(sw, sampler, decay, f, d, c, opts);
      if (out.ok || attempt >= opts.max_expansions) return {out, pairs};
    } else if (attempt >= opts.max_expansions) {
      out.outer = reg.outer();
      return {out, pairs};
    }
    reg = reg.with_outer(2.0 * reg.outer());
  }
}

}  // namespace

std::vector<double> curvature_joints(const LyapunovSpec& spec) {
  std::vector<double> j;
  const double a = spec.neg_scale();
  j.push_back(0.0);
  j.push_back(1.0 / a);
  if (spec.uses_pos()) j.push_back(-1.0 / spec.pos_scale());
  return j;
}

std::string VerificationReport::csv_header() {
  return "id,seed,samples,violations,worst_margin,passed,constants";
}

std::string VerificationReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << id << ',' << seed << ',' << samples << ',' << violations << ',' << worst_margin << ','
     << (passed ? "true" : "false") << ',';
  bool first = true;
  for (const auto& [k, v] : constants) {
    os << (first ? "" : ";") << k << '=' << v;
    first = false;
  }
  return os.str();
}

std::string VerificationReport::detail() const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["seed"] = seed;
  j["samples"] = samples;
  j["violations"] = violations;
  j["worst_margin"] = std::isfinite(worst_margin) ? nlohmann::ordered_json(worst_margin) : nlohmann::ordered_json();
  j["worst_x"] = worst_x;
  j["worst_u"] = worst_u;
  nlohmann::ordered_json cj = nlohmann::ordered_json::object();
  for (const auto& [k, v] : constants) cj[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
  j["constants"] = cj;
  j["passed"] = passed;
  j["note"] = note;
  return j.dump(2);
}

VerificationReport verify_lemma21(const DiffusionSpec& d, const LyapunovSpec& spec, double c, const Region& region,
                                  const SamplerConfig& scfg, const VerifyOptions& opts) {
  d.validate();
  spec.validate();
  require(spec.family == Family::ExpLinear, "lemma21: needs the exp-linear family");
  require(d.varrho > 0.0, "lemma21: spare capacity must be positive");
  require(c >= 1.0, "lemma21: truncation level must be at least 1");
  require(spec.theta * std::max(beta_max_of(d) - 1.0, 0.0) <= 1.0 + 1e-12,
          "lemma21: theta violates the abandonment cap theta*(beta_max-1)^+ <= 1");
  const LyapunovFunction f(spec);
  const StateSampler sampler = make_sampler(d.m, region, scfg, f);
  const Sweep sw = run_sweep(f, d, c, Part::DriftOnly, sampler, nullptr, opts);

  const double eps = spec.epsilon, th = spec.theta, rho = d.varrho, md = static_cast<double>(d.m);
  VerificationReport rep;
  rep.id = "lemma21";
  rep.seed = scfg.seed;
  rep.samples = sw.pairs;
  for (std::size_t j = 0; j < sw.norm.size(); ++j) {
    const auto x = sw.x(j);
    double margin = kInf, rhs_used = 0.0;
    if (sw.sum[j] <= 0.0) {
      const double rhs = eps * (th * rho + (md / (2.0 * eps)) * (1.0 + eps * th) - std::min(th, 1.0) * sw.norm[j]);
      if (rhs - sw.ratio[j] < margin) margin = rhs - sw.ratio[j], rhs_used = rhs;
    }
    if (sw.sum[j] >= 0.0) {
      const double rhs = -eps * (rho / md - th * rho - th * md / 2.0 + th * neg_part_sum(x));
      if (rhs - sw.ratio[j] < margin) margin = rhs - sw.ratio[j], rhs_used = rhs;
    }
    if (margin < -slack_for(rhs_used)) ++rep.violations;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_x.assign(x.begin(), x.end());
      rep.worst_u = control_of(sw, sampler, j);
    }
  }
  rep.constants["epsilon"] = eps;
  rep.constants["theta"] = th;
  rep.constants["c"] = c;
  rep.constants["sampling_radius"] = region.outer();
  rep.passed = rep.violations == 0;
  rep.note = "margins in units of V";
  return rep;
}

VerificationReport verify_foster_T21(const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                                     const SamplerConfig& scfg, const VerifyOptions& opts, double neg_scale) {
  d.validate();
  spec.validate();
  require(spec.family == Family::ExpLinear, "T2.1: needs the exp-linear family");
  require(neg_scale > 0.0 && neg_scale <= 1.0, "T2.1: negative-part scale must lie in (0, 1]");
  require(d.varrho > 0.0, "T2.1: spare capacity must be positive");
  const double eps = spec.epsilon, th = spec.theta, base = d.varrho / (2.0 * static_cast<double>(d.m));
  const LyapunovFunction f(spec);
  auto [o, pairs] = foster_with_expansion(
      f, d, kInf, region, scfg, nullptr,
      [&](const Sweep&, const StateSampler&) -> Decay {
        return [=](std::span<const double> x) { return eps * (base + neg_scale * th * neg_part_sum(x)); };
      },
      opts);
  VerificationReport rep;
  rep.id = neg_scale == 1.0 ? "foster_T21" : "foster_T21_scaled";
  rep.seed = scfg.seed;
  fill_from(rep, o, pairs);
  rep.constants["epsilon"] = eps;
  rep.constants["theta"] = th;
  rep.constants["neg_scale"] = neg_scale;
  return rep;
}

VerificationReport verify_foster_T22(const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                                     const SamplerConfig& scfg, const VerifyOptions& opts) {
  d.validate();
  spec.validate();
  require(spec.family == Family::SubGaussian, "T2.2: needs the sub-Gaussian family");
  const double bmin = beta_min_of(d);
  require(bmin > 0.0, "T2.2: every abandonment rate must be positive");
  const double eps = spec.epsilon, th = spec.theta;
  const double coef = eps * eps * ParameterRules::theta_bar(th, bmin) * std::min(1.0, th) / (2.0 * mu_max_of(d));
  const LyapunovFunction f(spec);
  auto [o, pairs] = foster_with_expansion(
      f, d, kInf, region, scfg, nullptr,
      [&](const Sweep&, const StateSampler&) -> Decay {
        return [=](std::span<const double> x) {
          const double n1 = l1_norm(x);
          return coef * n1 * n1;
        };
      },
      opts);
  VerificationReport rep;
  rep.id = "foster_T22";
  rep.seed = scfg.seed;
  fill_from(rep, o, pairs);
  rep.constants["epsilon"] = eps;
  rep.constants["theta"] = th;
  rep.constants["decay_coefficient"] = coef;
  return rep;
}

VerificationReport verify_R26(const DiffusionSpec& d, double eta, const Region& region, const SamplerConfig& scfg,
                              const VerifyOptions& opts) {
  d.validate();
  const double bmin = beta_min_of(d);
  require(bmin > 0.0, "R2.6: every abandonment rate must be positive");
  require(eta > 0.0, "R2.6: eta must be positive");
  LyapunovSpec spec;
  spec.family = Family::AbandonExp;
  spec.eta = eta;
  spec.theta = ParameterRules::theta_subgauss(bmin, beta_max_of(d));
  spec.mu = d.mu;
  const LyapunovFunction f(spec);
  const Include plus = [](std::span<const double> x) { return hwq::sum(x) >= 0.0; };
  double kappa1 = -kInf;
  auto [o, pairs] = foster_with_expansion(
      f, d, kInf, region, scfg, plus,
      [&](const Sweep& sw, const StateSampler& s) -> Decay {
        kappa1 = fit_kappa1(sw, s, plus, f, d, kInf, opts);
        if (!(kappa1 > 0.0)) return nullptr;
        const double k1 = kappa1;
        return [k1](std::span<const double> x) { return hwq::sum(x) >= 0.0 ? k1 * l1_norm(x) : std::nan(""); };
      },
      opts);
  VerificationReport rep;
  rep.id = "R26";
  rep.seed = scfg.seed;
  fill_from(rep, o, pairs);
  rep.constants["eta"] = eta;
  rep.constants["theta"] = spec.theta;
  rep.constants["kappa1"] = kappa1;
  rep.passed = rep.passed && kappa1 > 0.0;
  return rep;
}

VerificationReport verify_L22_T23(const DiffusionSpec& d, const SpecPair& pair, const Region& region,
                                  const SamplerConfig& scfg, const VerifyOptions& opts, int eta_steps) {
  d.validate();
  pair.base.validate();
  pair.negpart.validate();
  require(d.varrho > 0.0, "L2.2/T2.3: spare capacity must be positive");
  require(pair.base.family == Family::ExpLinear, "L2.2/T2.3: base must be the exp-linear family");
  const double eps = pair.base.epsilon, md = static_cast<double>(d.m);
  const double c_plus = eps * d.varrho / (8.0 * md);
  VerificationReport rep;
  rep.seed = scfg.seed;

  if (pair.negpart.family == Family::NegPartExp) {
    rep.id = "L22";
    const LyapunovFunction f = LyapunovFunction::sum(pair.negpart, pair.base);
    const Include minus = [](std::span<const double> x) { return hwq::sum(x) <= 0.0; };
    double kappa1 = -kInf;
    auto [o, pairs] = foster_with_expansion(
        f, d, kInf, region, scfg, nullptr,
        [&](const Sweep& sw, const StateSampler& s) -> Decay {
          kappa1 = fit_kappa1(sw, s, minus, f, d, kInf, opts);
          if (!(kappa1 > 0.0)) return nullptr;
          const double k1 = kappa1;
          return [k1, c_plus](std::span<const double> x) {
            const double sm = hwq::sum(x);
            if (sm > 0.0) return c_plus;
            if (sm < 0.0) return k1 * l1_norm(x);
            return std::max(c_plus, k1 * l1_norm(x));
          };
        },
        opts);
    fill_from(rep, o, pairs);
    rep.constants["kappa1"] = kappa1;
    rep.constants["plus_decay"] = c_plus;
    rep.constants["eta"] = pair.negpart.eta;
    rep.passed = rep.passed && kappa1 > 0.0;
    return rep;
  }

  require(pair.negpart.family == Family::NegPartSubGaussian, "L2.2/T2.3: unsupported negative-part family");
  rep.id = "T23";
  LyapunovSpec neg = pair.negpart;
  std::size_t total_pairs = 0;
  for (int step = 0; step < eta_steps; ++step, neg.eta *= 0.5) {
    const LyapunovFunction f = LyapunovFunction::product(neg, pair.base);
    auto [o, pairs] = foster_with_expansion(
        f, d, kInf, region, scfg, nullptr,
        [&](const Sweep&, const StateSampler&) -> Decay { return [c_plus](std::span<const double>) { return c_plus; }; },
        opts);
    total_pairs += pairs;
    fill_from(rep, o, total_pairs);
    rep.constants["eta_tried"] = neg.eta;
    if (o.ok) {
      rep.constants["eta_star"] = neg.eta;
      rep.constants["c0"] = o.kappa0;
      rep.constants["c1"] = c_plus;
      return rep;
    }
  }
  rep.passed = false;
  rep.note = "no grid eta showed decay on the sample; this does not refute existence";
  return rep;
}

Kappa0Estimate estimate_kappa0(Goal goal, const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                               const SamplerConfig& scfg, const VerifyOptions& opts) {
  VerificationReport rep;
  if (goal == Goal::T21)
    rep = verify_foster_T21(d, spec, region, scfg, opts);
  else if (goal == Goal::T22)
    rep = verify_foster_T22(d, spec, region, scfg, opts);
  else
    throw PreconditionError("estimate_kappa0: goal must be T2.1 or T2.2");
  Kappa0Estimate e;
  e.kappa0 = rep.constants.at("kappa0");
  e.radius = rep.constants.at("attainment_radius");
  e.outer = rep.constants.at("sampling_radius");
  e.samples = rep.samples;
  return e;
}

}  // namespace hwq

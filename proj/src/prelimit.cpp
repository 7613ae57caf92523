#include "hwq/prelimit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/lambert_w.hpp>

#include "hwq/parallel.hpp"
#include "hwq/rng.hpp"

namespace hwq {

double PrelimitGeneratorValue::linear() const {
  if (ratio == 0.0) return 0.0;
  return (ratio > 0.0 ? 1.0 : -1.0) * std::exp(std::log(std::fabs(ratio)) + log_scale);
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

// log V̂ⁿ at lattice points
struct LatticeLog {
  const LyapunovFunction& f;
  const PrelimitParams& p;
  double operator()(std::span<const std::int64_t> x) const { return f.evaluate(scale_state(x, p)).log_value; }
};

// log V̂ⁿ at x and at x ± e_i (NaN where x − e_i leaves ℤ₊ᵐ)
struct Neighbors {
  double L0 = 0.0;
  Vec up, down;
};

Neighbors neighbors(const LatticeLog& L, std::span<const std::int64_t> x) {
  const std::size_t m = x.size();
  Neighbors nb;
  IVec y(x.begin(), x.end());
  nb.L0 = L(y);
  nb.up.resize(m);
  nb.down.assign(m, std::nan(""));
  for (std::size_t i = 0; i < m; ++i) {
    ++y[i];
    nb.up[i] = L(y);
    y[i] -= 2;
    if (y[i] >= 0) nb.down[i] = L(y);
    ++y[i];
  }
  return nb;
}

double poisson_ratio(const Neighbors& nb, std::span<const std::int64_t> x, std::span<const std::int64_t> z,
                     const PrelimitParams& p) {
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r += p.lambda_n()[i] * std::expm1(nb.up[i] - nb.L0);
    const double dep = p.mu_n()[i] * static_cast<double>(z[i]) + p.gamma_n()[i] * static_cast<double>(x[i] - z[i]);
    if (dep > 0.0) r += dep * std::expm1(nb.down[i] - nb.L0);
  }
  return r;
}

void check_allocation(std::span<const std::int64_t> x, std::span<const std::int64_t> z, const PrelimitParams& p) {
  if (x.size() != p.m()) throw PreconditionError("generator: state dimension mismatch");
  for (std::int64_t v : x) require(v >= 0, "generator: negative lattice state");
  if (!is_work_conserving(x, z, static_cast<std::int64_t>(p.n())))
    throw PreconditionError("generator: allocation is not in the work-conserving set");
}

// Lifted function relative to V at the base state: g(y, s)/V(x̂(x)).
struct Lifted {
  const LatticeLog& L;
  const std::vector<Interarrival>& laws;
  const PrelimitParams& p;
  double rel(const IVec& y, std::span<const double> s, double L0) const {
    const double Ly = L(y);
    double acc = 1.0;
    IVec w = y;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double zeta = scaled_mrl(laws[i], p.lambda_n()[i], s[i]);
      if (zeta == 1.0) continue;
      ++w[i];
      acc += (1.0 - zeta) * std::expm1(L(w) - Ly);
      --w[i];
    }
    return std::exp(Ly - L0) * acc;
  }
};

std::vector<Interarrival> laws_of(const ArrivalSpec& arr, std::size_t m) {
  std::vector<Interarrival> laws;
  for (std::size_t i = 0; i < m; ++i) laws.push_back(arr.law(i));
  return laws;
}

}  // namespace

PrelimitGeneratorValue prelimit_generator(const LyapunovFunction& f, std::span<const std::int64_t> x,
                                          std::span<const std::int64_t> z, const PrelimitParams& p) {
  check_allocation(x, z, p);
  const LatticeLog L{f, p};
  const Neighbors nb = neighbors(L, x);
  return {poisson_ratio(nb, x, z, p), nb.L0};
}

RenewalLyapunov::RenewalLyapunov(PrelimitParams p, ArrivalSpec arr, LyapunovFunction base)
    : p_(std::move(p)), arr_(std::move(arr)), base_(std::move(base)) {
  arr_.validate(p_.m());
}

RenewalLyapunov::Value RenewalLyapunov::evaluate(std::span<const double> xhat, std::span<const double> s) const {
  const std::size_t m = p_.m();
  if (xhat.size() != m || s.size() != m) throw PreconditionError("renewal lyapunov: dimension mismatch");
  Value v;
  v.log_base = base_.evaluate(xhat).log_value;
  const double step = 1.0 / p_.sqrt_n();
  Vec y(xhat.begin(), xhat.end());
  for (std::size_t i = 0; i < m; ++i) {
    const double zeta = scaled_mrl(arr_.law(i), p_.lambda_n()[i], s[i]);
    if (zeta == 1.0) continue;
    y[i] += step;
    v.ratio += (1.0 - zeta) * std::expm1(base_.evaluate(y).log_value - v.log_base);
    y[i] = xhat[i];
  }
  return v;
}

double RenewalLyapunov::value(std::span<const double> xhat, std::span<const double> s) const {
  const Value v = evaluate(xhat, s);
  return v.ratio * std::exp(v.log_base);
}

double sandwich_epsilon(const PrelimitParams& p, const ArrivalSpec& arr, double theta) {
  double Z = 1.0;
  for (std::size_t i = 0; i < p.m(); ++i) {
    const Interarrival law = arr.law(i);
    if (!law.bounded_mrl()) throw PreconditionError("sandwich: " + law.name() + " has unbounded mean residual life");
    Z = std::max(Z, law.mrl_sup() - 1.0);
  }
  double inv_mu = 0.0;
  for (double v : p.mu_n()) inv_mu += 1.0 / v;
  const double A = boost::math::lambert_w0(1.0 / (2.0 * Z));  // A·e^A = 1/(2Z)
  return A / ((1.0 + theta) * inv_mu);
}

RenewalLyapunov renewal_lyapunov(const PrelimitParams& p, const ArrivalSpec& arr, const LyapunovSpec& spec) {
  spec.validate();
  require(spec.family == Family::ExpLinear, "renewal lyapunov: base function must be ExpLinear");
  require(spec.m() == p.m(), "renewal lyapunov: dimension mismatch");
  const double cap = sandwich_epsilon(p, arr, spec.theta);
  if (spec.epsilon > cap) {
    std::ostringstream os;
    os << "renewal lyapunov: epsilon " << spec.epsilon << " exceeds the sandwich bound " << cap;
    throw PreconditionError(os.str());
  }
  return RenewalLyapunov(p, arr, LyapunovFunction(spec));
}

PrelimitGeneratorValue prelimit_generator(const RenewalLyapunov& f, std::span<const std::int64_t> x,
                                          std::span<const double> s, std::span<const std::int64_t> z) {
  const PrelimitParams& p = f.params();
  check_allocation(x, z, p);
  const std::size_t m = p.m();
  require(s.size() == m, "generator: age dimension mismatch");
  const LatticeLog L{f.base(), p};
  const std::vector<Interarrival> laws = laws_of(f.arrivals(), m);
  const Lifted g{L, laws, p};
  IVec y(x.begin(), x.end());
  const double L0 = L(y);
  const double g0 = g.rel(y, s, L0);
  double r = 0.0;
  Vec s_reset(s.begin(), s.end());
  for (std::size_t i = 0; i < m; ++i) {
    const double lam = p.lambda_n()[i];
    const double tau = lam * s[i];
    ++y[i];
    const double up = std::expm1(L(y) - L0);
    // age drift: ∂/∂s_i acts on ζⁿ_i only
    r -= lam * laws[i].mrl_derivative(tau) * up;
    s_reset[i] = 0.0;
    r += lam * laws[i].hazard(tau) * (g.rel(y, s_reset, L0) - g0);
    s_reset[i] = s[i];
    y[i] -= 2;
    const double dep = p.mu_n()[i] * static_cast<double>(z[i]) + p.gamma_n()[i] * static_cast<double>(x[i] - z[i]);
    if (dep > 0.0) r += dep * (g.rel(y, s, L0) - g0);
    ++y[i];
  }
  return {r, L0};
}

std::map<std::string, double> PrelimitConstants::as_map() const {
  std::map<std::string, double> c{{"C1_hat", C1_hat},     {"C0_hat", C0_hat}, {"C0_tilde", C0_tilde},
                                  {"C1_tilde", C1_tilde}, {"C2_hat", C2_hat}, {"C3_hat", C3_hat},
                                  {"theta0", theta0},     {"eps_tilde0", eps_tilde0}};
  for (std::size_t i = 0; i < vartheta.size(); ++i) c["vartheta_" + std::to_string(i + 1)] = vartheta[i];
  return c;
}

std::vector<IVec> sample_lattice_states(const PrelimitParams& p, double radius, std::size_t count,
                                        std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.count = count;
  const StateSampler sampler(p.m(), Region::full(radius), cfg);
  std::vector<IVec> out(count);
  for (std::size_t j = 0; j < count; ++j) out[j] = unscale_state(sampler.state(j), p);
  return out;
}

namespace {

double c1_normalizer(const LyapunovSpec& spec) {
  switch (spec.family) {
    case Family::ExpLinear: return spec.epsilon * (spec.epsilon + spec.theta);
    case Family::AbandonExp: return spec.eta * (1.0 + spec.theta);
    default: throw PreconditionError("prelimit constants: family must be ExpLinear or AbandonExp");
  }
}

double c1_at(const LatticeLog& L, const IVec& x, double n, double norm) {
  const std::size_t m = x.size();
  const double L0 = L(x);
  const LogDerivatives d0 = L.f.evaluate(scale_state(x, L.p));
  const double sq = L.p.sqrt_n();
  double best = 0.0;
  IVec y = x;
  // 𝔡V̂(y; σe_i)/V̂(x)
  auto diff = [&](IVec& pt, std::size_t i, int sigma) {
    const double Ly = L(pt);
    pt[i] += sigma;
    if (pt[i] < 0) {
      pt[i] -= sigma;
      return std::nan("");
    }
    const double Le = L(pt);
    pt[i] -= sigma;
    return std::exp(Ly - L0) * std::expm1(Le - Ly);
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (int si : {+1, -1}) {
      const double base = diff(y, i, si);
      if (std::isnan(base)) continue;
      for (std::size_t j = 0; j < m; ++j)
        for (int sj : {+1, -1}) {
          y[j] += sj;
          if (y[j] >= 0) {
            const double moved = diff(y, i, si);
            if (!std::isnan(moved)) best = std::max(best, n * std::fabs(moved - base) / norm);
          }
          y[j] -= sj;
        }
      // first-order remainder V̂(x ± e_i) − V̂(x) ∓ ∂_iV̂(x)
      best = std::max(best, n * std::fabs(base - si * d0.grad[i] / sq) / norm);
    }
    const double plus = diff(y, i, +1), minus = diff(y, i, -1);
    if (!std::isnan(minus)) best = std::max(best, n * std::fabs(plus + minus) / norm);
  }
  return best;
}

}  // namespace

double estimate_c1_hat(const PrelimitParams& p, const LyapunovSpec& spec, const std::vector<IVec>& states) {
  spec.validate();
  const double norm = c1_normalizer(spec);
  const LyapunovFunction f(spec);
  const LatticeLog L{f, p};
  double best = 0.0;
  for (const auto& x : states) best = std::max(best, c1_at(L, x, static_cast<double>(p.n()), norm));
  return best;
}

double theta0_formula(const PrelimitParams& p, double C1_hat, double C0_tilde, double C1_tilde, double C2_hat,
                      double C3_hat) {
  const double m = static_cast<double>(p.m());
  double bmax = 0.0, mu_max = 0.0;
  for (std::size_t i = 0; i < p.m(); ++i) {
    bmax = std::max(bmax, p.gamma_n()[i] / p.mu_n()[i]);
    mu_max = std::max(mu_max, p.mu_n()[i]);
  }
  const double vr = p.varrho_n();
  const double t1 = 1.0 / (1.0 + std::max(bmax - 1.0, 0.0));
  const double t2 = 1.0 / (2.0 * mu_max * (C0_tilde + C1_hat));
  const double t3 = (vr / m) / (m + 2.0 * vr + 4.0 * (C1_tilde + m * C1_hat * C2_hat + m * C3_hat));
  return std::min({t1, t2, t3});
}

double theta_abandon(const PrelimitParams& p) {
  double bmin = kInf, bmax = 0.0;
  for (std::size_t i = 0; i < p.m(); ++i) {
    const double b = p.gamma_n()[i] / p.mu_n()[i];
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
  }
  if (bmax == 0.0) return 1.0;
  return std::min(1.0, std::max(1.0 - bmin, 0.5) / bmax);
}

PrelimitConstants estimate_prelimit_constants(const PrelimitParams& p, const ArrivalSpec& arr,
                                              const LyapunovSpec& spec, const PrelimitSampling& sampling) {
  arr.validate(p.m());
  require(spec.m() == p.m(), "prelimit constants: dimension mismatch");
  const std::size_t m = p.m();
  const double md = static_cast<double>(m), n = static_cast<double>(p.n());
  PrelimitConstants c;
  for (std::size_t i = 0; i < m; ++i) {
    const Interarrival law = arr.law(i);
    if (!law.bounded_mrl())
      throw PreconditionError("prelimit constants: " + law.name() + " violates the bounded residual-life assumption");
    c.C0_hat = std::max({c.C0_hat, p.lambda_n()[i] * law.hazard_sup() / n, 1.0 + law.mrl_sup()});
  }
  const auto states = sample_lattice_states(p, sampling.radius, sampling.states, sampling.seed);
  c.C1_hat = estimate_c1_hat(p, spec, states);
  c.c1_samples = states.size();
  double mu_max = 0.0, lam_sum = 0.0, ga_max = 0.0, load = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mu_max = std::max(mu_max, p.mu_n()[i]);
    lam_sum += p.lambda_n()[i] / n;
    ga_max = std::max(ga_max, p.gamma_n()[i]);
    load += p.lambda_n()[i] / (n * p.mu_n()[i]);
    c.C2_hat = std::max(c.C2_hat, std::max(p.mu_n()[i], p.lambda_n()[i] / n) + p.gamma_n()[i]);
  }
  c.C0_tilde = md * md * c.C0_hat * c.C1_hat;
  c.C1_tilde = c.C1_hat * (md * md * c.C0_hat * mu_max + md * (md - 1.0) * c.C0_hat * c.C0_hat + lam_sum);
  c.C3_hat = c.C0_tilde * ga_max;
  c.theta0 = theta0_formula(p, c.C1_hat, c.C0_tilde, c.C1_tilde, c.C2_hat, c.C3_hat);
  c.eps_tilde0 = sandwich_epsilon(p, arr, spec.theta);
  const double sq = p.sqrt_n();
  for (std::size_t i = 0; i < m; ++i) {
    const double rho = p.lambda_n()[i] / (n * p.mu_n()[i]);
    c.vartheta.push_back(sq * (1.0 - rho) - sq / md * (1.0 - load));
  }
  return c;
}

const char* prelimit_mode_name(PrelimitMode mode) {
  switch (mode) {
    case PrelimitMode::C31: return "poisson_exp";
    case PrelimitMode::T34: return "poisson_abandon";
    case PrelimitMode::T31: return "renewal_exp";
  }
  return "?";
}

namespace {

void check_mode_arrivals(PrelimitMode mode, const PrelimitParams& p, const ArrivalSpec& arr) {
  const std::string tag = prelimit_mode_name(mode);
  switch (mode) {
    case PrelimitMode::C31:
      require(!arr.is_renewal(), tag + ": requires Poisson arrivals");
      require(p.varrho_n() > 0.0, tag + ": requires positive spare capacity");
      break;
    case PrelimitMode::T34:
      require(!arr.is_renewal(), tag + ": requires Poisson arrivals");
      for (double g : p.gamma_n()) require(g > 0.0, tag + ": requires every abandonment rate positive");
      break;
    case PrelimitMode::T31:
      require(arr.is_renewal(), tag + ": requires a renewal arrival spec");
      arr.validate(p.m());
      require(p.varrho_n() > 0.0, tag + ": requires positive spare capacity");
      for (const auto& law : arr.laws) {
        require(law.bounded_mrl(), tag + ": " + law.name() + " has unbounded mean residual life");
        require(std::isfinite(law.hazard_sup()), tag + ": " + law.name() + " has unbounded hazard");
      }
      break;
  }
}

LyapunovSpec exp_linear(const PrelimitParams& p, double eps, double theta) {
  LyapunovSpec s;
  s.family = Family::ExpLinear;
  s.epsilon = eps;
  s.theta = theta;
  s.mu = p.mu_n();
  return s;
}

}  // namespace

LyapunovSpec select_prelimit_parameters(PrelimitMode mode, const PrelimitParams& p, const ArrivalSpec& arr,
                                        const PrelimitSampling& sampling, double eta) {
  check_mode_arrivals(mode, p, arr);
  if (mode == PrelimitMode::T34) {
    LyapunovSpec s;
    s.family = Family::AbandonExp;
    s.eta = eta;
    s.theta = theta_abandon(p);
    s.mu = p.mu_n();
    s.validate();
    return s;
  }
  double theta = 0.5;
  for (int it = 0; it < 50; ++it) {
    const LyapunovSpec s = exp_linear(p, 0.5 * std::min(theta, sandwich_epsilon(p, arr, theta)), theta);
    const double next = estimate_prelimit_constants(p, arr, s, sampling).theta0;
    require(next > 0.0, std::string(prelimit_mode_name(mode)) + ": theta0(n) is not positive");
    const bool done = std::fabs(next - theta) <= 1e-9 * theta;
    theta = next;
    if (done) break;
  }
  LyapunovSpec s = exp_linear(p, 0.5 * std::min(theta, sandwich_epsilon(p, arr, theta)), theta);
  s.validate();
  return s;
}

namespace {

struct StateResult {
  double norm = 0.0;
  double ratio = -kInf;  // max over allocations of 𝒜f/V
  double lifted = 1.0;   // 𝒱/V (renewal) or 1
  double log_v = 0.0;
  std::size_t pairs = 0;
  bool exhaustive = true;
  Vec xhat, s;
  IVec z;
};

}  // namespace

VerificationReport verify_prelimit_foster(PrelimitMode mode, const PrelimitParams& p, const ArrivalSpec& arr,
                                          const LyapunovSpec& spec, const PrelimitSampling& sampling,
                                          const SchedulingPolicy* pol) {
  check_mode_arrivals(mode, p, arr);
  spec.validate();
  require(spec.m() == p.m(), "prelimit verify: dimension mismatch");
  const std::string tag = prelimit_mode_name(mode);
  const std::size_t m = p.m();
  const double md = static_cast<double>(m);
  const auto n = static_cast<std::int64_t>(p.n());

  VerificationReport rep;
  rep.id = std::string("prelimit_") + tag;
  rep.seed = sampling.seed;
  if (mode == PrelimitMode::T34) {
    require(spec.family == Family::AbandonExp, tag + ": needs the AbandonExp family");
    require(std::fabs(spec.theta - theta_abandon(p)) <= 1e-12, tag + ": theta must equal the abandonment rule");
    rep.constants["eta"] = spec.eta;
  } else {
    require(spec.family == Family::ExpLinear, tag + ": needs the ExpLinear family");
    const PrelimitConstants c = estimate_prelimit_constants(p, arr, spec, sampling);
    require(spec.theta <= c.theta0 * (1.0 + 1e-6), tag + ": theta exceeds theta0(n)");
    require(spec.epsilon < std::min(c.theta0, c.eps_tilde0), tag + ": epsilon must be below theta0(n) and the sandwich bound");
    for (const auto& [k, v] : c.as_map()) rep.constants[k] = v;
    rep.constants["epsilon"] = spec.epsilon;
  }
  rep.constants["theta"] = spec.theta;

  const LyapunovFunction f(spec);
  const LatticeLog L{f, p};
  std::optional<RenewalLyapunov> lifted;
  if (mode == PrelimitMode::T31) lifted.emplace(p, arr, f);

  auto evaluate_state = [&](const IVec& x, std::size_t j) {
    StateResult r;
    r.xhat = scale_state(x, p);
    r.norm = l1_norm(r.xhat);
    AllocationSet zs;
    if (pol) {
      zs.z.push_back((*pol)(x, n));
      zs.exhaustive = false;
    } else {
      zs = enumerate_allocations(x, n, sampling.z_limit, sampling.z_extra, derive_seed(sampling.seed, j));
    }
    r.exhaustive = zs.exhaustive;
    if (mode == PrelimitMode::T31) {
      SampleDraws draws(derive_seed(sampling.seed ^ 0xa9e5ULL, j));
      r.s.resize(m);
      for (std::size_t i = 0; i < m; ++i) r.s[i] = sampling.age_scale * draws.exponential() / p.lambda_n()[i];
      const auto lv = lifted->evaluate(r.xhat, r.s);
      r.lifted = lv.ratio;
      r.log_v = lv.log_base;
      for (const auto& z : zs.z) {
        const double g = prelimit_generator(*lifted, x, r.s, z).ratio;
        ++r.pairs;
        if (g > r.ratio) r.ratio = g, r.z = z;
      }
    } else {
      const Neighbors nb = neighbors(L, x);
      r.log_v = nb.L0;
      for (const auto& z : zs.z) {
        const double g = poisson_ratio(nb, x, z, p);
        ++r.pairs;
        if (g > r.ratio) r.ratio = g, r.z = z;
      }
    }
    return r;
  };

  double R = sampling.radius;
  std::size_t pairs = 0;
  for (int attempt = 0;; ++attempt) {
    const auto states = sample_lattice_states(p, R, sampling.states, sampling.seed);
    std::vector<StateResult> res(states.size());
    parallel_for(states.size(), sampling.threads, [&](std::size_t j) { res[j] = evaluate_state(states[j], j); });
    double kappa1 = 0.0;
    if (mode == PrelimitMode::T34) {
      double worst = -kInf;
      for (const auto& r : res)
        if (r.norm >= 0.5 * R) worst = std::max(worst, r.ratio / r.norm);
      kappa1 = std::isfinite(worst) ? -0.5 * worst : -kInf;
      rep.constants["kappa1"] = kappa1;
    }
    const double boundary = (1.0 - sampling.shell_fraction) * R;
    double kappa0 = -kInf, radius = 0.0, worst_margin = kInf;
    std::size_t violations = 0, non_exhaustive = 0;
    Vec worst_x, worst_z;
    for (const auto& r : res) {
      pairs += r.pairs;
      non_exhaustive += r.exhaustive ? 0 : 1;
      double decay;
      switch (mode) {
        case PrelimitMode::C31: decay = spec.epsilon * p.varrho_n() / (2.0 * md); break;
        case PrelimitMode::T31: decay = spec.epsilon * p.varrho_n() / (3.0 * md) * r.lifted; break;
        default: decay = kappa1 * r.norm; break;
      }
      const double total = r.ratio + decay;
      if (total >= 0.0) radius = std::max(radius, r.norm);
      const double kv = total > 0.0 ? std::exp(std::log(total) + r.log_v) : total * std::exp(r.log_v);
      kappa0 = std::max(kappa0, kv);
      if (r.norm > boundary) {
        const double margin = -total;
        if (margin < -slack_for(decay)) ++violations;
        if (margin < worst_margin) {
          worst_margin = margin;
          worst_x = r.xhat;
          worst_z.assign(r.z.begin(), r.z.end());
        }
      }
    }
    const bool ok = std::isfinite(kappa0) && radius <= boundary && violations == 0 &&
                    (mode != PrelimitMode::T34 || kappa1 > 0.0);
    if (ok || attempt >= sampling.max_expansions) {
      rep.samples = pairs;
      rep.violations = violations;
      rep.worst_margin = worst_margin;
      rep.worst_x = worst_x;
      rep.worst_u = worst_z;
      rep.constants["kappa0"] = kappa0;
      rep.constants["attainment_radius"] = radius;
      rep.constants["sampling_radius"] = R;
      rep.constants["non_exhaustive_states"] = static_cast<double>(non_exhaustive);
      rep.passed = ok;
      if (non_exhaustive > 0 && !pol) {
        std::ostringstream os;
        os << "allocation sweep non-exhaustive at " << non_exhaustive << " of " << res.size() << " states";
        rep.note = os.str();
      } else if (pol) {
        rep.note = "single policy " + pol->name();
      }
      return rep;
    }
    R *= 2.0;
  }
}

}  // namespace hwq

namespace hwq {

IVec allocation_for_control(std::span<const std::int64_t> x, std::int64_t n, const ControlVector& u) {
  const std::size_t m = x.size();
  std::int64_t total = 0;
  for (std::int64_t v : x) total += v;
  IVec z(x.begin(), x.end());
  if (total <= n) return z;
  const double excess = static_cast<double>(total - n);
  IVec q(m, 0);
  std::int64_t placed = 0;
  Vec frac(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double want = std::min(excess * u[i], static_cast<double>(x[i]));
    q[i] = static_cast<std::int64_t>(std::floor(want));
    frac[i] = want - static_cast<double>(q[i]);
    placed += q[i];
  }
  // largest remainders first, then any class that still has jobs to hold back
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  std::int64_t left = (total - n) - placed;
  for (int pass = 0; pass < 2 && left > 0; ++pass)
    for (std::size_t i : order) {
      if (left == 0) break;
      const std::int64_t room = x[i] - q[i];
      const std::int64_t take = pass == 0 ? std::min<std::int64_t>(room, frac[i] > 0.0 ? 1 : 0) : std::min(room, left);
      q[i] += take;
      left -= take;
    }
  for (std::size_t i = 0; i < m; ++i) z[i] = x[i] - q[i];
  return z;
}

ConsistencyPoint generator_consistency(const SystemParams& sys, const LyapunovSpec& spec, std::span<const double> xhat,
                                       const ControlVector& u, std::size_t n) {
  const PrelimitParams p = PrelimitParams::from_system(sys, n);
  ConsistencyPoint c;
  c.n = n;
  c.x = unscale_state(xhat, p);
  for (auto& v : c.x) v = std::max<std::int64_t>(v, 0);
  c.xhat = scale_state(c.x, p);
  c.z = allocation_for_control(c.x, static_cast<std::int64_t>(n), u);
  const Vec zhat = scale_allocation(c.z, p);
  std::int64_t total = 0;
  for (std::int64_t v : c.x) total += v;
  // without integer excess the scaled sum can round to a tiny positive value
  const auto recovered =
      total > static_cast<std::int64_t>(n) ? allocation_to_control(c.xhat, zhat) : std::optional<ControlVector>{};
  const ControlVector un = recovered ? *recovered : u;
  c.u = un.values();
  const LyapunovFunction f(spec);
  c.prelimit = prelimit_generator(f, c.x, c.z, p).ratio;
  Vec lam(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) lam[i] = p.lambda_n()[i] / static_cast<double>(n);
  const DiffusionSpec d = DiffusionSpec::make(p.varrho_n(), p.mu_n(), p.gamma_n(), lam);
  c.diffusion = generator_eval(f, c.xhat, un, d).ratio;
  return c;
}

}  // namespace hwq

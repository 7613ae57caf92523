#include "hwq/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hwq/kernels.hpp"
#include "hwq/parallel.hpp"
#include "hwq/rng.hpp"

namespace hwq {

ControlPolicy ControlPolicy::constant(Vec u) {
  ControlPolicy p;
  p.kind = Kind::Constant;
  p.u = ControlVector(std::move(u)).values();
  return p;
}

ControlPolicy ControlPolicy::static_priority(std::vector<std::size_t> order) {
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i) throw PreconditionError("policy: priority order must be a permutation");
  ControlPolicy p;
  p.kind = Kind::StaticPriority;
  p.priority = std::move(order);
  p.u = ControlVector::vertex(p.priority.size(), p.priority.back()).values();
  return p;
}

ControlPolicy ControlPolicy::state_table(HistogramSpec grid, std::vector<Vec> table, Vec fallback) {
  if (table.size() != grid.cells()) throw PreconditionError("policy: table needs one control per grid cell");
  ControlPolicy p;
  p.kind = Kind::StateTable;
  p.grid = std::move(grid);
  for (auto& u : table) p.table.push_back(ControlVector(std::move(u)).values());
  p.fallback = ControlVector(std::move(fallback)).values();
  return p;
}

ControlPolicy ControlPolicy::user_hook(std::function<Vec(std::span<const double>)> fn, std::string label) {
  ControlPolicy p;
  p.kind = Kind::Hook;
  p.hook = std::move(fn);
  p.label = std::move(label);
  return p;
}

ControlVector ControlPolicy::operator()(std::span<const double> x) const {
  switch (kind) {
    case Kind::Constant:
    case Kind::StaticPriority:
      return ControlVector(u);
    case Kind::StateTable: {
      const std::size_t c = grid.index(x);
      return ControlVector(c < table.size() ? table[c] : fallback);
    }
    case Kind::Hook:
      return ControlVector(hook(x));
  }
  throw PreconditionError("policy: unknown kind");
}

std::string ControlPolicy::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Constant:
      os << "constant(";
      for (std::size_t i = 0; i < u.size(); ++i) os << (i ? " " : "") << u[i];
      os << ")";
      break;
    case Kind::StaticPriority:
      os << "priority(";
      for (std::size_t i = 0; i < priority.size(); ++i) os << (i ? ">" : "") << priority[i] + 1;
      os << ")";
      break;
    case Kind::StateTable: os << "table"; break;
    case Kind::Hook: os << label; break;
  }
  return os.str();
}

void SimConfig::validate() const {
  if (!(h > 0.0)) throw PreconditionError("sim: step must be positive");
  if (!(horizon > 0.0)) throw PreconditionError("sim: horizon must be positive");
  if (burn_in >= 0.0 && !(burn_in < horizon)) throw PreconditionError("sim: burn-in must be below the horizon");
  if (!(h <= horizon)) throw PreconditionError("sim: step exceeds horizon");
  if (replicas == 0) throw PreconditionError("sim: need at least one replica");
  if (!(blowup > 0.0)) throw PreconditionError("sim: blow-up bound must be positive");
  if (!(thin > 0.0)) throw PreconditionError("sim: thinning interval must be positive");
}

std::size_t DiffusionRun::blowups() const {
  std::size_t n = 0;
  for (const auto& r : replicas) n += r.blew_up ? 1 : 0;
  return n;
}

std::string DiffusionRun::summary() const {
  std::ostringstream os;
  os.precision(10);
  const MeanSE neg = measure.neg_sum(), l1 = measure.l1();
  os << "replicas: " << replicas.size() << "\n"
     << "blowups: " << blowups() << "\n"
     << "time_weight: " << measure.total_weight() << "\n"
     << "mean_neg_sum: " << neg.mean << " +- " << neg.se << "\n"
     << "mean_l1: " << l1.mean << " +- " << l1.se << "\n"
     << "thinned_samples: " << measure.sample_count() << "\n";
  return os.str();
}

namespace {

struct GroupResult {
  std::vector<EmpiricalMeasure> measures;
  std::vector<ReplicaOutcome> outcomes;
  std::vector<std::vector<Vec>> snaps;  // [checkpoint][lane]
};

GroupResult run_group(const DiffusionSpec& d, const ControlPolicy& policy, const SimConfig& cfg, std::size_t r0,
                      std::size_t L, const MeasureOptions& mopts) {
  const std::size_t m = d.m;
  const auto steps = static_cast<std::uint64_t>(std::llround(cfg.horizon / cfg.h));
  const auto burn_steps = static_cast<std::uint64_t>(std::llround(cfg.burn() / cfg.h));
  const auto thin_steps = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.thin / cfg.h)));
  const std::uint64_t measured = steps > burn_steps ? steps - burn_steps : 0;
  std::vector<std::uint64_t> ck_steps;
  for (double t : cfg.checkpoints) ck_steps.push_back(static_cast<std::uint64_t>(std::llround(t / cfg.h)));

  GroupResult g;
  g.measures.assign(L, EmpiricalMeasure(m, mopts));
  g.outcomes.resize(L);
  g.snaps.assign(ck_steps.size(), std::vector<Vec>(L));
  std::vector<StreamDraws> draws;
  draws.reserve(L);
  for (std::size_t k = 0; k < L; ++k) draws.emplace_back(derive_seed(cfg.seed, r0 + k));

  Vec x(m * L), u(m * L), noise(m * L), scratch(L);
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t i = 0; i < m; ++i) x[i * L + k] = cfg.x0.empty() ? 0.0 : cfg.x0[i];
  const bool dynamic = policy.state_dependent();
  if (!dynamic) {
    const ControlVector c = policy(Vec(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < L; ++k) u[i * L + k] = c[i];
  }
  Vec offset(m), noise_scale(m);
  const double sqh = std::sqrt(cfg.h);
  for (std::size_t i = 0; i < m; ++i) {
    offset[i] = d.varrho * d.mu[i] / static_cast<double>(m);
    noise_scale[i] = d.sigma[i] * sqh;
  }
  kernels::EulerBatch batch;
  batch.m = m;
  batch.lanes = L;
  batch.x = x.data();
  batch.u = u.data();
  batch.noise = noise.data();
  batch.mu = d.mu.data();
  batch.gamma = d.gamma.data();
  batch.offset = offset.data();
  batch.noise_scale = noise_scale.data();
  batch.h = cfg.h;
  batch.scratch = scratch.data();

  std::vector<char> alive(L, 1);
  std::size_t n_alive = L;
  Vec xr(m);
  auto gather = [&](std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) xr[i] = x[i * L + k];
  };
  for (std::uint64_t step = 1; step <= steps && n_alive > 0; ++step) {
    for (std::size_t k = 0; k < L; ++k) {
      if (!alive[k]) continue;
      if (dynamic) {
        gather(k);
        const ControlVector c = policy(xr);
        for (std::size_t i = 0; i < m; ++i) u[i * L + k] = c[i];
      }
      for (std::size_t i = 0; i < m; ++i) noise[i * L + k] = draws[k].normal();
    }
    kernels::euler_step(batch);
    const bool in_measure = step > burn_steps;
    const std::size_t bidx =
        in_measure ? static_cast<std::size_t>((step - burn_steps - 1) * mopts.batches / measured) : 0;
    for (std::size_t k = 0; k < L; ++k) {
      if (!alive[k]) continue;
      gather(k);
      const double n1 = l1_norm(xr);
      if (!(n1 <= cfg.blowup)) {
        alive[k] = 0;
        --n_alive;
        g.outcomes[k].blew_up = true;
        g.outcomes[k].blowup_time = static_cast<double>(step) * cfg.h;
        g.outcomes[k].terminal = xr;
        for (std::size_t i = 0; i < m; ++i) x[i * L + k] = 0.0, noise[i * L + k] = 0.0;
        continue;
      }
      if (in_measure) {
        g.measures[k].add(xr, cfg.h, bidx);
        if (step % thin_steps == 0) g.measures[k].add_sample(xr);
      }
    }
    for (std::size_t c = 0; c < ck_steps.size(); ++c)
      if (ck_steps[c] == step)
        for (std::size_t k = 0; k < L; ++k)
          if (alive[k]) {
            gather(k);
            g.snaps[c][k] = xr;
          }
  }
  for (std::size_t k = 0; k < L; ++k)
    if (alive[k]) {
      gather(k);
      g.outcomes[k].terminal = xr;
    }
  return g;
}

}  // namespace

DiffusionRun simulate(const DiffusionSpec& d, const ControlPolicy& policy, const SimConfig& cfg) {
  d.validate();
  cfg.validate();
  if (!cfg.x0.empty() && cfg.x0.size() != d.m) throw PreconditionError("sim: initial state dimension mismatch");
  MeasureOptions mopts;
  mopts.histogram = cfg.histogram;
  mopts.exp_rates = cfg.exp_rates;
  mopts.gauss_rates = cfg.gauss_rates;
  mopts.batches = cfg.batches;

  const std::size_t L = std::max<std::size_t>(1, std::min(cfg.lanes, cfg.replicas));
  const std::size_t groups = (cfg.replicas + L - 1) / L;
  std::vector<GroupResult> results(groups);
  parallel_for(groups, cfg.threads, [&](std::size_t gi) {
    const std::size_t r0 = gi * L;
    results[gi] = run_group(d, policy, cfg, r0, std::min(L, cfg.replicas - r0), mopts);
  });

  DiffusionRun run;
  run.measure = EmpiricalMeasure(d.m, mopts);
  run.snapshots.assign(cfg.checkpoints.size(), {});
  for (auto& g : results) {
    for (std::size_t k = 0; k < g.outcomes.size(); ++k) {
      run.measure.merge(g.measures[k]);
      run.replicas.push_back(std::move(g.outcomes[k]));
    }
    for (std::size_t c = 0; c < g.snaps.size(); ++c)
      for (auto& v : g.snaps[c]) run.snapshots[c].push_back(std::move(v));
  }
  return run;
}

IdlenessReport check_idleness_identity(const EmpiricalMeasure& measure, const DiffusionSpec& d, double rel_tol) {
  for (double g : d.gamma)
    if (g != 0.0) throw PreconditionError("idleness identity: requires zero abandonment");
  if (!(d.varrho > 0.0)) throw PreconditionError("idleness identity: requires positive spare capacity");
  if (!(measure.total_weight() > 0.0)) throw PreconditionError("idleness identity: empty measure");
  IdlenessReport r;
  const MeanSE e = measure.neg_sum();
  r.estimate = e.mean;
  r.se = e.se;
  r.target = d.varrho;
  r.tolerance = rel_tol * std::fabs(d.varrho);
  r.passed = std::fabs(r.estimate - r.target) <= r.tolerance;
  return r;
}

double TailDirection::project(std::span<const double> x) const {
  switch (kind) {
    case Kind::L1: return l1_norm(x);
    case Kind::NegPart: return std::max(-x[index], 0.0);
    case Kind::NegPartSum: {
      double s = 0.0;
      for (std::size_t i : subset) s += std::max(-x[i], 0.0);
      return s;
    }
  }
  return 0.0;
}

TailFit estimate_tail(const EmpiricalMeasure& measure, TailForm form, const TailDirection& dir,
                      const TailOptions& opts) {
  const std::size_t N = measure.sample_count();
  if (N < 2 * static_cast<std::size_t>(opts.min_tail_weight) + 10)
    throw InsufficientData("tail: too few thinned samples");
  std::vector<std::pair<double, double>> yw(N);
  for (std::size_t k = 0; k < N; ++k) yw[k] = {dir.project(measure.sample(k)), measure.sample_weight(k)};
  std::sort(yw.begin(), yw.end());
  // suffix[k] = weight of samples k..N-1
  Vec suffix(N + 1, 0.0);
  for (std::size_t k = N; k-- > 0;) suffix[k] = suffix[k + 1] + yw[k].second;
  const double W = suffix[0];
  std::size_t klo = 0;
  while (klo < N && suffix[klo + 1] > (1.0 - opts.lower_quantile) * W) ++klo;
  const auto tail_n = static_cast<std::size_t>(opts.min_tail_weight);
  const std::size_t khi = N - tail_n;
  if (khi <= klo) throw InsufficientData("tail: resolvable range is empty");
  TailFit fit;
  fit.form = form;
  fit.r_lo = yw[klo].first;
  fit.r_hi = yw[khi].first;
  if (!(fit.r_hi > fit.r_lo)) throw InsufficientData("tail: resolvable range is degenerate");
  Vec X, Y;
  for (std::size_t g = 0; g < opts.grid; ++g) {
    const double r = fit.r_lo + (fit.r_hi - fit.r_lo) * static_cast<double>(g) / static_cast<double>(opts.grid - 1);
    const auto it = std::upper_bound(yw.begin(), yw.end(), std::make_pair(r, kInf));
    const double tail = suffix[static_cast<std::size_t>(it - yw.begin())] / W;
    if (!(tail > 0.0)) continue;
    fit.r.push_back(r);
    fit.log_tail.push_back(std::log(tail));
    X.push_back(form == TailForm::Exponential ? r : r * r);
    Y.push_back(std::log(tail));
  }
  if (X.size() < 3) throw InsufficientData("tail: fewer than three resolvable points");
  const LineFit lf = fit_line(X, Y);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r2 = lf.r2;
  fit.points = lf.points;
  return fit;
}

namespace {

double total_variation(const Vec& p, const Vec& q) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) s += std::fabs(p[c] - q[c]);
  return 0.5 * s;
}

Vec bin_points(const HistogramSpec& hs, const std::vector<Vec>& pts) {
  Vec p(hs.cells() + 1, 0.0);
  double n = 0.0;
  for (const auto& x : pts) {
    if (x.empty()) continue;
    p[hs.index(x)] += 1.0;
    n += 1.0;
  }
  if (n > 0.0)
    for (double& v : p) v /= n;
  return p;
}

}  // namespace

RateEstimate estimate_rate(const DiffusionSpec& d, const ControlPolicy& policy, const SimConfig& cfg,
                           const LyapunovSpec& probe, const RateOptions& opts) {
  RateEstimate est;
  SimConfig stat = cfg;
  stat.replicas = 1;
  stat.horizon = opts.stationary_horizon;
  stat.burn_in = -1.0;
  stat.thin = 0.1;
  stat.checkpoints.clear();
  stat.histogram.reset();
  stat.x0.clear();
  stat.seed = derive_seed(cfg.seed, 0xfeedULL);
  const DiffusionRun srun = simulate(d, policy, stat);
  if (srun.blowups() > 0 || srun.measure.sample_count() < 100) {
    est.flagged = true;
    est.reason = "stationary run left the guard region (transient or too short)";
    return est;
  }
  const std::size_t m = d.m;
  std::vector<Vec> spts(srun.measure.sample_count());
  for (std::size_t k = 0; k < spts.size(); ++k) {
    const auto s = srun.measure.sample(k);
    spts[k].assign(s.begin(), s.end());
  }
  HistogramSpec hs;
  hs.bins.assign(m, opts.bins_per_dim);
  for (std::size_t i = 0; i < m; ++i) {
    Vec c(spts.size());
    for (std::size_t k = 0; k < spts.size(); ++k) c[k] = spts[k][i];
    std::sort(c.begin(), c.end());
    hs.lo.push_back(c[c.size() / 100]);
    hs.hi.push_back(c[c.size() - 1 - c.size() / 100]);
  }
  const Vec pi = bin_points(hs, spts);
  double pi_probe = 0.0;
  for (const auto& x : spts) pi_probe += evaluate(probe, x).value();
  pi_probe /= static_cast<double>(spts.size());

  SimConfig ens = cfg;
  ens.replicas = opts.ensemble;
  ens.horizon = opts.horizon;
  ens.burn_in = opts.horizon * 0.5;
  ens.histogram.reset();
  ens.thin = opts.horizon;
  ens.checkpoints.clear();
  for (std::size_t k = 1; k <= opts.checkpoints; ++k)
    ens.checkpoints.push_back(opts.horizon * static_cast<double>(k) / static_cast<double>(opts.checkpoints));
  const DiffusionRun erun = simulate(d, policy, ens);
  if (erun.blowups() > 0) {
    est.flagged = true;
    est.reason = "ensemble replicas left the guard region";
    return est;
  }
  for (std::size_t k = 0; k < ens.checkpoints.size(); ++k) {
    est.times.push_back(ens.checkpoints[k]);
    est.distances.push_back(total_variation(bin_points(hs, erun.snapshots[k]), pi));
    double pm = 0.0;
    for (const auto& x : erun.snapshots[k]) pm += evaluate(probe, x).value();
    est.probe_gap.push_back(std::fabs(pm / static_cast<double>(erun.snapshots[k].size()) - pi_probe));
  }
  Vec tail(est.distances.end() - static_cast<std::ptrdiff_t>(est.distances.size() / 3), est.distances.end());
  std::sort(tail.begin(), tail.end());
  est.noise_floor = tail[tail.size() / 2];
  Vec X, Y;
  for (std::size_t k = 0; k < est.distances.size(); ++k) {
    if (est.distances[k] < opts.floor_factor * est.noise_floor) break;
    X.push_back(est.times[k]);
    Y.push_back(std::log(est.distances[k]));
  }
  est.window = X.size();
  if (X.size() < 3) {
    est.flagged = true;
    est.reason = "fewer than three points above the noise floor";
    return est;
  }
  const LineFit lf = fit_line(X, Y);
  est.gamma_hat = -lf.slope;
  est.r2 = lf.r2;
  if (!(est.gamma_hat > 0.0)) {
    est.flagged = true;
    est.reason = "distance to the stationary estimate does not decay";
  }
  return est;
}

}  // namespace hwq

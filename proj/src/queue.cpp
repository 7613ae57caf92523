#include "hwq/queue.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hwq/parallel.hpp"
#include "hwq/rng.hpp"

namespace hwq {

SchedulingPolicy SchedulingPolicy::static_priority(std::vector<std::size_t> order) {
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i) throw PreconditionError("policy: priority order must be a permutation");
  SchedulingPolicy p;
  p.kind = Kind::StaticPriority;
  p.priority = std::move(order);
  return p;
}

SchedulingPolicy SchedulingPolicy::longest_queue_first() {
  SchedulingPolicy p;
  p.kind = Kind::LongestQueueFirst;
  return p;
}

SchedulingPolicy SchedulingPolicy::random_work_conserving(std::uint64_t seed) {
  SchedulingPolicy p;
  p.kind = Kind::RandomWorkConserving;
  p.seed = seed;
  return p;
}

SchedulingPolicy SchedulingPolicy::user_table(std::function<IVec(std::span<const std::int64_t>, std::int64_t)> fn,
                                              std::string label) {
  SchedulingPolicy p;
  p.kind = Kind::Table;
  p.table = std::move(fn);
  p.label = std::move(label);
  return p;
}

IVec priority_fill(std::span<const std::int64_t> x, std::int64_t n, std::span<const std::size_t> order) {
  IVec z(x.size(), 0);
  std::int64_t left = n;
  for (std::size_t i : order) {
    z[i] = std::min(x[i], left);
    left -= z[i];
  }
  return z;
}

namespace {

IVec longest_queue_fill(std::span<const std::int64_t> x, std::int64_t n) {
  const std::size_t m = x.size();
  const std::int64_t total = std::accumulate(x.begin(), x.end(), std::int64_t{0});
  IVec z(x.begin(), x.end());
  if (total <= n) return z;
  const std::int64_t Q = total - n;  // jobs that must wait
  // Water level L: the largest integer with Σ min(x_i, L) ≤ Q.
  auto level_sum = [&](std::int64_t L) {
    std::int64_t s = 0;
    for (std::int64_t v : x) s += std::min(v, L);
    return s;
  };
  std::int64_t lo = 0, hi = *std::max_element(x.begin(), x.end());
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo + 1) / 2;
    if (level_sum(mid) <= Q)
      lo = mid;
    else
      hi = mid - 1;
  }
  const std::int64_t L = lo;
  std::int64_t used = 0;
  IVec q(m);
  for (std::size_t i = 0; i < m; ++i) used += q[i] = std::min(x[i], L);
  for (std::size_t i = 0; i < m && used < Q; ++i)
    if (x[i] > L) ++q[i], ++used;
  for (std::size_t i = 0; i < m; ++i) z[i] = x[i] - q[i];
  return z;
}

std::vector<std::size_t> hashed_order(std::span<const std::int64_t> x, std::uint64_t seed) {
  std::uint64_t h = mix64(seed);
  for (std::int64_t v : x) h = mix64(h ^ static_cast<std::uint64_t>(v));
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    h = mix64(h);
    std::swap(order[i - 1], order[h % i]);
  }
  return order;
}

}  // namespace

IVec SchedulingPolicy::operator()(std::span<const std::int64_t> x, std::int64_t n) const {
  switch (kind) {
    case Kind::StaticPriority: return priority_fill(x, n, priority);
    case Kind::LongestQueueFirst: return longest_queue_fill(x, n);
    case Kind::RandomWorkConserving: return priority_fill(x, n, hashed_order(x, seed));
    case Kind::Table: {
      IVec z = table(x, n);
      if (!is_work_conserving(x, z, n)) throw PreconditionError("policy: table returned a non-work-conserving allocation");
      return z;
    }
  }
  throw PreconditionError("policy: unknown kind");
}

std::string SchedulingPolicy::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::StaticPriority:
      os << "priority(";
      for (std::size_t i = 0; i < priority.size(); ++i) os << (i ? ">" : "") << priority[i] + 1;
      os << ")";
      break;
    case Kind::LongestQueueFirst: os << "lqf"; break;
    case Kind::RandomWorkConserving: os << "random(" << seed << ")"; break;
    case Kind::Table: os << label; break;
  }
  return os.str();
}

bool is_work_conserving(std::span<const std::int64_t> x, std::span<const std::int64_t> z, std::int64_t n) {
  if (x.size() != z.size()) return false;
  std::int64_t sx = 0, sz = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (z[i] < 0 || z[i] > x[i]) return false;
    sx += x[i];
    sz += z[i];
  }
  return sz == std::min(n, sx);
}

AllocationSet enumerate_allocations(std::span<const std::int64_t> x, std::int64_t n, std::size_t limit,
                                    std::size_t extra, std::uint64_t seed) {
  const std::size_t m = x.size();
  const std::int64_t K = std::min(n, std::accumulate(x.begin(), x.end(), std::int64_t{0}));
  const double cap = static_cast<double>(limit) + 1.0;
  // ways[i][r]: allocations of r servers to classes i..m-1, capped
  std::vector<Vec> ways(m + 1, Vec(static_cast<std::size_t>(K) + 1, 0.0));
  ways[m][0] = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    double window = 0.0;
    for (std::int64_t r = 0; r <= K; ++r) {
      window += ways[i + 1][static_cast<std::size_t>(r)];
      if (r - x[i] - 1 >= 0) window -= ways[i + 1][static_cast<std::size_t>(r - x[i] - 1)];
      ways[i][static_cast<std::size_t>(r)] = std::min(window, cap);
    }
  }
  AllocationSet out;
  out.count = ways[0][static_cast<std::size_t>(K)];
  if (out.count <= static_cast<double>(limit)) {
    out.exhaustive = true;
    IVec z(m, 0);
    std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t i, std::int64_t left) {
      if (i + 1 == m) {
        if (left <= x[i]) {
          z[i] = left;
          out.z.push_back(z);
        }
        return;
      }
      for (std::int64_t v = 0; v <= std::min(x[i], left); ++v) {
        if (ways[i + 1][static_cast<std::size_t>(left - v)] == 0.0) continue;
        z[i] = v;
        rec(i + 1, left - v);
      }
    };
    if (m > 0) rec(0, K);
    return out;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::size_t perms = 0;
  do {
    out.z.push_back(priority_fill(x, n, order));
  } while (++perms < 5040 && std::next_permutation(order.begin(), order.end()));
  SampleDraws draws(derive_seed(seed, 0xa110cULL));
  for (std::size_t e = 0; e < extra; ++e) {
    Vec w(m);
    double tot = 0.0;
    for (double& v : w) tot += v = draws.exponential();
    IVec z(m);
    std::int64_t used = 0;
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = std::min(x[i], static_cast<std::int64_t>(std::floor(static_cast<double>(K) * w[i] / tot)));
      used += z[i];
    }
    std::vector<std::size_t> ord(m);
    std::iota(ord.begin(), ord.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(ord[i - 1], ord[draws.index(i)]);
    for (std::size_t i : ord) {
      const std::int64_t add = std::min(x[i] - z[i], K - used);
      z[i] += add;
      used += add;
    }
    out.z.push_back(std::move(z));
  }
  return out;
}

void EventCounts::resize(std::size_t m) {
  arrivals.assign(m, 0);
  services.assign(m, 0);
  abandonments.assign(m, 0);
  arrival_rate_time.assign(m, 0.0);
  service_rate_time.assign(m, 0.0);
  abandon_rate_time.assign(m, 0.0);
}

void EventCounts::merge(const EventCounts& o) {
  if (arrivals.empty()) resize(o.arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    arrivals[i] += o.arrivals[i];
    services[i] += o.services[i];
    abandonments[i] += o.abandonments[i];
    arrival_rate_time[i] += o.arrival_rate_time[i];
    service_rate_time[i] += o.service_rate_time[i];
    abandon_rate_time[i] += o.abandon_rate_time[i];
  }
  events += o.events;
  rate_mismatches += o.rate_mismatches;
  conservation_failures += o.conservation_failures;
  roundtrip_failures += o.roundtrip_failures;
  roundtrip_checks += o.roundtrip_checks;
}

std::size_t QueueRun::blowups() const {
  std::size_t n = 0;
  for (const auto& r : replicas) n += r.blew_up ? 1 : 0;
  return n;
}

std::string QueueRun::summary() const {
  std::ostringstream os;
  os.precision(10);
  const MeanSE neg = measure.neg_sum(), l1 = measure.l1();
  os << "replicas: " << replicas.size() << "\n"
     << "blowups: " << blowups() << "\n"
     << "events: " << counts.events << "\n"
     << "time_weight: " << measure.total_weight() << "\n"
     << "mean_neg_sum: " << neg.mean << " +- " << neg.se << "\n"
     << "mean_l1: " << l1.mean << " +- " << l1.se << "\n"
     << "conservation_failures: " << counts.conservation_failures << "\n"
     << "roundtrip_failures: " << counts.roundtrip_failures << " of " << counts.roundtrip_checks << "\n";
  return os.str();
}

namespace {

struct ReplicaResult {
  EmpiricalMeasure measure;
  ReplicaOutcome outcome;
  EventCounts counts;
  Vec age_integral;
};

void scale_into(const IVec& x, const PrelimitParams& p, Vec& xhat) {
  const double sq = p.sqrt_n(), shift = p.varrho_n() / static_cast<double>(p.m());
  for (std::size_t i = 0; i < x.size(); ++i)
    xhat[i] = (static_cast<double>(x[i]) - p.lambda_n()[i] / p.mu_n()[i]) / sq - shift;
}

IVec initial_state(const PrelimitParams& p, const SimConfig& cfg) {
  const Vec x0 = cfg.x0.empty() ? Vec(p.m(), 0.0) : cfg.x0;
  if (x0.size() != p.m()) throw PreconditionError("queue: initial state dimension mismatch");
  return unscale_state(x0, p);
}

ReplicaResult run_replica(const PrelimitParams& p, const ArrivalSpec* arr, const SchedulingPolicy& pol,
                          const SimConfig& cfg, const MeasureOptions& mopts, std::size_t r,
                          const QueueObserver& observer) {
  const std::size_t m = p.m();
  const auto n = static_cast<std::int64_t>(p.n());
  const Vec& lam = p.lambda_n();
  const Vec& mu = p.mu_n();
  const Vec& ga = p.gamma_n();
  const double burn = cfg.burn(), T = cfg.horizon;
  const double span = T - burn;

  ReplicaResult res;
  res.measure = EmpiricalMeasure(m, mopts);
  res.counts.resize(m);
  res.age_integral.assign(m, 0.0);
  StreamDraws draws(derive_seed(cfg.seed, r));

  QueueState st{initial_state(p, cfg), Vec(m, 0.0)};
  Vec xhat(m), zhat(m), rates(3 * m);
  Vec next_arrival;
  std::vector<Interarrival> laws;
  if (arr) {
    for (std::size_t i = 0; i < m; ++i) laws.push_back(arr->law(i));
    next_arrival.resize(m);
    for (std::size_t i = 0; i < m; ++i) next_arrival[i] = laws[i].sample(draws) / lam[i];
  }
  double t = 0.0;
  double next_thin = burn + cfg.thin;
  double lam_total = 0.0;
  for (double l : lam) lam_total += l;

  for (;;) {
    const IVec z = pol(st.x, n);
    if (!is_work_conserving(st.x, z, n)) ++res.counts.conservation_failures;
    scale_into(st.x, p, xhat);
    // clocks: arrivals (Poisson only), services, abandonments
    double served = 0.0, total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      rates[i] = arr ? 0.0 : lam[i];
      rates[m + i] = mu[i] * static_cast<double>(z[i]);
      rates[2 * m + i] = ga[i] * static_cast<double>(st.x[i] - z[i]);
      served += rates[m + i] + rates[2 * m + i];
    }
    for (double v : rates) total += v;
    if (!arr) {
      double closed = lam_total;
      for (std::size_t i = 0; i < m; ++i)
        closed += mu[i] * static_cast<double>(z[i]) + ga[i] * static_cast<double>(st.x[i] - z[i]);
      if (std::fabs(closed - total) > 1e-12 * closed) ++res.counts.rate_mismatches;
    }
    double dt;
    std::size_t ev;  // index into rates, or 3m + i for a renewal arrival of class i
    if (arr) {
      const double dt_sa = served > 0.0 ? draws.exponential() / served : kInf;
      std::size_t first = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (next_arrival[i] < next_arrival[first]) first = i;
      const double dt_a = next_arrival[first] - t;
      if (dt_a <= dt_sa) {
        dt = dt_a;
        ev = 3 * m + first;
      } else {
        dt = dt_sa;
        double u = draws.uniform() * served;
        ev = 3 * m - 1;
        for (std::size_t k = m; k < 3 * m; ++k) {
          if (u <= rates[k] && rates[k] > 0.0) {
            ev = k;
            break;
          }
          u -= rates[k];
        }
        while (rates[ev] == 0.0) --ev;
      }
    } else {
      dt = draws.exponential() / total;
      double u = draws.uniform() * total;
      ev = 3 * m - 1;
      for (std::size_t k = 0; k < 3 * m; ++k) {
        if (u <= rates[k] && rates[k] > 0.0) {
          ev = k;
          break;
        }
        u -= rates[k];
      }
      while (rates[ev] == 0.0) --ev;
    }
    // occupation of the current state on [t, t+dt) ∩ [burn, T]
    const double t_end = std::min(t + dt, T);
    const double a = std::max(t, burn);
    if (t_end > a) {
      const double w = t_end - a;
      const auto b = static_cast<std::size_t>((a - burn) / span * static_cast<double>(mopts.batches));
      res.measure.add(xhat, w, b);
      if (arr)
        for (std::size_t i = 0; i < m; ++i) {
          const double s0 = st.s[i] + (a - t);
          res.age_integral[i] += s0 * w + 0.5 * w * w;
        }
      while (next_thin <= t_end) {
        res.measure.add_sample(xhat);
        if (std::accumulate(st.x.begin(), st.x.end(), std::int64_t{0}) > n) {
          for (std::size_t i = 0; i < m; ++i)
            zhat[i] = (static_cast<double>(z[i]) - lam[i] / mu[i]) / p.sqrt_n() - p.varrho_n() / static_cast<double>(m);
          ++res.counts.roundtrip_checks;
          bool ok = false;
          try {
            if (const auto u = allocation_to_control(xhat, zhat)) {
              const double S = sum(xhat);
              ok = true;
              for (std::size_t i = 0; i < m; ++i)
                if (std::fabs(xhat[i] - S * (*u)[i] - zhat[i]) > 1e-9 * (1.0 + std::fabs(xhat[i]))) ok = false;
            }
          } catch (const ControlError&) {
          }
          if (!ok) ++res.counts.roundtrip_failures;
        }
        next_thin += cfg.thin;
      }
    }
    const double tt = std::min(t + dt, T);
    for (std::size_t i = 0; i < m; ++i) {
      res.counts.arrival_rate_time[i] += (arr ? 0.0 : lam[i]) * (tt - t);
      res.counts.service_rate_time[i] += rates[m + i] * (tt - t);
      res.counts.abandon_rate_time[i] += rates[2 * m + i] * (tt - t);
    }
    if (t + dt >= T) break;
    t += dt;
    if (arr)
      for (double& s : st.s) s += dt;
    QueueEvent kind;
    std::size_t cls;
    if (ev >= 3 * m) {
      cls = ev - 3 * m;
      kind = QueueEvent::Arrival;
      ++st.x[cls];
      st.s[cls] = 0.0;
      next_arrival[cls] = t + laws[cls].sample(draws) / lam[cls];
      ++res.counts.arrivals[cls];
    } else if (ev < m) {
      cls = ev;
      kind = QueueEvent::Arrival;
      ++st.x[cls];
      ++res.counts.arrivals[cls];
    } else if (ev < 2 * m) {
      cls = ev - m;
      kind = QueueEvent::Service;
      --st.x[cls];
      ++res.counts.services[cls];
    } else {
      cls = ev - 2 * m;
      kind = QueueEvent::Abandonment;
      --st.x[cls];
      ++res.counts.abandonments[cls];
    }
    ++res.counts.events;
    if (observer) observer(r, t, st, kind, cls);
    scale_into(st.x, p, xhat);
    const double n1 = l1_norm(xhat);
    if (!(n1 <= cfg.blowup)) {
      res.outcome.blew_up = true;
      res.outcome.blowup_time = t;
      res.outcome.terminal = xhat;
      return res;
    }
  }
  res.outcome.terminal = xhat;
  return res;
}

QueueRun run_all(const PrelimitParams& p, const ArrivalSpec* arr, const SchedulingPolicy& pol, const SimConfig& cfg,
                 const QueueObserver& observer) {
  cfg.validate();
  MeasureOptions mopts;
  mopts.histogram = cfg.histogram;
  mopts.exp_rates = cfg.exp_rates;
  mopts.gauss_rates = cfg.gauss_rates;
  mopts.batches = cfg.batches;
  std::vector<ReplicaResult> results(cfg.replicas);
  parallel_for(cfg.replicas, cfg.threads,
               [&](std::size_t r) { results[r] = run_replica(p, arr, pol, cfg, mopts, r, observer); });
  QueueRun run;
  run.measure = EmpiricalMeasure(p.m(), mopts);
  run.counts.resize(p.m());
  run.mean_age.assign(p.m(), 0.0);
  for (auto& res : results) {
    run.measure.merge(res.measure);
    run.counts.merge(res.counts);
    for (std::size_t i = 0; i < p.m(); ++i) run.mean_age[i] += res.age_integral[i];
    run.replicas.push_back(std::move(res.outcome));
  }
  const double w = run.measure.total_weight();
  for (double& a : run.mean_age) a = w > 0.0 ? a / w : 0.0;
  if (!arr) run.mean_age.clear();
  return run;
}

}  // namespace

QueueRun simulate_ctmc(const PrelimitParams& p, const SchedulingPolicy& pol, const SimConfig& cfg,
                       const QueueObserver& observer) {
  return run_all(p, nullptr, pol, cfg, observer);
}

QueueRun simulate_renewal(const PrelimitParams& p, const ArrivalSpec& arr, const SchedulingPolicy& pol,
                          const SimConfig& cfg, const QueueObserver& observer) {
  if (!arr.is_renewal()) throw PreconditionError("queue: renewal simulation needs a renewal arrival spec");
  arr.validate(p.m());
  return run_all(p, &arr, pol, cfg, observer);
}

IVec ctmc_state_at(const PrelimitParams& p, const SchedulingPolicy& pol, std::span<const std::int64_t> x0, double t,
                   std::uint64_t seed) {
  const std::size_t m = p.m();
  const auto n = static_cast<std::int64_t>(p.n());
  SampleDraws draws(seed);
  IVec x(x0.begin(), x0.end());
  Vec rates(3 * m);
  double now = 0.0;
  for (;;) {
    const IVec z = pol(x, n);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      rates[i] = p.lambda_n()[i];
      rates[m + i] = p.mu_n()[i] * static_cast<double>(z[i]);
      rates[2 * m + i] = p.gamma_n()[i] * static_cast<double>(x[i] - z[i]);
    }
    for (double v : rates) total += v;
    now += draws.exponential() / total;
    if (now > t) return x;
    double u = draws.uniform() * total;
    std::size_t ev = 3 * m - 1;
    for (std::size_t k = 0; k < 3 * m; ++k) {
      if (u <= rates[k] && rates[k] > 0.0) {
        ev = k;
        break;
      }
      u -= rates[k];
    }
    while (rates[ev] == 0.0) --ev;
    if (ev < m)
      ++x[ev];
    else
      --x[ev % m];
  }
}

}  // namespace hwq

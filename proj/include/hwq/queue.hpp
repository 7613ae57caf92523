#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hwq/diffusion.hpp"
#include "hwq/interarrival.hpp"

namespace hwq {

using IVec = std::vector<std::int64_t>;

struct QueueState {
  IVec x;
  Vec s;  // arrival ages, renewal mode only
};

// Work-conserving allocation z ∈ 𝒵ⁿ(x).
struct SchedulingPolicy {
  enum class Kind { StaticPriority, LongestQueueFirst, RandomWorkConserving, Table };
  Kind kind = Kind::StaticPriority;
  std::vector<std::size_t> priority;  // StaticPriority: highest priority first
  std::uint64_t seed = 0;             // RandomWorkConserving
  std::function<IVec(std::span<const std::int64_t>, std::int64_t)> table;
  std::string label;

  static SchedulingPolicy static_priority(std::vector<std::size_t> order);
  static SchedulingPolicy longest_queue_first();
  // Priority order drawn from a hash of (x, seed): deterministic, Markov, and varies across states.
  static SchedulingPolicy random_work_conserving(std::uint64_t seed);
  static SchedulingPolicy user_table(std::function<IVec(std::span<const std::int64_t>, std::int64_t)> fn,
                                     std::string label = "table");

  IVec operator()(std::span<const std::int64_t> x, std::int64_t n) const;
  std::string name() const;
};

bool is_work_conserving(std::span<const std::int64_t> x, std::span<const std::int64_t> z, std::int64_t n);
// Serve classes in `order` until the n servers are used up.
IVec priority_fill(std::span<const std::int64_t> x, std::int64_t n, std::span<const std::size_t> order);

struct AllocationSet {
  std::vector<IVec> z;
  bool exhaustive = false;
  double count = 0.0;  // |𝒵ⁿ(x)| (capped at limit+1 when not exhaustive)
};

// All of 𝒵ⁿ(x) when it has at most `limit` elements, otherwise the priority-fill vertices
// plus `extra` random feasible points.
AllocationSet enumerate_allocations(std::span<const std::int64_t> x, std::int64_t n, std::size_t limit = 10000,
                                    std::size_t extra = 1000, std::uint64_t seed = 1);

struct EventCounts {
  std::vector<std::uint64_t> arrivals, services, abandonments;
  // ∫ of each clock's rate over the run; per-class counts should match these.
  Vec arrival_rate_time, service_rate_time, abandon_rate_time;
  std::uint64_t events = 0;
  std::uint64_t rate_mismatches = 0;     // total rate out of (x,z) differed from the component sum
  std::uint64_t conservation_failures = 0;
  std::uint64_t roundtrip_failures = 0;  // ẑ ≠ x̂ − ⟨e,x̂⟩⁺u after allocation_to_control
  std::uint64_t roundtrip_checks = 0;

  void resize(std::size_t m);
  void merge(const EventCounts& o);
};

struct QueueRun {
  EmpiricalMeasure measure;  // over x̂
  std::vector<ReplicaOutcome> replicas;
  EventCounts counts;
  Vec mean_age;              // renewal: time-average age per class
  std::string summary() const;
  std::size_t blowups() const;
};

enum class QueueEvent { Arrival, Service, Abandonment };
// Called after every transition with the post-event state.
using QueueObserver =
    std::function<void(std::size_t replica, double t, const QueueState& state, QueueEvent ev, std::size_t cls)>;

// cfg.x0 is a scaled initial state x̂ (empty: x̂ = 0); cfg.h is unused.
QueueRun simulate_ctmc(const PrelimitParams& p, const SchedulingPolicy& pol, const SimConfig& cfg,
                       const QueueObserver& observer = {});
QueueRun simulate_renewal(const PrelimitParams& p, const ArrivalSpec& arr, const SchedulingPolicy& pol,
                          const SimConfig& cfg, const QueueObserver& observer = {});

// Lattice state at time t of a single CTMC path started at x0.
IVec ctmc_state_at(const PrelimitParams& p, const SchedulingPolicy& pol, std::span<const std::int64_t> x0, double t,
                   std::uint64_t seed);

}  // namespace hwq

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hwq/lyapunov.hpp"
#include "hwq/measure.hpp"

namespace hwq {

struct ControlPolicy {
  enum class Kind { Constant, StaticPriority, StateTable, Hook };
  Kind kind = Kind::Constant;
  Vec u;                              // Constant
  std::vector<std::size_t> priority;  // StaticPriority: highest priority first
  HistogramSpec grid;                 // StateTable: one control per grid cell
  std::vector<Vec> table;
  Vec fallback;                       // StateTable: control outside the grid
  std::function<Vec(std::span<const double>)> hook;
  std::string label;

  static ControlPolicy constant(Vec u);
  static ControlPolicy static_priority(std::vector<std::size_t> order);
  static ControlPolicy state_table(HistogramSpec grid, std::vector<Vec> table, Vec fallback);
  static ControlPolicy user_hook(std::function<Vec(std::span<const double>)> fn, std::string label = "hook");

  ControlVector operator()(std::span<const double> x) const;
  bool state_dependent() const { return kind == Kind::StateTable || kind == Kind::Hook; }
  std::string name() const;
};

struct SimConfig {
  double h = 1e-3;
  double horizon = 100.0;
  double burn_in = -1.0;  // negative: 10% of the horizon
  std::size_t replicas = 1;
  std::uint64_t seed = 1;
  Vec x0;                 // empty: origin
  double thin = 1.0;      // thinned-sample interval
  double blowup = 1e3;    // ‖x‖₁ guard
  std::size_t batches = 20;
  std::optional<HistogramSpec> histogram;
  Vec exp_rates, gauss_rates;
  std::vector<double> checkpoints;  // times at which every replica's state is recorded
  unsigned threads = 1;
  std::size_t lanes = 64;           // replicas advanced together by the step kernel

  double burn() const { return burn_in < 0.0 ? 0.1 * horizon : burn_in; }
  void validate() const;
};

struct ReplicaOutcome {
  bool blew_up = false;
  double blowup_time = 0.0;
  Vec terminal;
};

struct DiffusionRun {
  EmpiricalMeasure measure;
  std::vector<ReplicaOutcome> replicas;
  std::vector<std::vector<Vec>> snapshots;  // [checkpoint][replica]; empty once a replica blew up

  std::size_t blowups() const;
  std::string summary() const;
};

DiffusionRun simulate(const DiffusionSpec& d, const ControlPolicy& policy, const SimConfig& cfg);

struct IdlenessReport {
  double estimate = 0.0;
  double se = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares ∫⟨e,x⟩⁻dπ with ϱ; `rel_tol` is relative to |ϱ|.
IdlenessReport check_idleness_identity(const EmpiricalMeasure& measure, const DiffusionSpec& d, double rel_tol);

enum class TailForm { Exponential, SubGaussian };

struct TailDirection {
  enum class Kind { L1, NegPart, NegPartSum };
  Kind kind = Kind::L1;
  std::size_t index = 0;              // NegPart
  std::vector<std::size_t> subset;    // NegPartSum
  double project(std::span<const double> x) const;
  static TailDirection l1() { return {}; }
};

struct TailOptions {
  double lower_quantile = 0.5;   // fit starts at this quantile of the projected samples
  double min_tail_weight = 50.0; // fit stops where fewer samples remain beyond r
  std::size_t grid = 25;
};

struct TailFit {
  TailForm form = TailForm::Exponential;
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  std::size_t points = 0;
  Vec r, log_tail;  // fitted curve
};

class InsufficientData : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

TailFit estimate_tail(const EmpiricalMeasure& measure, TailForm form, const TailDirection& dir,
                      const TailOptions& opts = {});

struct RateOptions {
  std::size_t ensemble = 2000;
  double horizon = 10.0;
  std::size_t checkpoints = 40;
  double stationary_horizon = 2e4;
  std::size_t bins_per_dim = 8;
  double floor_factor = 2.0;  // window keeps d(t) above floor_factor × noise floor
};

struct RateEstimate {
  double gamma_hat = 0.0;
  double r2 = 0.0;
  std::size_t window = 0;
  bool flagged = false;
  std::string reason;
  double noise_floor = 0.0;
  Vec times, distances, probe_gap;
};

// cfg supplies h, seed, x₀, threads; the probe's mean along the ensemble is reported as a diagnostic.
RateEstimate estimate_rate(const DiffusionSpec& d, const ControlPolicy& policy, const SimConfig& cfg,
                           const LyapunovSpec& probe, const RateOptions& opts = {});

}  // namespace hwq

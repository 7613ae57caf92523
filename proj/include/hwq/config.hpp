#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hwq/diffusion.hpp"
#include "hwq/interarrival.hpp"
#include "hwq/lyapunov.hpp"
#include "hwq/model.hpp"
#include "hwq/queue.hpp"

namespace hwq {

// Config problems carry a location: "line L, column C" for syntax, a JSON pointer for content.
class ConfigError : public PreconditionError {
public:
  ConfigError(std::string where, const std::string& what)
      : PreconditionError(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

private:
  std::string where_;
};

struct LawEntry {
  std::string family = "exponential";  // exponential | hyperexponential | erlang | lognormal
  double scv = 1.0;
  int k = 1;
};

struct ArrivalEntry {
  std::string kind = "poisson";  // poisson | renewal
  std::vector<LawEntry> laws;
};

struct PolicyEntry {
  std::string id;
  std::string kind;  // constant | priority | lqf | random
  Vec u;
  std::vector<std::size_t> order;  // highest priority first, 0-based
  std::uint64_t seed = 0;
};

struct LyapunovOverride {
  std::optional<double> epsilon, theta, eta, p;
};

struct SimBlock {
  double h = 1e-3;
  double horizon = 100.0;
  double burn_in = -1.0;
  std::size_t replicas = 1;
  Vec x0;
  double thin = 1.0;
  double blowup = 1e3;
  std::size_t batches = 20;
  std::optional<HistogramSpec> histogram;
  Vec exp_rates, gauss_rates;
  std::vector<std::string> policies;  // ids; empty means every policy
};

struct VerifyBlock {
  std::vector<std::string> suites;  // lemma21 T21 T22 R26 L22 T23 C31 T34 T31
  std::size_t samples = 100000;
  double radius = 0.0;              // 0: per-suite default
  double enrichment = 0.3;
  std::vector<double> c_levels{1.0, 5.0, kInf};
  std::size_t prelimit_states = 10000;
  double prelimit_radius = 40.0;
  int max_expansions = 3;
};

struct TailsBlock {
  std::vector<std::string> directions{"l1"};  // l1 | neg:<i> | negsum
  double lower_quantile = 0.5;
  double min_tail_weight = 50.0;
  std::size_t grid = 25;
  bool rate = false;            // also estimate the convergence rate per policy
  std::size_t rate_ensemble = 2000;
  double rate_horizon = 10.0;
};

struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  SystemParams system;
  std::vector<std::size_t> n_list;
  ArrivalEntry arrivals;
  std::vector<PolicyEntry> policies;
  std::map<std::string, LyapunovOverride> lyapunov;
  SimBlock sim;
  VerifyBlock verify;
  TailsBlock tails;
  std::string output_dir = "results";

  ArrivalSpec arrival_spec() const;
  const PolicyEntry& policy(const std::string& id) const;
  std::vector<const PolicyEntry*> sim_policies() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

Interarrival make_law(const LawEntry& e);
ControlPolicy make_control_policy(const PolicyEntry& e, std::size_t m);
SchedulingPolicy make_scheduling_policy(const PolicyEntry& e, std::size_t m);

}  // namespace hwq

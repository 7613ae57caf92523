#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hwq/config.hpp"

namespace hwq {

enum class Command { VerifyDrift, SimDiffusion, SimQueue, GeneratorCheck, Tails, Report };
const char* command_name(Command c);
std::optional<Command> parse_command(const std::string& name);

struct CommandOptions {
  std::string config;                          // required except for report
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out;              // overrides the config's output directory
  unsigned threads = 1;
  bool overwrite = false;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitViolations = 1;
inline constexpr int kExitError = 2;

// Runs one subcommand; progress goes to `out`, diagnostics to `err`. Returns the exit status.
int run_command(Command cmd, const CommandOptions& opts, std::ostream& out, std::ostream& err);
// Same, on an already parsed configuration (seed override and output directory are applied here).
int run_command(Command cmd, ExperimentConfig cfg, const CommandOptions& opts, std::ostream& out, std::ostream& err);

struct ResultRecord {
  std::string scenario, operation;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  bool pass = true;
};

std::string results_csv_header();
std::string to_csv(const ResultRecord& r);
// Parses results.csv; malformed lines are skipped and counted.
std::vector<ResultRecord> read_results(const std::string& path, std::size_t* skipped = nullptr);
void append_results(const std::string& path, const std::vector<ResultRecord>& records);

// Shortest text that reads back to the same double.
std::string fmt_double(double v);

}  // namespace hwq

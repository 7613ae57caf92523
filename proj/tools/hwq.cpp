#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hwq/commands.hpp"
#include "hwq/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Many-server queue diffusion toolkit: drift verification and simulation"};
  app.require_subcommand(1);

  hwq::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out;
  std::string backend;
  app.add_option("--config", opts.config, "experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed-override", seed, "replace the scenario seed");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--overwrite", opts.overwrite, "replace existing output files");
  app.add_option("--backend", backend, "kernel backend")->check(CLI::IsMember({"scalar", "avx2"}));

  struct Sub {
    hwq::Command cmd;
    const char* help;
  };
  const Sub subs[] = {
      {hwq::Command::VerifyDrift, "certify drift inequalities on sampled states"},
      {hwq::Command::SimDiffusion, "simulate the limiting diffusion"},
      {hwq::Command::SimQueue, "simulate the n-server systems"},
      {hwq::Command::GeneratorCheck, "compare prelimit and diffusion generators across n"},
      {hwq::Command::Tails, "fit stationary tails (and optionally convergence rates)"},
      {hwq::Command::Report, "consolidate results.csv into a report"},
  };
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(hwq::command_name(s.cmd), s.help);
    // global flags are also accepted after the subcommand
    sc->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hwq::kExitError;
  }
  if (*seed_opt) opts.seed_override = seed;
  if (*out_opt) opts.out = out;
  try {
    if (backend == "scalar") hwq::kernels::set_backend(hwq::kernels::Backend::Scalar);
    if (backend == "avx2") hwq::kernels::set_backend(hwq::kernels::Backend::Avx2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hwq::kExitError;
  }

  for (const auto& s : subs)
    if (app.got_subcommand(hwq::command_name(s.cmd))) return hwq::run_command(s.cmd, opts, std::cout, std::cerr);
  return hwq::kExitError;
}

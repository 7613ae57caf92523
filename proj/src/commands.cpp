#include "hwq/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "hwq/fit.hpp"
#include "hwq/prelimit.hpp"
#include "hwq/rng.hpp"
#include "hwq/sampling.hpp"
#include "hwq/verifier.hpp"

namespace hwq {

namespace fs = std::filesystem;

const char* command_name(Command c) {
  switch (c) {
    case Command::VerifyDrift: return "verify-drift";
    case Command::SimDiffusion: return "sim-diffusion";
    case Command::SimQueue: return "sim-queue";
    case Command::GeneratorCheck: return "generator-check";
    case Command::Tails: return "tails";
    case Command::Report: return "report";
  }
  return "?";
}

std::optional<Command> parse_command(const std::string& name) {
  for (Command c : {Command::VerifyDrift, Command::SimDiffusion, Command::SimQueue, Command::GeneratorCheck,
                    Command::Tails, Command::Report})
    if (name == command_name(c)) return c;
  return std::nullopt;
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string results_csv_header() { return "scenario,operation,seed,timestamp,metric,value,stderr,pass"; }

std::string to_csv(const ResultRecord& r) {
  std::ostringstream os;
  os << r.scenario << ',' << r.operation << ',' << r.seed << ',' << r.timestamp << ',' << r.metric << ','
     << fmt_double(r.value) << ',' << fmt_double(r.stderr_) << ',' << (r.pass ? "true" : "false");
  return os.str();
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

}  // namespace

std::vector<ResultRecord> read_results(const std::string& path, std::size_t* skipped) {
  std::vector<ResultRecord> out;
  std::size_t bad = 0;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line == results_csv_header()) continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    try {
      if (f.size() != 8 || (f[7] != "true" && f[7] != "false")) throw std::invalid_argument("shape");
      ResultRecord r;
      r.scenario = f[0];
      r.operation = f[1];
      r.seed = std::stoull(f[2]);
      r.timestamp = f[3];
      r.metric = f[4];
      r.value = parse_double(f[5]);
      r.stderr_ = parse_double(f[6]);
      r.pass = f[7] == "true";
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      ++bad;
    }
  }
  if (skipped) *skipped = bad;
  return out;
}

void append_results(const std::string& path, const std::vector<ResultRecord>& records) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot append to " + path);
  if (fresh) os << results_csv_header() << '\n';
  for (const auto& r : records) os << to_csv(r) << '\n';
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Collects the files a command will write and the records it will append.
class Session {
public:
  Session(const ExperimentConfig& cfg, std::string dir, bool overwrite, std::ostream& out)
      : cfg_(cfg), dir_(std::move(dir)), overwrite_(overwrite), out_(out), stamp_(utc_now()) {}

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void plan(const std::string& name) { planned_.push_back(name); }
  void check_collisions() const {
    if (overwrite_) return;
    for (const auto& n : planned_)
      if (fs::exists(path(n))) throw OutputError("output file " + path(n) + " exists; pass --overwrite to replace it");
  }
  void write(const std::string& name, const std::string& text) {
    fs::create_directories(dir_);
    std::ofstream os(path(name), std::ios::binary | std::ios::trunc);
    if (!os) throw OutputError("cannot write " + path(name));
    os << text;
  }
  void record(const std::string& op, const std::string& metric, double value, double se = 0.0, bool pass = true) {
    records_.push_back({cfg_.scenario, op, cfg_.seed, stamp_, metric, value, se, pass});
  }
  void flush() {
    fs::create_directories(dir_);
    append_results(path("results.csv"), records_);
    out_ << "appended " << records_.size() << " records to " << path("results.csv") << '\n';
  }
  std::ostream& out() { return out_; }

private:
  const ExperimentConfig& cfg_;
  std::string dir_;
  bool overwrite_;
  std::ostream& out_;
  std::string stamp_;
  std::vector<std::string> planned_;
  std::vector<ResultRecord> records_;
};

void apply_override(LyapunovSpec& spec, const ExperimentConfig& cfg, const std::string& goal) {
  const auto it = cfg.lyapunov.find(goal);
  if (it == cfg.lyapunov.end()) return;
  if (it->second.epsilon) spec.epsilon = *it->second.epsilon;
  if (it->second.theta) spec.theta = *it->second.theta;
  if (it->second.eta) spec.eta = *it->second.eta;
  if (it->second.p) spec.p = *it->second.p;
}

SimConfig sim_config(const ExperimentConfig& cfg, unsigned threads) {
  const SimBlock& b = cfg.sim;
  SimConfig s;
  s.h = b.h;
  s.horizon = b.horizon;
  s.burn_in = b.burn_in;
  s.replicas = b.replicas;
  s.seed = cfg.seed;
  s.x0 = b.x0;
  s.thin = b.thin;
  s.blowup = b.blowup;
  s.batches = b.batches;
  s.histogram = b.histogram;
  s.exp_rates = b.exp_rates;
  s.gauss_rates = b.gauss_rates;
  s.threads = threads;
  return s;
}

// ---------------------------------------------------------------- verify-drift

const std::vector<std::string> kDiffusionSuites{"lemma21", "T21", "T22", "R26", "L22", "T23"};
const std::vector<std::string> kPrelimitSuites{"C31", "T34", "T31"};

bool positive_spare(const ExperimentConfig& cfg) { return spare_capacity(cfg.system) > 0.0; }
bool all_abandon(const ExperimentConfig& cfg) { return cfg.system.beta_min() > 0.0; }

// Whether a suite can run on this configuration at all; used to pick the default suite list.
std::optional<std::string> infeasible_reason(const std::string& suite, const ExperimentConfig& cfg) {
  const bool renewal = cfg.arrivals.kind == "renewal";
  if (suite == "lemma21" || suite == "T21" || suite == "L22" || suite == "T23")
    if (!positive_spare(cfg)) return "needs positive spare capacity";
  if (suite == "T22" || suite == "R26")
    if (!all_abandon(cfg)) return "needs every abandonment rate positive";
  if (suite == "C31" || suite == "T34" || suite == "T31") {
    if (cfg.n_list.empty()) return "needs a prelimit n list";
    if (suite == "T31") {
      if (!renewal) return "needs renewal arrivals";
      for (const auto& l : cfg.arrivals.laws)
        if (!make_law(l).bounded_mrl()) return "needs bounded mean residual life";
    } else if (renewal) {
      return "needs Poisson arrivals";
    }
    if (suite == "T34" && !all_abandon(cfg)) return "needs every abandonment rate positive";
    if (suite != "T34")
      for (std::size_t n : cfg.n_list)
        if (!(PrelimitParams::from_system(cfg.system, n).varrho_n() > 0.0)) return "needs positive prelimit spare capacity";
  }
  return std::nullopt;
}

double default_radius(const std::string& suite, const LyapunovSpec& spec, const VerifyBlock& vb) {
  if (vb.radius > 0.0) return vb.radius;
  if (suite == "lemma21" || suite == "T21" || suite == "T22" || suite == "L22" || suite == "T23")
    return 3.0 * static_cast<double>(spec.m()) / spec.epsilon;
  return 20.0;
}

SamplerConfig sampler_for(const ExperimentConfig& cfg, const LyapunovSpec& spec) {
  SamplerConfig s;
  s.seed = cfg.seed;
  s.count = cfg.verify.samples;
  s.enrichment = cfg.verify.enrichment;
  s.joints = curvature_joints(spec);
  return s;
}

// Diagnostics are informative variants that never decide the exit status.
std::vector<VerificationReport> run_suite(const std::string& suite, const ExperimentConfig& cfg, unsigned threads,
                                          std::ostream& out, std::vector<VerificationReport>& diagnostics) {
  const DiffusionSpec d = DiffusionSpec::from_system(cfg.system);
  VerifyOptions vo;
  vo.threads = threads;
  vo.max_expansions = cfg.verify.max_expansions;
  std::vector<VerificationReport> reps;
  auto note = [&](const VerificationReport& r) {
    out << "  " << r.id << ": " << (r.passed ? "pass" : "FAIL") << " (" << r.samples << " samples, "
        << r.violations << " violations)\n";
    reps.push_back(r);
  };

  if (suite == "lemma21") {
    LyapunovSpec spec = select_parameters(Goal::T21, cfg.system);
    apply_override(spec, cfg, "lemma21");
    const Region region = Region::full(default_radius(suite, spec, cfg.verify));
    for (double c : cfg.verify.c_levels) {
      VerificationReport r = verify_lemma21(d, spec, c, region, sampler_for(cfg, spec), vo);
      r.id = std::isinf(c) ? "lemma21_cinf" : "lemma21_c" + fmt_double(c);
      note(r);
    }
  } else if (suite == "T21") {
    LyapunovSpec spec = select_parameters(Goal::T21, cfg.system);
    apply_override(spec, cfg, "T21");
    const Region region = Region::full(default_radius(suite, spec, cfg.verify));
    note(verify_foster_T21(d, spec, region, sampler_for(cfg, spec), vo));
    VerificationReport scaled = verify_foster_T21(d, spec, region, sampler_for(cfg, spec), vo, 0.5);
    scaled.note = "diagnostic: negative-part decay coefficient halved; not the stated inequality";
    out << "  " << scaled.id << ": " << (scaled.passed ? "pass" : "FAIL") << " (diagnostic)\n";
    diagnostics.push_back(scaled);
  } else if (suite == "T22") {
    LyapunovSpec spec = select_parameters(Goal::T22, cfg.system);
    apply_override(spec, cfg, "T22");
    note(verify_foster_T22(d, spec, Region::full(default_radius(suite, spec, cfg.verify)), sampler_for(cfg, spec), vo));
  } else if (suite == "R26") {
    LyapunovSpec spec = select_parameters(Goal::R26, cfg.system);
    apply_override(spec, cfg, "R26");
    note(verify_R26(d, spec.eta, Region::full(default_radius(suite, spec, cfg.verify)), sampler_for(cfg, spec), vo));
  } else if (suite == "L22" || suite == "T23") {
    SpecPair pair{select_parameters(suite == "L22" ? Goal::L22 : Goal::T23, cfg.system),
                  select_parameters(Goal::T21, cfg.system)};
    apply_override(pair.negpart, cfg, suite);
    apply_override(pair.base, cfg, "T21");
    SamplerConfig sc = sampler_for(cfg, pair.base);
    for (double j : curvature_joints(pair.negpart)) sc.joints.push_back(j);
    note(verify_L22_T23(d, pair, Region::full(default_radius(suite, pair.base, cfg.verify)), sc, vo));
  } else {
    const PrelimitMode mode = suite == "C31" ? PrelimitMode::C31 : suite == "T34" ? PrelimitMode::T34 : PrelimitMode::T31;
    const ArrivalSpec arr = cfg.arrival_spec();
    for (std::size_t n : cfg.n_list) {
      const PrelimitParams p = PrelimitParams::from_system(cfg.system, n);
      PrelimitSampling ps;
      ps.seed = cfg.seed;
      ps.states = cfg.verify.prelimit_states;
      ps.radius = cfg.verify.prelimit_radius;
      ps.threads = threads;
      ps.max_expansions = cfg.verify.max_expansions;
      double eta = 1.0;
      if (auto it = cfg.lyapunov.find(suite); it != cfg.lyapunov.end() && it->second.eta) eta = *it->second.eta;
      LyapunovSpec spec = select_prelimit_parameters(mode, p, arr, ps, eta);
      apply_override(spec, cfg, suite);
      VerificationReport r = verify_prelimit_foster(mode, p, arr, spec, ps);
      r.id = suite + "_n" + std::to_string(n);
      note(r);
    }
  }
  return reps;
}

int cmd_verify(const ExperimentConfig& cfg, Session& ses, unsigned threads) {
  std::vector<std::string> suites = cfg.verify.suites;
  const bool explicit_list = !suites.empty();
  if (!explicit_list) {
    for (const auto& s : kDiffusionSuites) suites.push_back(s);
    for (const auto& s : kPrelimitSuites) suites.push_back(s);
  }
  std::vector<std::string> run;
  for (const auto& s : suites) {
    const auto why = infeasible_reason(s, cfg);
    if (!why) {
      run.push_back(s);
    } else if (explicit_list) {
      throw InfeasibleGoal(s + ": " + *why);
    } else {
      ses.out() << "skipping " << s << ": " << *why << '\n';
      ses.record("verify:" + s, "skipped", 1.0);
    }
  }
  const std::string csv = "verify_" + cfg.scenario + ".csv";
  const std::string detail = "verify_" + cfg.scenario + "_detail.json";
  ses.plan(csv);
  ses.plan(detail);
  ses.check_collisions();

  std::vector<VerificationReport> all, diagnostics;
  for (const auto& s : run) {
    ses.out() << "suite " << s << '\n';
    for (auto& r : run_suite(s, cfg, threads, ses.out(), diagnostics)) all.push_back(std::move(r));
  }
  const std::size_t decisive = all.size();
  for (auto& r : diagnostics) all.push_back(std::move(r));
  std::ostringstream rows, det;
  rows << VerificationReport::csv_header() << '\n';
  det << "[\n";
  bool ok = true;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto& r = all[k];
    rows << r.csv_row() << '\n';
    det << r.detail() << (k + 1 < all.size() ? ",\n" : "\n");
    const bool diag = k >= decisive;
    const std::string op = (diag ? "verify-diagnostic:" : "verify:") + r.id;
    ses.record(op, "violations", static_cast<double>(r.violations), 0.0, r.violations == 0);
    ses.record(op, "worst_margin", r.worst_margin, 0.0, r.passed);
    for (const auto& [k2, v] : r.constants) ses.record(op, k2, v);
    ses.record(op, "passed", r.passed ? 1.0 : 0.0, 0.0, r.passed);
    if (!diag) ok = ok && r.passed;
  }
  det << "]\n";
  ses.write(csv, rows.str());
  ses.write(detail, det.str());
  return ok ? kExitPass : kExitViolations;
}

// ---------------------------------------------------------------- simulators

std::string run_base(const std::string& prefix, const ExperimentConfig& cfg, const std::string& tag) {
  return prefix + "_" + cfg.scenario + "_" + tag;
}

void plan_measure(Session& ses, const std::string& base, const ExperimentConfig& cfg) {
  ses.plan(base + "_summary.txt");
  ses.plan(base + "_samples.csv");
  if (cfg.sim.histogram) ses.plan(base + "_hist.csv");
}

void write_measure(Session& ses, const std::string& base, const EmpiricalMeasure& m, const std::string& summary) {
  ses.write(base + "_summary.txt", summary);
  ses.write(base + "_samples.csv", m.samples_csv());
  if (m.options().histogram) ses.write(base + "_hist.csv", m.histogram_csv());
}

std::vector<const PolicyEntry*> required_policies(const ExperimentConfig& cfg) {
  auto pols = cfg.sim_policies();
  if (pols.empty()) throw ConfigError("/policies", "policy list is empty");
  return pols;
}

int cmd_sim_diffusion(const ExperimentConfig& cfg, Session& ses, unsigned threads) {
  const auto pols = required_policies(cfg);
  const DiffusionSpec d = DiffusionSpec::from_system(cfg.system);
  std::vector<ControlPolicy> controls;
  for (const auto* pe : pols) controls.push_back(make_control_policy(*pe, cfg.system.m));
  for (const auto* pe : pols) plan_measure(ses, run_base("diffusion", cfg, pe->id), cfg);
  ses.check_collisions();
  const SimConfig sc = sim_config(cfg, threads);
  const bool gamma_zero = std::all_of(d.gamma.begin(), d.gamma.end(), [](double g) { return g == 0.0; });
  for (std::size_t k = 0; k < pols.size(); ++k) {
    const std::string op = "sim-diffusion:" + pols[k]->id;
    ses.out() << "diffusion under " << pols[k]->id << '\n';
    const DiffusionRun run = simulate(d, controls[k], sc);
    std::ostringstream summary;
    summary << "policy " << pols[k]->id << " (" << controls[k].name() << ")\n" << run.summary();
    const MeanSE neg = run.measure.neg_sum(), l1 = run.measure.l1();
    ses.record(op, "neg_sum", neg.mean, neg.se);
    ses.record(op, "l1", l1.mean, l1.se);
    ses.record(op, "replicas", static_cast<double>(run.replicas.size()));
    ses.record(op, "blowups", static_cast<double>(run.blowups()));
    if (gamma_zero && d.varrho > 0.0 && run.blowups() == 0 && run.measure.total_weight() > 0.0) {
      const IdlenessReport idr = check_idleness_identity(run.measure, d, 0.05);
      ses.record(op, "idleness_identity", idr.estimate, idr.se, idr.passed);
      summary << "idleness identity: estimate " << fmt_double(idr.estimate) << " se " << fmt_double(idr.se)
              << " target " << fmt_double(idr.target) << (idr.passed ? " pass" : " FAIL") << '\n';
    }
    write_measure(ses, run_base("diffusion", cfg, pols[k]->id), run.measure, summary.str());
  }
  return kExitPass;
}

int cmd_sim_queue(const ExperimentConfig& cfg, Session& ses, unsigned threads) {
  if (cfg.n_list.empty()) throw ConfigError("/prelimit/n", "sim-queue needs at least one server count");
  const auto pols = required_policies(cfg);
  std::vector<SchedulingPolicy> scheds;
  for (const auto* pe : pols) scheds.push_back(make_scheduling_policy(*pe, cfg.system.m));
  const ArrivalSpec arr = cfg.arrival_spec();
  arr.validate(cfg.system.m);
  for (std::size_t n : cfg.n_list)
    for (const auto* pe : pols) plan_measure(ses, run_base("queue", cfg, "n" + std::to_string(n) + "_" + pe->id), cfg);
  ses.check_collisions();
  const SimConfig sc = sim_config(cfg, threads);
  bool ok = true;
  for (std::size_t n : cfg.n_list) {
    const PrelimitParams p = PrelimitParams::from_system(cfg.system, n);
    const bool gamma_zero = std::all_of(p.gamma_n().begin(), p.gamma_n().end(), [](double g) { return g == 0.0; });
    for (std::size_t k = 0; k < pols.size(); ++k) {
      const std::string tag = "n" + std::to_string(n) + "_" + pols[k]->id;
      const std::string op = "sim-queue:" + tag;
      ses.out() << "queue n=" << n << " under " << pols[k]->id << '\n';
      const QueueRun run = arr.is_renewal() ? simulate_renewal(p, arr, scheds[k], sc) : simulate_ctmc(p, scheds[k], sc);
      std::ostringstream summary;
      summary << "n " << n << " policy " << pols[k]->id << " (" << scheds[k].name() << ") spare "
              << fmt_double(p.varrho_n()) << '\n'
              << run.summary();
      const MeanSE neg = run.measure.neg_sum(), l1 = run.measure.l1();
      ses.record(op, "varrho_n", p.varrho_n());
      ses.record(op, "neg_sum", neg.mean, neg.se);
      ses.record(op, "l1", l1.mean, l1.se);
      ses.record(op, "replicas", static_cast<double>(run.replicas.size()));
      ses.record(op, "blowups", static_cast<double>(run.blowups()));
      ses.record(op, "events", static_cast<double>(run.counts.events));
      const bool consistent = run.counts.conservation_failures == 0 && run.counts.roundtrip_failures == 0 &&
                              run.counts.rate_mismatches == 0;
      ses.record(op, "conservation_failures", static_cast<double>(run.counts.conservation_failures), 0.0,
                 run.counts.conservation_failures == 0);
      ses.record(op, "roundtrip_failures", static_cast<double>(run.counts.roundtrip_failures), 0.0,
                 run.counts.roundtrip_failures == 0);
      ses.record(op, "rate_mismatches", static_cast<double>(run.counts.rate_mismatches), 0.0,
                 run.counts.rate_mismatches == 0);
      ok = ok && consistent;
      if (gamma_zero && p.varrho_n() > 0.0 && run.blowups() == 0 && run.measure.total_weight() > 0.0) {
        const double gap = std::fabs(neg.mean - p.varrho_n()) / p.varrho_n();
        ses.record(op, "idleness_rel_gap", gap, neg.se / p.varrho_n(), gap <= 0.1);
        summary << "idleness: estimate " << fmt_double(neg.mean) << " target " << fmt_double(p.varrho_n())
                << " relative gap " << fmt_double(gap) << '\n';
      }
      write_measure(ses, run_base("queue", cfg, tag), run.measure, summary.str());
    }
  }
  return ok ? kExitPass : kExitViolations;
}

// ---------------------------------------------------------------- generator-check

LyapunovSpec consistency_spec(const ExperimentConfig& cfg) {
  LyapunovSpec spec;
  if (positive_spare(cfg)) {
    spec = select_parameters(Goal::T21, cfg.system);
  } else {
    spec.family = Family::ExpLinear;
    spec.epsilon = 0.1;
    spec.theta = 0.1;
    spec.mu = cfg.system.mu;
  }
  apply_override(spec, cfg, "T21");
  spec.validate();
  return spec;
}

struct ConsistencyPair {
  Vec xhat;
  Vec u;
};

std::vector<ConsistencyPair> consistency_pairs(std::size_t m, std::uint64_t seed, std::size_t count) {
  std::vector<ConsistencyPair> out;
  for (std::size_t k = 0; k < count; ++k) {
    SampleDraws dr(derive_seed(seed, 0x6e0000 + k));
    ConsistencyPair pr;
    pr.xhat.resize(m);
    for (auto& v : pr.xhat) v = 3.0 * dr.uniform() - 1.5;
    pr.u = dirichlet_point(m, dr.bits());
    out.push_back(std::move(pr));
  }
  return out;
}

int cmd_generator_check(const ExperimentConfig& cfg, Session& ses) {
  if (cfg.n_list.size() < 2) throw ConfigError("/prelimit/n", "generator-check needs at least two server counts");
  const std::string name = "generator_" + cfg.scenario + ".csv";
  ses.plan(name);
  ses.check_collisions();
  const LyapunovSpec spec = consistency_spec(cfg);
  const std::size_t m = cfg.system.m;
  const auto pairs = consistency_pairs(m, cfg.seed, 20);
  std::ostringstream csv;
  csv << "pair,n";
  for (std::size_t i = 0; i < m; ++i) csv << ",xhat_" << i + 1;
  for (std::size_t i = 0; i < m; ++i) csv << ",u_" << i + 1;
  csv << ",prelimit,diffusion,error,slope\n";
  double worst = -kInf;
  Vec cx, cy;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::vector<ConsistencyPoint> pts;
    Vec ln, le;
    for (std::size_t n : cfg.n_list) {
      pts.push_back(generator_consistency(cfg.system, spec, pairs[k].xhat, ControlVector(pairs[k].u), n));
      ln.push_back(std::log(static_cast<double>(n)));
      le.push_back(std::log(pts.back().error()));
    }
    const double slope = fit_line(ln, le).slope;
    worst = std::max(worst, slope);
    ses.record("generator-check", "slope_pair" + std::to_string(k), slope, 0.0, slope <= -0.4);
    const double mx = std::accumulate(ln.begin(), ln.end(), 0.0) / static_cast<double>(ln.size());
    const double my = std::accumulate(le.begin(), le.end(), 0.0) / static_cast<double>(le.size());
    for (std::size_t j = 0; j < ln.size(); ++j) {
      cx.push_back(ln[j] - mx);
      cy.push_back(le[j] - my);
    }
    for (const auto& c : pts) {
      csv << k << ',' << c.n;
      for (double v : c.xhat) csv << ',' << fmt_double(v);
      for (double v : c.u) csv << ',' << fmt_double(v);
      csv << ',' << fmt_double(c.prelimit) << ',' << fmt_double(c.diffusion) << ',' << fmt_double(c.error()) << ','
          << fmt_double(slope) << '\n';
    }
  }
  // common slope with per-pair intercepts decides; single pairs can be pre-asymptotic at small n
  const double pooled = fit_line(cx, cy).slope;
  const bool ok = pooled <= -0.4;
  ses.record("generator-check", "max_slope", worst, 0.0, worst <= -0.4);
  ses.record("generator-check", "pooled_slope", pooled, 0.0, ok);
  ses.out() << "generator consistency: pooled slope " << fmt_double(pooled) << ", worst pair " << fmt_double(worst)
            << (ok ? " pass" : " FAIL") << '\n';
  ses.write(name, csv.str());
  return ok ? kExitPass : kExitViolations;
}

// ---------------------------------------------------------------- tails

TailDirection parse_direction(const std::string& s, const SystemParams& sys) {
  TailDirection d;
  if (s == "l1") return d;
  if (s == "negsum") {
    d.kind = TailDirection::Kind::NegPartSum;
    d.subset = slow_abandonment_classes(sys);
    return d;
  }
  d.kind = TailDirection::Kind::NegPart;
  d.index = std::stoul(s.substr(4));
  return d;
}

const char* form_name(TailForm f) { return f == TailForm::Exponential ? "exponential" : "subgaussian"; }

int cmd_tails(const ExperimentConfig& cfg, Session& ses, unsigned threads) {
  const auto pols = required_policies(cfg);
  std::vector<ControlPolicy> controls;
  for (const auto* pe : pols) controls.push_back(make_control_policy(*pe, cfg.system.m));
  const std::string fits = "tails_" + cfg.scenario + ".csv";
  const std::string curves = "tails_" + cfg.scenario + "_curves.csv";
  const std::string rates = "tails_" + cfg.scenario + "_rate.csv";
  ses.plan(fits);
  ses.plan(curves);
  if (cfg.tails.rate) ses.plan(rates);
  ses.check_collisions();

  const DiffusionSpec d = DiffusionSpec::from_system(cfg.system);
  const SimConfig sc = sim_config(cfg, threads);
  TailOptions to;
  to.lower_quantile = cfg.tails.lower_quantile;
  to.min_tail_weight = cfg.tails.min_tail_weight;
  to.grid = cfg.tails.grid;
  std::ostringstream fcsv, ccsv, rcsv;
  fcsv << "policy,direction,form,slope,intercept,r2,r_lo,r_hi,points,status\n";
  ccsv << "policy,direction,form,r,log_tail\n";
  rcsv << "policy,t,distance,log_distance\n";
  bool ok = true;
  for (std::size_t k = 0; k < pols.size(); ++k) {
    ses.out() << "tails under " << pols[k]->id << '\n';
    const DiffusionRun run = simulate(d, controls[k], sc);
    ses.record("tails:" + pols[k]->id, "blowups", static_cast<double>(run.blowups()), 0.0, run.blowups() == 0);
    for (const auto& dir_name : cfg.tails.directions) {
      const TailDirection dir = parse_direction(dir_name, cfg.system);
      double r2[2] = {std::nan(""), std::nan("")};
      for (TailForm form : {TailForm::Exponential, TailForm::SubGaussian}) {
        const std::string op = "tails:" + pols[k]->id + ":" + dir_name + ":" + form_name(form);
        try {
          const TailFit fit = estimate_tail(run.measure, form, dir, to);
          r2[form == TailForm::Exponential ? 0 : 1] = fit.r2;
          fcsv << pols[k]->id << ',' << dir_name << ',' << form_name(form) << ',' << fmt_double(fit.slope) << ','
               << fmt_double(fit.intercept) << ',' << fmt_double(fit.r2) << ',' << fmt_double(fit.r_lo) << ','
               << fmt_double(fit.r_hi) << ',' << fit.points << ",ok\n";
          for (std::size_t j = 0; j < fit.r.size(); ++j)
            ccsv << pols[k]->id << ',' << dir_name << ',' << form_name(form) << ',' << fmt_double(fit.r[j]) << ','
                 << fmt_double(fit.log_tail[j]) << '\n';
          ses.record(op, "slope", fit.slope, 0.0, fit.slope < 0.0);
          ses.record(op, "r2", fit.r2);
        } catch (const InsufficientData& e) {
          fcsv << pols[k]->id << ',' << dir_name << ',' << form_name(form) << ",nan,nan,nan,nan,nan,0,insufficient\n";
          ses.record(op, "insufficient_data", 1.0, 0.0, false);
          ses.out() << "  " << op << ": " << e.what() << '\n';
          ok = false;
        }
      }
      if (!std::isnan(r2[0]) && !std::isnan(r2[1]))
        ses.record("tails:" + pols[k]->id + ":" + dir_name, "r2_gap_subgaussian_minus_exponential", r2[1] - r2[0]);
    }
    if (cfg.tails.rate) {
      LyapunovSpec probe = consistency_spec(cfg);
      RateOptions ro;
      ro.ensemble = cfg.tails.rate_ensemble;
      ro.horizon = cfg.tails.rate_horizon;
      const RateEstimate est = estimate_rate(d, controls[k], sc, probe, ro);
      ses.record("rate:" + pols[k]->id, "gamma_hat", est.gamma_hat, 0.0, !est.flagged && est.gamma_hat > 0.0);
      ses.record("rate:" + pols[k]->id, "r2", est.r2);
      if (est.flagged) ses.out() << "  rate flagged: " << est.reason << '\n';
      for (std::size_t j = 0; j < est.times.size(); ++j)
        rcsv << pols[k]->id << ',' << fmt_double(est.times[j]) << ',' << fmt_double(est.distances[j]) << ','
             << fmt_double(std::log(est.distances[j])) << '\n';
      ok = ok && !est.flagged;
    }
  }
  ses.write(fits, fcsv.str());
  ses.write(curves, ccsv.str());
  if (cfg.tails.rate) ses.write(rates, rcsv.str());
  return ok ? kExitPass : kExitViolations;
}

// ---------------------------------------------------------------- report

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Copies the data rows of each scenario's file into one table prefixed by the scenario id.
std::string join_tables(const std::string& dir, const std::set<std::string>& scenarios, const std::string& prefix,
                        const std::string& suffix, std::vector<std::string>& missing, bool required_for_all) {
  std::ostringstream os;
  bool header = false;
  for (const auto& sc : scenarios) {
    const std::string path = (fs::path(dir) / (prefix + sc + suffix)).string();
    if (!fs::exists(path)) {
      if (required_for_all) missing.push_back(path);
      continue;
    }
    std::istringstream in(read_file(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (!header) {
          os << "scenario," << line << '\n';
          header = true;
        }
        continue;
      }
      if (!line.empty()) os << sc << ',' << line << '\n';
    }
  }
  return os.str();
}

int cmd_report(const std::string& dir, std::ostream& out, std::ostream& err) {
  const std::string path = (fs::path(dir) / "results.csv").string();
  std::size_t skipped = 0;
  const std::vector<ResultRecord> recs = fs::exists(path) ? read_results(path, &skipped) : std::vector<ResultRecord>{};
  if (recs.empty()) {
    out << "no records in " << dir << '\n';
    return kExitPass;
  }
  // latest record per (scenario, operation, metric), with first-seen ordering
  std::map<std::string, std::vector<std::string>> ops_by_scenario;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> latest;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> metrics_by_op;
  std::map<std::pair<std::string, std::string>, std::size_t> runs;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& r = recs[k];
    auto& ops = ops_by_scenario[r.scenario];
    if (std::find(ops.begin(), ops.end(), r.operation) == ops.end()) ops.push_back(r.operation);
    const auto key = std::make_tuple(r.scenario, r.operation, r.metric);
    auto& ms = metrics_by_op[{r.scenario, r.operation}];
    if (!latest.count(key)) ms.push_back(r.metric);
    latest[key] = k;
  }
  std::set<std::string> stamps_seen;
  for (const auto& r : recs) {
    const std::string tag = r.scenario + "\x1f" + r.operation + "\x1f" + r.timestamp;
    if (stamps_seen.insert(tag).second) ++runs[{r.scenario, r.operation}];
  }

  std::ostringstream txt, csv;
  csv << results_csv_header() << '\n';
  std::set<std::string> scenarios;
  std::size_t failing = 0;
  for (const auto& [sc, ops] : ops_by_scenario) {
    scenarios.insert(sc);
    txt << "scenario " << sc << '\n';
    for (const auto& op : ops) {
      const auto& ms = metrics_by_op[{sc, op}];
      bool pass = true;
      for (const auto& m : ms) pass = pass && recs[latest[{sc, op, m}]].pass;
      failing += pass ? 0 : 1;
      txt << "  " << op << "  [" << (pass ? "pass" : "FAIL") << ", runs " << runs[{sc, op}] << "]\n";
      for (const auto& m : ms) {
        const auto& r = recs[latest[{sc, op, m}]];
        txt << "    " << m << " = " << fmt_double(r.value);
        if (r.stderr_ != 0.0) txt << " +- " << fmt_double(r.stderr_);
        if (!r.pass) txt << "  FAIL";
        txt << '\n';
        csv << to_csv(r) << '\n';
      }
    }
  }

  std::vector<std::string> missing;
  auto has_op = [&](const std::string& sc, const std::string& prefix) {
    for (const auto& op : ops_by_scenario[sc])
      if (op.rfind(prefix, 0) == 0) return true;
    return false;
  };
  std::set<std::string> with_tails, with_rates, with_gen, with_verify;
  for (const auto& sc : scenarios) {
    if (has_op(sc, "tails:")) with_tails.insert(sc);
    if (has_op(sc, "rate:")) with_rates.insert(sc);
    if (has_op(sc, "generator-check")) with_gen.insert(sc);
    if (has_op(sc, "verify:")) with_verify.insert(sc);
  }
  const std::string tails = join_tables(dir, with_tails, "tails_", "_curves.csv", missing, true);
  const std::string tail_fits = join_tables(dir, with_tails, "tails_", ".csv", missing, true);
  const std::string rates = join_tables(dir, with_rates, "tails_", "_rate.csv", missing, true);
  const std::string gen = join_tables(dir, with_gen, "generator_", ".csv", missing, true);
  const std::string margins = join_tables(dir, with_verify, "verify_", ".csv", missing, true);
  txt << "\n" << scenarios.size() << " scenarios, " << recs.size() << " records, " << failing << " failing operations\n";
  if (skipped) txt << skipped << " malformed lines in results.csv were ignored\n";
  if (!missing.empty()) {
    txt << "missing inputs:\n";
    for (const auto& m : missing) {
      txt << "  " << m << '\n';
      err << "missing input " << m << '\n';
    }
  }
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os((fs::path(dir) / name).string(), std::ios::binary | std::ios::trunc);
    if (!os) throw OutputError("cannot write " + name);
    os << text;
  };
  put("report.txt", txt.str());
  put("report.csv", csv.str());
  if (!tails.empty()) put("report_tails.csv", tails);
  if (!tail_fits.empty()) put("report_tail_fits.csv", tail_fits);
  if (!rates.empty()) put("report_rates.csv", rates);
  if (!gen.empty()) put("report_generator.csv", gen);
  if (!margins.empty()) put("report_margins.csv", margins);
  out << txt.str();
  return kExitPass;
}

}  // namespace

int run_command(Command cmd, ExperimentConfig cfg, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.seed_override) cfg.seed = *opts.seed_override;
    if (opts.out) cfg.output_dir = *opts.out;
    const unsigned threads = std::max(1u, opts.threads);
    if (cmd == Command::Report) return cmd_report(cfg.output_dir, out, err);
    Session ses(cfg, cfg.output_dir, opts.overwrite, out);
    int code = kExitPass;
    switch (cmd) {
      case Command::VerifyDrift: code = cmd_verify(cfg, ses, threads); break;
      case Command::SimDiffusion: code = cmd_sim_diffusion(cfg, ses, threads); break;
      case Command::SimQueue: code = cmd_sim_queue(cfg, ses, threads); break;
      case Command::GeneratorCheck: code = cmd_generator_check(cfg, ses); break;
      case Command::Tails: code = cmd_tails(cfg, ses, threads); break;
      case Command::Report: break;
    }
    ses.flush();
    return code;
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << '\n';
    return kExitError;
  } catch (const PreconditionError& e) {
    err << "precondition error: " << e.what() << '\n';
    return kExitError;
  } catch (const OutputError& e) {
    err << "output error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int run_command(Command cmd, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  if (cmd == Command::Report && opts.config.empty()) {
    ExperimentConfig cfg;
    cfg.output_dir = opts.out.value_or("results");
    return run_command(cmd, std::move(cfg), opts, out, err);
  }
  try {
    if (opts.config.empty()) throw ConfigError("--config", "a config file is required for " + std::string(command_name(cmd)));
    return run_command(cmd, load_config(opts.config), opts, out, err);
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace hwq

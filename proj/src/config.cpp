#include "hwq/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hwq/prelimit.hpp"

namespace hwq {

using Json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kSuites{"lemma21", "T21", "T22", "R26", "L22", "T23", "C31", "T34", "T31"};

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Typed field access with JSON-pointer error locations.
class Node {
public:
  Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}
  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Node at(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + "/" + key, "missing required field");
    return {j_.at(key), path_ + "/" + key};
  }
  Node at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }
  std::size_t size() const { return j_.size(); }

  void expect_object() const {
    if (!j_.is_object()) fail("expected an object");
  }
  void expect_array() const {
    if (!j_.is_array()) fail("expected an array");
  }
  void only(std::initializer_list<const char*> keys) const {
    expect_object();
    for (const auto& [k, v] : j_.items()) {
      (void)v;
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        throw ConfigError(path_ + "/" + k, "unknown field");
    }
  }

  double number() const {
    if (j_.is_string()) {
      const std::string s = j_.get<std::string>();
      if (s == "inf") return kInf;
      if (s == "-inf") return -kInf;
    }
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  std::uint64_t unsigned_int() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0))
      fail("expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  Vec numbers() const {
    expect_array();
    Vec v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back(at(i).number());
    return v;
  }
  std::vector<std::size_t> indices() const {
    expect_array();
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back(static_cast<std::size_t>(at(i).unsigned_int()));
    return v;
  }
  std::vector<std::string> strings() const {
    expect_array();
    std::vector<std::string> v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back(at(i).string());
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_.empty() ? "/" : path_, what); }

private:
  const Json& j_;
  std::string path_;
};

void check_len(const Node& n, const Vec& v, std::size_t m) {
  if (v.size() != m) n.fail("expected " + std::to_string(m) + " entries");
}

SystemParams parse_system(const Node& s) {
  if (s.has("balanced")) {
    s.only({"balanced"});
    const Node b = s.at("balanced");
    b.only({"m", "spare", "mu", "gamma", "scv"});
    const auto m = static_cast<std::size_t>(b.at("m").unsigned_int());
    if (m == 0) b.at("m").fail("must be at least 1");
    try {
      return SystemParams::balanced(m, b.at("spare").number(), b.has("mu") ? b.at("mu").number() : 1.0,
                                    b.has("gamma") ? b.at("gamma").number() : 0.0,
                                    b.has("scv") ? b.at("scv").number() : 1.0);
    } catch (const ConfigError&) {
      throw;
    } catch (const PreconditionError& e) {
      b.fail(e.what());
    }
  }
  s.only({"m", "lambda", "mu", "gamma", "hat_lambda", "hat_mu", "scv"});
  SystemParams p;
  p.m = static_cast<std::size_t>(s.at("m").unsigned_int());
  if (p.m == 0) s.at("m").fail("must be at least 1");
  auto vec = [&](const char* key, double fill) {
    if (!s.has(key)) return Vec(p.m, fill);
    const Node n = s.at(key);
    Vec v = n.numbers();
    check_len(n, v, p.m);
    return v;
  };
  p.lambda = vec("lambda", 0.0);
  if (!s.has("lambda")) s.at("lambda");
  p.mu = vec("mu", 1.0);
  p.gamma = vec("gamma", 0.0);
  p.hat_lambda = vec("hat_lambda", 0.0);
  p.hat_mu = vec("hat_mu", 0.0);
  p.scv = vec("scv", 1.0);
  try {
    p.validate();
  } catch (const PreconditionError& e) {
    s.fail(e.what());
  }
  return p;
}

HistogramSpec parse_histogram(const Node& h, std::size_t m) {
  h.only({"lo", "hi", "bins"});
  HistogramSpec spec;
  auto expand = [&](const Node& n) {
    if (n.json().is_array()) {
      Vec v = n.numbers();
      check_len(n, v, m);
      return v;
    }
    return Vec(m, n.number());
  };
  spec.lo = expand(h.at("lo"));
  spec.hi = expand(h.at("hi"));
  const Node b = h.at("bins");
  if (b.json().is_array()) {
    spec.bins = b.indices();
    if (spec.bins.size() != m) b.fail("expected " + std::to_string(m) + " entries");
  } else {
    spec.bins.assign(m, static_cast<std::size_t>(b.unsigned_int()));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(spec.hi[i] > spec.lo[i])) h.at("hi").fail("each upper bound must exceed its lower bound");
    if (spec.bins[i] == 0) b.fail("bins must be positive");
  }
  return spec;
}

Json law_json(const LawEntry& l) {
  Json j;
  j["family"] = l.family;
  if (l.family == "hyperexponential" || l.family == "lognormal") j["scv"] = l.scv;
  if (l.family == "erlang") j["k"] = l.k;
  return j;
}

Json number_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

}  // namespace

Interarrival make_law(const LawEntry& e) {
  if (e.family == "exponential") return Interarrival::exponential();
  if (e.family == "hyperexponential") return Interarrival::hyperexponential(e.scv);
  if (e.family == "erlang") return Interarrival::erlang(e.k);
  if (e.family == "lognormal") return Interarrival::lognormal(e.scv);
  throw PreconditionError("unknown interarrival family " + e.family);
}

ArrivalSpec ExperimentConfig::arrival_spec() const {
  if (arrivals.kind == "poisson") return ArrivalSpec::poisson();
  std::vector<Interarrival> laws;
  for (const auto& l : arrivals.laws) laws.push_back(make_law(l));
  return ArrivalSpec::renewal(std::move(laws));
}

const PolicyEntry& ExperimentConfig::policy(const std::string& id) const {
  for (const auto& p : policies)
    if (p.id == id) return p;
  throw ConfigError("/policies", "no policy with id " + id);
}

std::vector<const PolicyEntry*> ExperimentConfig::sim_policies() const {
  std::vector<const PolicyEntry*> out;
  if (sim.policies.empty())
    for (const auto& p : policies) out.push_back(&p);
  else
    for (const auto& id : sim.policies) out.push_back(&policy(id));
  return out;
}

ControlPolicy make_control_policy(const PolicyEntry& e, std::size_t m) {
  if (e.kind == "constant") return ControlPolicy::constant(e.u);
  if (e.kind == "priority") {
    if (e.order.size() != m) throw ConfigError("/policies/" + e.id, "priority order needs every class");
    return ControlPolicy::static_priority(e.order);
  }
  throw ConfigError("/policies/" + e.id, "kind " + e.kind + " has no diffusion counterpart");
}

SchedulingPolicy make_scheduling_policy(const PolicyEntry& e, std::size_t m) {
  if (e.kind == "priority") {
    if (e.order.size() != m) throw ConfigError("/policies/" + e.id, "priority order needs every class");
    return SchedulingPolicy::static_priority(e.order);
  }
  if (e.kind == "lqf") return SchedulingPolicy::longest_queue_first();
  if (e.kind == "random") return SchedulingPolicy::random_work_conserving(e.seed);
  if (e.kind == "constant") {
    if (e.u.size() != m) throw ConfigError("/policies/" + e.id, "control needs every class");
    const ControlVector u(e.u);
    return SchedulingPolicy::user_table(
        [u](std::span<const std::int64_t> x, std::int64_t n) { return allocation_for_control(x, n, u); },
        "constant(" + e.id + ")");
  }
  throw ConfigError("/policies/" + e.id, "kind " + e.kind + " is not a work-conserving queue policy");
}

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(line_col(text, e.byte > 0 ? e.byte - 1 : 0), "syntax error");
  }
  const Node root(j, "");
  root.only({"scenario", "system", "prelimit", "arrivals", "policies", "lyapunov", "sim", "verify", "tails", "output"});
  ExperimentConfig c;

  const Node sc = root.at("scenario");
  sc.only({"id", "seed"});
  c.scenario = sc.at("id").string();
  if (c.scenario.empty() || c.scenario.find_first_of("/\\ ,\n") != std::string::npos)
    sc.at("id").fail("must be non-empty without spaces, commas or slashes");
  c.seed = sc.at("seed").unsigned_int();

  c.system = parse_system(root.at("system"));
  const std::size_t m = c.system.m;

  if (root.has("prelimit")) {
    const Node pl = root.at("prelimit");
    pl.only({"n"});
    c.n_list = pl.at("n").indices();
    for (std::size_t i = 0; i < c.n_list.size(); ++i)
      if (c.n_list[i] == 0) pl.at("n").at(i).fail("n must be at least 1");
  }

  if (root.has("arrivals")) {
    const Node a = root.at("arrivals");
    a.only({"kind", "laws"});
    c.arrivals.kind = a.at("kind").string();
    if (c.arrivals.kind == "renewal") {
      const Node laws = a.at("laws");
      laws.expect_array();
      if (laws.size() != m) laws.fail("expected one law per class");
      for (std::size_t i = 0; i < laws.size(); ++i) {
        const Node l = laws.at(i);
        l.only({"family", "scv", "k"});
        LawEntry e;
        e.family = l.at("family").string();
        if (l.has("scv")) e.scv = l.at("scv").number();
        if (l.has("k")) e.k = static_cast<int>(l.at("k").unsigned_int());
        try {
          make_law(e);
        } catch (const PreconditionError& err) {
          l.fail(err.what());
        }
        c.arrivals.laws.push_back(e);
      }
    } else if (c.arrivals.kind != "poisson") {
      a.at("kind").fail("expected poisson or renewal");
    } else if (a.has("laws")) {
      a.at("laws").fail("poisson arrivals take no laws");
    }
  }

  if (root.has("policies")) {
    const Node ps = root.at("policies");
    ps.expect_array();
    std::set<std::string> ids;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Node p = ps.at(i);
      p.only({"id", "kind", "u", "order", "seed"});
      PolicyEntry e;
      e.id = p.at("id").string();
      if (!ids.insert(e.id).second) p.at("id").fail("duplicate policy id");
      if (e.id.empty() || e.id.find_first_of("/\\ ,\n") != std::string::npos)
        p.at("id").fail("must be non-empty without spaces, commas or slashes");
      e.kind = p.at("kind").string();
      if (e.kind == "constant") {
        e.u = p.at("u").numbers();
        check_len(p.at("u"), e.u, m);
        try {
          ControlVector{e.u};
        } catch (const PreconditionError& err) {
          p.at("u").fail(err.what());
        }
      } else if (e.kind == "priority") {
        e.order = p.at("order").indices();
        std::vector<std::size_t> sorted = e.order;
        std::sort(sorted.begin(), sorted.end());
        bool perm = sorted.size() == m;
        for (std::size_t k = 0; perm && k < m; ++k) perm = sorted[k] == k;
        if (!perm) p.at("order").fail("must be a permutation of 0.." + std::to_string(m - 1));
      } else if (e.kind == "random") {
        e.seed = p.at("seed").unsigned_int();
      } else if (e.kind != "lqf") {
        p.at("kind").fail("expected constant, priority, lqf or random");
      }
      c.policies.push_back(std::move(e));
    }
  }

  if (root.has("lyapunov")) {
    const Node ly = root.at("lyapunov");
    ly.expect_object();
    for (const auto& [goal, v] : ly.json().items()) {
      (void)v;
      if (!kSuites.count(goal)) throw ConfigError("/lyapunov/" + goal, "unknown goal");
      const Node o = ly.at(goal);
      o.only({"epsilon", "theta", "eta", "p"});
      LyapunovOverride ov;
      if (o.has("epsilon")) ov.epsilon = o.at("epsilon").number();
      if (o.has("theta")) ov.theta = o.at("theta").number();
      if (o.has("eta")) ov.eta = o.at("eta").number();
      if (o.has("p")) ov.p = o.at("p").number();
      c.lyapunov[goal] = ov;
    }
  }

  if (root.has("sim")) {
    const Node s = root.at("sim");
    s.only({"h", "horizon", "burn_in", "replicas", "x0", "thin", "blowup", "batches", "histogram", "exp_rates",
            "gauss_rates", "policies"});
    SimBlock& b = c.sim;
    if (s.has("h")) b.h = s.at("h").number();
    if (s.has("horizon")) b.horizon = s.at("horizon").number();
    if (s.has("burn_in")) b.burn_in = s.at("burn_in").number();
    if (s.has("replicas")) b.replicas = static_cast<std::size_t>(s.at("replicas").unsigned_int());
    if (s.has("x0")) {
      b.x0 = s.at("x0").numbers();
      check_len(s.at("x0"), b.x0, m);
    }
    if (s.has("thin")) b.thin = s.at("thin").number();
    if (s.has("blowup")) b.blowup = s.at("blowup").number();
    if (s.has("batches")) b.batches = static_cast<std::size_t>(s.at("batches").unsigned_int());
    if (s.has("histogram")) b.histogram = parse_histogram(s.at("histogram"), m);
    if (s.has("exp_rates")) b.exp_rates = s.at("exp_rates").numbers();
    if (s.has("gauss_rates")) b.gauss_rates = s.at("gauss_rates").numbers();
    if (s.has("policies")) {
      b.policies = s.at("policies").strings();
      for (std::size_t i = 0; i < b.policies.size(); ++i)
        if (std::none_of(c.policies.begin(), c.policies.end(), [&](const PolicyEntry& e) { return e.id == b.policies[i]; }))
          s.at("policies").at(i).fail("references an undefined policy id");
    }
    SimConfig probe;
    probe.h = b.h;
    probe.horizon = b.horizon;
    probe.burn_in = b.burn_in;
    probe.replicas = b.replicas;
    probe.thin = b.thin;
    probe.blowup = b.blowup;
    try {
      probe.validate();
    } catch (const PreconditionError& e) {
      s.fail(e.what());
    }
  }

  if (root.has("verify")) {
    const Node v = root.at("verify");
    v.only({"suites", "samples", "radius", "enrichment", "c_levels", "prelimit_states", "prelimit_radius",
            "max_expansions"});
    VerifyBlock& b = c.verify;
    if (v.has("suites")) {
      b.suites = v.at("suites").strings();
      for (std::size_t i = 0; i < b.suites.size(); ++i)
        if (!kSuites.count(b.suites[i])) v.at("suites").at(i).fail("unknown suite " + b.suites[i]);
    }
    if (v.has("samples")) b.samples = static_cast<std::size_t>(v.at("samples").unsigned_int());
    if (v.has("radius")) b.radius = v.at("radius").number();
    if (v.has("enrichment")) b.enrichment = v.at("enrichment").number();
    if (v.has("c_levels")) {
      b.c_levels = v.at("c_levels").numbers();
      for (std::size_t i = 0; i < b.c_levels.size(); ++i)
        if (!(b.c_levels[i] >= 1.0)) v.at("c_levels").at(i).fail("truncation level must be at least 1");
    }
    if (v.has("prelimit_states")) b.prelimit_states = static_cast<std::size_t>(v.at("prelimit_states").unsigned_int());
    if (v.has("prelimit_radius")) b.prelimit_radius = v.at("prelimit_radius").number();
    if (v.has("max_expansions")) b.max_expansions = static_cast<int>(v.at("max_expansions").unsigned_int());
    if (b.samples == 0) v.at("samples").fail("must be positive");
    if (b.radius < 0.0) v.at("radius").fail("must be non-negative");
  }

  if (root.has("tails")) {
    const Node t = root.at("tails");
    t.only({"directions", "lower_quantile", "min_tail_weight", "grid", "rate", "rate_ensemble", "rate_horizon"});
    TailsBlock& b = c.tails;
    if (t.has("directions")) {
      b.directions = t.at("directions").strings();
      for (std::size_t i = 0; i < b.directions.size(); ++i) {
        const std::string& d = b.directions[i];
        bool ok = d == "l1" || d == "negsum";
        if (d.rfind("neg:", 0) == 0) {
          try {
            ok = std::stoul(d.substr(4)) < m;
          } catch (const std::exception&) {
            ok = false;
          }
        }
        if (!ok) t.at("directions").at(i).fail("expected l1, negsum or neg:<class index>");
      }
    }
    if (t.has("lower_quantile")) b.lower_quantile = t.at("lower_quantile").number();
    if (t.has("min_tail_weight")) b.min_tail_weight = t.at("min_tail_weight").number();
    if (t.has("grid")) b.grid = static_cast<std::size_t>(t.at("grid").unsigned_int());
    if (b.grid < 3) t.at("grid").fail("need at least three grid points");
    if (t.has("rate")) {
      if (!t.at("rate").json().is_boolean()) t.at("rate").fail("expected true or false");
      b.rate = t.at("rate").json().get<bool>();
    }
    if (t.has("rate_ensemble")) b.rate_ensemble = static_cast<std::size_t>(t.at("rate_ensemble").unsigned_int());
    if (t.has("rate_horizon")) b.rate_horizon = t.at("rate_horizon").number();
    if (b.rate_ensemble < 2) t.at("rate_ensemble").fail("need at least two replicas");
    if (!(b.rate_horizon > 0.0)) t.at("rate_horizon").fail("must be positive");
  }

  if (root.has("output")) {
    const Node o = root.at("output");
    o.only({"dir"});
    c.output_dir = o.at("dir").string();
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  Json j;
  j["scenario"] = {{"id", c.scenario}, {"seed", c.seed}};
  const SystemParams& s = c.system;
  j["system"] = {{"m", s.m},          {"lambda", s.lambda},         {"mu", s.mu}, {"gamma", s.gamma},
                 {"hat_lambda", s.hat_lambda}, {"hat_mu", s.hat_mu}, {"scv", s.scv}};
  j["prelimit"] = {{"n", c.n_list}};
  Json arr{{"kind", c.arrivals.kind}};
  if (c.arrivals.kind == "renewal") {
    Json laws = Json::array();
    for (const auto& l : c.arrivals.laws) laws.push_back(law_json(l));
    arr["laws"] = laws;
  }
  j["arrivals"] = arr;
  Json pols = Json::array();
  for (const auto& p : c.policies) {
    Json e{{"id", p.id}, {"kind", p.kind}};
    if (p.kind == "constant") e["u"] = p.u;
    if (p.kind == "priority") e["order"] = p.order;
    if (p.kind == "random") e["seed"] = p.seed;
    pols.push_back(e);
  }
  j["policies"] = pols;
  Json ly = Json::object();
  for (const auto& [goal, o] : c.lyapunov) {
    Json e = Json::object();
    if (o.epsilon) e["epsilon"] = *o.epsilon;
    if (o.theta) e["theta"] = *o.theta;
    if (o.eta) e["eta"] = *o.eta;
    if (o.p) e["p"] = *o.p;
    ly[goal] = e;
  }
  j["lyapunov"] = ly;
  const SimBlock& b = c.sim;
  Json sim{{"h", b.h},         {"horizon", b.horizon}, {"burn_in", b.burn_in}, {"replicas", b.replicas},
           {"thin", b.thin},   {"blowup", number_json(b.blowup)},  {"batches", b.batches}};
  if (!b.x0.empty()) sim["x0"] = b.x0;
  if (b.histogram) sim["histogram"] = {{"lo", b.histogram->lo}, {"hi", b.histogram->hi}, {"bins", b.histogram->bins}};
  sim["exp_rates"] = b.exp_rates;
  sim["gauss_rates"] = b.gauss_rates;
  sim["policies"] = b.policies;
  j["sim"] = sim;
  Json cl = Json::array();
  for (double v : c.verify.c_levels) cl.push_back(number_json(v));
  j["verify"] = {{"suites", c.verify.suites},
                 {"samples", c.verify.samples},
                 {"radius", c.verify.radius},
                 {"enrichment", c.verify.enrichment},
                 {"c_levels", cl},
                 {"prelimit_states", c.verify.prelimit_states},
                 {"prelimit_radius", c.verify.prelimit_radius},
                 {"max_expansions", c.verify.max_expansions}};
  j["tails"] = {{"directions", c.tails.directions},
                {"lower_quantile", c.tails.lower_quantile},
                {"min_tail_weight", c.tails.min_tail_weight},
                {"grid", c.tails.grid},
                {"rate", c.tails.rate},
                {"rate_ensemble", c.tails.rate_ensemble},
                {"rate_horizon", c.tails.rate_horizon}};
  j["output"] = {{"dir", c.output_dir}};
  return j.dump(2) + "\n";
}

}  // namespace hwq

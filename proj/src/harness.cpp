#include "pspin/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "pspin/errors.hpp"
#include "pspin/exact.hpp"
#include "pspin/measures.hpp"
#include "pspin/parallel.hpp"
#include "pspin/seeding.hpp"

namespace pspin {

using nlohmann::json;

// ---- parsing ----

IndexSetPattern parse_pattern(const json& j) {
  if (j.is_array()) return IndexSetPattern::finite(j.get<std::vector<int>>());
  if (!j.is_string()) throw InvalidSpec("index-set pattern must be a list or a string like evens>=4");
  const std::string s = j.get<std::string>();
  const auto at = s.find(">=");
  if (at == std::string::npos) throw InvalidSpec("bad index-set pattern: " + s);
  const std::string kind = s.substr(0, at);
  int start = 0;
  try {
    start = std::stoi(s.substr(at + 2));
  } catch (const std::exception&) {
    throw InvalidSpec("bad index-set pattern: " + s);
  }
  if (kind == "evens") return IndexSetPattern::evens(start);
  if (kind == "odds") return IndexSetPattern::odds(start);
  if (kind == "all") return IndexSetPattern::all(start);
  throw InvalidSpec("bad index-set pattern: " + s);
}

namespace {

std::map<int, double> pairs_to_map(const json& j, const char* what) {
  std::map<int, double> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw InvalidSpec(std::string(what) + " must be an array of [p, value] pairs");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw InvalidSpec(std::string(what) + " entries must be [p, value]");
    out[e[0].get<int>()] = e[1].get<double>();
  }
  return out;
}

json map_to_pairs(const std::map<int, double>& m) {
  json out = json::array();
  for (const auto& [p, v] : m) out.push_back({p, v});
  return out;
}

OverlapKind parse_kind(const std::string& s) {
  if (s == "R1") return OverlapKind::Within1;
  if (s == "R2") return OverlapKind::Within2;
  if (s == "R") return OverlapKind::Cross;
  throw InvalidSpec("overlap kind must be R1, R2 or R, got " + s);
}

}  // namespace

CoupledModelSpec parse_model(const json& j) {
  CoupledModelSpec spec;
  std::optional<IndexSetPattern> s1, s2;
  if (j.contains("support1")) s1 = parse_pattern(j.at("support1"));
  if (j.contains("support2")) s2 = parse_pattern(j.at("support2"));
  spec.params1 = MixedSpinParams(pairs_to_map(j.value("beta1", json()), "beta1"), s1);
  spec.params2 = MixedSpinParams(pairs_to_map(j.value("beta2", json()), "beta2"), s2);
  spec.coupling.correlations = pairs_to_map(j.value("t", json()), "t");
  spec.coupling.default_correlation = j.value("default_t", 1.0);
  spec.validate();
  return spec;
}

json model_to_json(const CoupledModelSpec& spec) {
  json j{{"beta1", map_to_pairs(spec.params1.betas)},
         {"beta2", map_to_pairs(spec.params2.betas)},
         {"t", map_to_pairs(spec.coupling.correlations)},
         {"default_t", spec.coupling.default_correlation}};
  if (spec.params1.symbolic_support) j["support1"] = spec.params1.symbolic_support->to_string();
  if (spec.params2.symbolic_support) j["support2"] = spec.params2.symbolic_support->to_string();
  return j;
}

IntervalSet parse_intervals(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidSpec("interval sets are [lo, hi] or [[lo, hi], ...]");
  if (j[0].is_number()) {
    if (j.size() != 2) throw InvalidSpec("an interval is [lo, hi]");
    return Interval{j[0].get<double>(), j[1].get<double>()};
  }
  IntervalSet out;
  for (const auto& e : j) out.parts.push_back(parse_intervals(e).parts.front());
  return out;
}

TestFunction parse_test_function(const json& j) {
  if (j.is_string() && (j == "1" || j == "constant")) return TestFunction::constant();
  if (j.is_object() && j.contains("monomial")) {
    std::vector<OverlapPower> factors;
    for (const auto& f : j.at("monomial")) {
      if (!f.is_array() || f.size() != 4) throw InvalidSpec("monomial factors are [kind, l, l', exponent]");
      factors.push_back({OverlapId{parse_kind(f[0]), f[1].get<int>(), f[2].get<int>()}, f[3].get<int>()});
    }
    return TestFunction::monomial(std::move(factors));
  }
  if (j.is_object() && j.contains("indicator")) {
    const auto& id = j.at("indicator");
    if (!id.is_array() || id.size() != 3) throw InvalidSpec("indicator overlap is [kind, l, l']");
    return TestFunction::indicator({parse_kind(id[0]), id[1].get<int>(), id[2].get<int>()}, parse_intervals(j.at("set")));
  }
  throw InvalidSpec("unrecognized test function: " + j.dump());
}

namespace {

const std::set<std::string> kKinds{"conditions", "gamma-delta", "phi-psi", "lemma1", "lemma2",
                                   "lemma3",     "chaos",       "parisi",  "log-partition", "moments"};

SamplerConfig parse_sampler(const json& j, std::uint64_t master) {
  SamplerConfig c;
  c.sweeps = j.value("sweeps", c.sweeps);
  c.burn_in = j.value("burn_in", c.sweeps / 5);
  c.thinning = j.value("thinning", c.thinning);
  if (j.contains("ladder")) c.ladder = j.at("ladder").get<std::vector<double>>();
  c.exchange_interval = j.value("exchange_interval", c.exchange_interval);
  c.chain_seed = j.value("chain_seed", master);
  return c;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  c.raw = j;
  c.seed = j.value("seed", std::uint64_t{0});
  c.model = parse_model(j.value("model", json::object()));
  if (j.contains("Ns")) c.Ns = j.at("Ns").get<std::vector<int>>();
  c.M = j.value("M", 1);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.threads = j.value("threads", 0);
  const json engine = j.value("engine", json("auto"));
  const json eobj = engine.is_string() ? json{{"kind", engine}} : engine;
  const std::string kind = eobj.value("kind", "auto");
  if (kind == "exact")
    c.engine.kind = EngineKind::Exact;
  else if (kind == "mc")
    c.engine.kind = EngineKind::Mc;
  else if (kind == "auto")
    c.engine.kind = EngineKind::Auto;
  else
    throw InvalidSpec("engine must be exact, mc or auto");
  c.engine.auto_threshold = eobj.value("auto_threshold", c.engine.auto_threshold);
  c.engine.sampler = parse_sampler(eobj, c.seed);
  for (const auto& d : j.value("diagnostics", json::array())) {
    DiagnosticRequest r;
    if (d.is_string()) {
      r.kind = d.get<std::string>();
    } else {
      r.kind = d.at("kind").get<std::string>();
      r.params = d;
    }
    c.diagnostics.push_back(r);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidSpec("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

void ExperimentConfig::validate() const {
  model.validate();
  if (M < 1) throw InvalidSpec("M must be >= 1");
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    if (Ns[k] < 1 || Ns[k] > kMaxSpins) throw InvalidSpec("every N must lie in [1, 64]");
    if (k && Ns[k] <= Ns[k - 1]) throw InvalidSpec("Ns must be strictly ascending");
  }
  if (engine.kind == EngineKind::Auto && engine.auto_threshold > ExactBudget{}.max_table_n)
    throw InvalidSpec("auto threshold exceeds the exact-engine budget");
  engine.sampler.validate();
  for (const auto& d : diagnostics)
    if (!kKinds.count(d.kind)) throw InvalidSpec("unknown diagnostic: " + d.kind);
}

std::map<int, double> parse_beta_list(const std::string& text) {
  std::map<int, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InvalidSpec("beta entries look like p:value, got " + item);
    try {
      out[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidSpec("beta entries look like p:value, got " + item);
    }
  }
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PSPIN_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

// Output location and thread count do not change results and are left out.
std::string config_hash(const json& raw) {
  json key = raw;
  if (key.is_object()) {
    key.erase("output_dir");
    key.erase("threads");
  }
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : key.dump()) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json RunManifest::to_json() const {
  json seeds = json::object();
  for (const auto& [N, s] : unit_seeds) seeds[std::to_string(N)] = s;
  return {{"config_hash", config_hash},
          {"master_seed", master_seed},
          {"unit_seeds", seeds},
          {"generator", generator},
          {"version", version},
          {"wall_seconds", wall_seconds},
          {"threads", threads},
          {"failed_units", failed_units},
          {"outputs", outputs}};
}

// ---- run ----

namespace {

json estimate_json(const Estimate& e) { return {{"estimate", e.value}, {"se", e.se}}; }

json witness_json(const ConditionWitness& w) {
  json j{{"holds", w.holds}};
  if (w.difference_degree) j["difference_degree"] = *w.difference_degree;
  if (w.dense_subset) j["dense_subset"] = w.dense_subset->to_string();
  if (w.tau) j["tau"] = *w.tau;
  if (w.p0) j["p0"] = *w.p0;
  return j;
}

std::vector<TestFunction> family_of(const json& params) {
  if (!params.contains("f")) return default_test_family();
  std::vector<TestFunction> out;
  for (const auto& f : params.at("f")) out.push_back(parse_test_function(f));
  return out;
}

// Replicas each per-unit diagnostic needs from a sampler.
int replicas_needed(const DiagnosticRequest& d) {
  if (d.kind == "phi-psi") return d.params.value("n", 2) + 1;
  if (d.kind == "lemma3") return d.params.value("n", 2) + 1;
  if (d.kind == "lemma2") return std::max(2, d.params.value("l", 2));
  return 2;
}

std::vector<double> thresholds_of(const json& params) {
  return params.value("thresholds", std::vector<double>{0.25, 0.5, 0.75});
}

std::vector<int> powers_of(const json& params) {
  return params.value("powers", std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

std::vector<EventSpec> events_of(const json& params, int n) {
  std::vector<EventSpec> out;
  for (const auto& e : params.value("events", json::array())) {
    EventSpec ev;
    ev.n = n;
    if (e.contains("A")) ev.A = parse_intervals(e.at("A"));
    if (e.contains("A1")) ev.A1 = parse_intervals(e.at("A1"));
    if (e.contains("A2")) ev.A2 = parse_intervals(e.at("A2"));
    out.push_back(ev);
  }
  if (out.empty()) {
    EventSpec ev;
    ev.n = n;
    ev.A = Interval{-0.5, 0.5};
    ev.A1 = Interval{0.0, 0.5};
    out.push_back(ev);
  }
  return out;
}

Lemma3Form form_of(const std::string& s) {
  if (s == "eq1") return Lemma3Form::Eq1;
  if (s == "eq2") return Lemma3Form::Eq2;
  if (s == "eq3") return Lemma3Form::Eq3;
  throw InvalidSpec("lemma3 form must be eq1, eq2 or eq3");
}

// Everything a single disorder realization contributes to the per-unit diagnostics.
struct UnitResult {
  bool ok = true;
  std::string error;
  std::vector<std::vector<Eigen::RowVector4d>> functionals;  // per phi-psi request, per (j, f)
  std::vector<std::vector<Lemma2Report>> lemma2;              // per request, per p
  std::vector<OverlapSampleArray> lemma3;                     // per request
  std::optional<EmpiricalMeasure> cross_law;
  std::optional<EmpiricalMeasure> within_law;
  std::optional<std::pair<double, double>> log_partition;
  std::vector<double> moments;  // <R^p>, p = 1..3
};

// Thins an array to at most `keep` rows, evenly spaced.
OverlapSampleArray thin(const OverlapSampleArray& d, Eigen::Index keep) {
  if (d.samples() <= keep) return d;
  OverlapSampleArray out = d;
  const Eigen::Index rows = keep;
  out.within1.resize(rows, d.within1.cols());
  out.within2.resize(rows, d.within2.cols());
  out.cross.resize(rows, d.cross.cols());
  out.energies.resize(d.energies.cols() ? rows : 0, d.energies.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index src = r * d.samples() / rows;
    out.within1.row(r) = d.within1.row(src);
    out.within2.row(r) = d.within2.row(src);
    out.cross.row(r) = d.cross.row(src);
    if (d.energies.cols()) out.energies.row(r) = d.energies.row(src);
  }
  return out;
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& c) : cfg_(c), threads_(resolve_threads(c.threads)) {
    hash_ = config_hash(c.raw.is_null() ? json{{"model", model_to_json(c.model)}} : c.raw);
  }

  RunManifest go() {
    const auto t0 = std::chrono::steady_clock::now();
    manifest_.config_hash = hash_;
    manifest_.master_seed = cfg_.seed;
    manifest_.generator = kGeneratorName;
    manifest_.version = kVersion;
    manifest_.threads = threads_;

    for (const auto& d : cfg_.diagnostics)
      if (d.kind == "conditions") conditions(d);
    const bool per_n = std::any_of(cfg_.diagnostics.begin(), cfg_.diagnostics.end(),
                                   [](const DiagnosticRequest& d) { return d.kind != "conditions"; });
    if (per_n)
      for (int N : cfg_.Ns) run_n(N);

    manifest_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write();
    return manifest_;
  }

 private:
  json base(int N, const std::string& diagnostic) const {
    json j{{"spec_hash", hash_}, {"seed", cfg_.seed}, {"diagnostic", diagnostic}};
    if (N > 0) {
      j["N"] = N;
      j["M"] = cfg_.M;
    }
    return j;
  }

  void record(json j, int N, const std::string& diagnostic) {
    manifest_.records.push_back(std::move(j));
    manifest_.outputs[std::to_string(N)][diagnostic] = "records.jsonl";
  }

  void row(int N, const std::string& diag, const std::string& stat, double est, double se = 0.0) {
    manifest_.summary.push_back({N, diag, stat, est, se});
  }
  void row(int N, const std::string& diag, const std::string& stat, const Estimate& e) { row(N, diag, stat, e.value, e.se); }

  void failure(int N, const std::string& diag, const std::string& what, std::optional<std::uint64_t> unit = std::nullopt) {
    json j = base(N, diag);
    j["status"] = "failed";
    j["error"] = what;
    if (unit) j["sample_index"] = *unit;
    record(j, N, diag);
    if (unit) ++manifest_.failed_units;
  }

  void conditions(const DiagnosticRequest& d) {
    std::optional<IndexSetPattern> w1, w2;
    try {
      if (d.params.contains("witness1")) w1 = parse_pattern(d.params.at("witness1"));
      if (d.params.contains("witness2")) w2 = parse_pattern(d.params.at("witness2"));
      const ConditionReport r = check_chaos_conditions(cfg_.model, w1, w2);
      json j = base(0, "conditions");
      j["ce"] = r.ce;
      j["co"] = r.co;
      j["corrp_even"] = r.corrp_even ? json(*r.corrp_even) : json();
      j["corrp_odd"] = r.corrp_odd ? json(*r.corrp_odd) : json();
      j["c1e"] = witness_json(r.c1e);
      j["c1o"] = witness_json(r.c1o);
      j["c2e"] = witness_json(r.c2e);
      j["c2o"] = witness_json(r.c2o);
      record(j, 0, "conditions");
      row(0, "conditions", "ce", r.ce);
      row(0, "conditions", "co", r.co);
      row(0, "conditions", "c1e", r.c1e.holds);
      row(0, "conditions", "c1o", r.c1o.holds);
      row(0, "conditions", "c2e", r.c2e.holds);
      row(0, "conditions", "c2o", r.c2o.holds);
    } catch (const Error& e) {
      failure(0, "conditions", e.what());
    }
  }

  bool exact_for(int N) const {
    if (cfg_.engine.kind == EngineKind::Exact) return true;
    if (cfg_.engine.kind == EngineKind::Mc) return false;
    return N <= cfg_.engine.auto_threshold;
  }

  InnerMode inner_for(int N) const {
    if (exact_for(N)) return ExactInner{};
    return McInner{cfg_.engine.sampler};
  }

  void run_n(int N) {
    manifest_.unit_seeds[N] = unit_seed(cfg_.seed, N, 0).master;
    const bool exact = exact_for(N);
    std::vector<const DiagnosticRequest*> per_unit;
    for (const auto& d : cfg_.diagnostics) {
      if (d.kind == "gamma-delta") gamma_delta(N, d);
      else if (d.kind == "lemma1") lemma1(N, d, exact);
      else if (d.kind != "conditions") per_unit.push_back(&d);
    }
    if (per_unit.empty()) return;

    int replicas = 2;
    for (const auto* d : per_unit) replicas = std::max(replicas, replicas_needed(*d));
    std::vector<int> extra;
    for (const auto* d : per_unit)
      if (d->kind == "phi-psi" || d->kind == "lemma2")
        for (int p : d->params.value("degrees", std::vector<int>{d->params.value("p", 2)})) extra.push_back(p);

    std::vector<UnitResult> units(static_cast<std::size_t>(cfg_.M));
    SamplerConfig sampler = cfg_.engine.sampler;
    parallel_for(units.size(), threads_, [&](std::size_t m) {
      UnitResult& u = units[m];
      try {
        const CoupledDisorder disorder = sample_coupled_disorder(cfg_.model, N, unit_seed(cfg_.seed, N, m), extra);
        if (exact) {
          const ExactPair pair = build_exact_pair(disorder);
          unit_exact(u, disorder, pair, per_unit, N);
        } else {
          const OverlapSampleArray data = sample_replica_overlaps(disorder, sampler, replicas);
          unit_mc(u, data, per_unit);
        }
      } catch (const std::exception& e) {
        u.ok = false;
        u.error = e.what();
      }
    });

    for (std::size_t m = 0; m < units.size(); ++m)
      if (!units[m].ok) failure(N, "unit", units[m].error, m);
    std::vector<const UnitResult*> good;
    for (const auto& u : units)
      if (u.ok) good.push_back(&u);
    if (good.empty()) return;

    int phi_k = 0, l2_k = 0, l3_k = 0;
    for (const auto* d : per_unit) {
      try {
        if (d->kind == "phi-psi") reduce_phi_psi(N, *d, good, phi_k++);
        else if (d->kind == "lemma2") reduce_lemma2(N, *d, good, l2_k++);
        else if (d->kind == "lemma3") reduce_lemma3(N, *d, good, l3_k++);
        else if (d->kind == "chaos") reduce_chaos(N, *d, good);
        else if (d->kind == "parisi") reduce_parisi(N, *d, good);
        else if (d->kind == "log-partition") reduce_log_partition(N, good);
        else if (d->kind == "moments") reduce_moments(N, good);
      } catch (const Error& e) {
        failure(N, d->kind, e.what());
      }
    }
  }

  void unit_exact(UnitResult& u, const CoupledDisorder& disorder, const ExactPair& pair,
                  const std::vector<const DiagnosticRequest*>& reqs, int N) {
    for (const auto* d : reqs) {
      if (d->kind == "phi-psi") {
        const int n = d->params.value("n", 2), p = d->params.value("p", 2);
        std::vector<Eigen::RowVector4d> rows;
        for (int j : {1, 2})
          for (const auto& f : family_of(d->params)) rows.push_back(functional_terms(pair, j, n, f, p));
        u.functionals.push_back(std::move(rows));
      } else if (d->kind == "lemma2") {
        std::vector<Lemma2Report> reps;
        for (int p : d->params.value("degrees", std::vector<int>{d->params.value("p", 2)}))
          reps.push_back(check_lemma2_identity(pair, p, d->params.value("l", 2)));
        u.lemma2.push_back(std::move(reps));
      } else if (d->kind == "lemma3") {
        const int n = d->params.value("n", 2);
        u.lemma3.push_back(sample_exact_replicas(disorder, pair, n + 1, d->params.value("samples", 2000), cfg_.seed));
      } else if (d->kind == "chaos") {
        if (!u.cross_law) u.cross_law = cross_overlap_distribution(pair.table1, pair.table2);
      } else if (d->kind == "parisi") {
        if (!u.within_law) u.within_law = within_overlap_distribution(pair.table1).absolute();
      } else if (d->kind == "log-partition") {
        u.log_partition = {pair.table1.log_partition(), pair.table2.log_partition()};
      } else if (d->kind == "moments") {
        u.moments.clear();
        for (int p = 1; p <= 3; ++p) u.moments.push_back(cross_overlap_moment(pair.table1, pair.table2, p));
      }
    }
    (void)N;
  }

  void unit_mc(UnitResult& u, const OverlapSampleArray& data, const std::vector<const DiagnosticRequest*>& reqs) {
    for (const auto* d : reqs) {
      if (d->kind == "phi-psi") {
        const int n = d->params.value("n", 2), p = d->params.value("p", 2);
        std::vector<Eigen::RowVector4d> rows;
        for (int j : {1, 2})
          for (const auto& f : family_of(d->params)) rows.push_back(functional_terms(data, j, n, f, p));
        u.functionals.push_back(std::move(rows));
      } else if (d->kind == "lemma2") {
        std::vector<Lemma2Report> reps;
        const std::vector<OverlapSampleArray> one{data};
        for (int p : d->params.value("degrees", std::vector<int>{d->params.value("p", 2)}))
          reps.push_back(check_lemma2_identity(one, p, d->params.value("l", 2)));
        u.lemma2.push_back(std::move(reps));
      } else if (d->kind == "lemma3") {
        u.lemma3.push_back(thin(data, d->params.value("samples", 2000)));
      } else if (d->kind == "chaos") {
        if (!u.cross_law) {
          std::vector<double> xs(data.cross.data(), data.cross.data() + data.cross.size());
          u.cross_law = EmpiricalMeasure::from_samples(xs);
        }
      } else if (d->kind == "parisi") {
        if (!u.within_law) {
          std::vector<double> xs;
          for (Eigen::Index r = 0; r < data.samples(); ++r) xs.push_back(std::abs(data.value(r, {OverlapKind::Within1, 1, 2})));
          u.within_law = EmpiricalMeasure::from_samples(xs, 0.0, 1.0);
        }
      } else if (d->kind == "log-partition") {
        throw InvalidSpec("log-partition needs the exact engine");
      } else if (d->kind == "moments") {
        u.moments.clear();
        for (int p = 1; p <= 3; ++p) {
          CompensatedSum s;
          for (Eigen::Index k = 0; k < data.cross.size(); ++k) s.add(std::pow(data.cross.data()[k], p));
          u.moments.push_back(s.value() / static_cast<double>(data.cross.size()));
        }
      }
    }
  }

  void gamma_delta(int N, const DiagnosticRequest& d) {
    try {
      const auto degrees = d.params.value("degrees", cfg_.model.degrees());
      const auto rep = estimate_gamma_delta(cfg_.model, N, cfg_.M, degrees, inner_for(N), cfg_.seed, threads_);
      json j = base(N, "gamma-delta");
      j["report"] = rep.to_json();
      record(j, N, "gamma-delta");
      for (const auto& e : rep.entries) {
        const std::string tag = "_p" + std::to_string(e.p) + "_j" + std::to_string(e.system);
        row(N, "gamma-delta", "gamma" + tag, e.gamma);
        row(N, "gamma-delta", "delta" + tag, e.delta);
      }
    } catch (const Error& e) {
      failure(N, "gamma-delta", e.what());
    }
  }

  void lemma1(int N, const DiagnosticRequest& d, bool exact) {
    if (!exact) {
      failure(N, "lemma1", "lemma1 checks need exact inner averages");
      return;
    }
    const int n = d.params.value("n", 2);
    const auto family = family_of(d.params);
    for (int p : d.params.value("degrees", std::vector<int>{d.params.value("p", 2)})) {
      const std::string tag = "_p" + std::to_string(p);
      try {
        if (cfg_.M >= 200) {
          const auto ids = check_lemma1_identities(cfg_.model, N, cfg_.M, n, family, p, cfg_.seed, threads_);
          json j = base(N, "lemma1");
          j["identities"] = ids.to_json();
          record(j, N, "lemma1");
          row(N, "lemma1", "identities_pass" + tag, ids.all_pass());
        } else {
          failure(N, "lemma1", "identity checks need M >= 200; skipped");
        }
        const auto bounds = check_lemma1_bounds(cfg_.model, N, cfg_.M, n, family, p, cfg_.seed, threads_);
        json j = base(N, "lemma1");
        j["bounds"] = bounds.to_json();
        record(j, N, "lemma1");
        row(N, "lemma1", "bounds_pass" + tag, bounds.all_pass());
      } catch (const Error& e) {
        failure(N, "lemma1", e.what());
      }
    }
  }

  void reduce_phi_psi(int N, const DiagnosticRequest& d, const std::vector<const UnitResult*>& units, int k) {
    const int n = d.params.value("n", 2), p = d.params.value("p", 2);
    const auto family = family_of(d.params);
    std::size_t idx = 0;
    for (int j : {1, 2})
      for (const auto& f : family) {
        Eigen::MatrixXd terms(static_cast<Eigen::Index>(units.size()), 4);
        for (std::size_t m = 0; m < units.size(); ++m)
          terms.row(static_cast<Eigen::Index>(m)) = units[m]->functionals[static_cast<std::size_t>(k)][idx];
        ++idx;
        const auto rep = reduce_functionals(terms, j, n, f, p);
        json rec = base(N, "phi-psi");
        rec["report"] = rep.to_json();
        record(rec, N, "phi-psi");
        const std::string tag = "_j" + std::to_string(j) + "_n" + std::to_string(n) + "_p" + std::to_string(p) + "[" + f.to_string() + "]";
        row(N, "phi-psi", "phi" + tag, rep.phi);
        row(N, "phi-psi", "psi" + tag, rep.psi);
      }
  }

  void reduce_lemma2(int N, const DiagnosticRequest& d, const std::vector<const UnitResult*>& units, int k) {
    const auto degrees = d.params.value("degrees", std::vector<int>{d.params.value("p", 2)});
    for (std::size_t q = 0; q < degrees.size(); ++q) {
      int passed = 0, chain = 0;
      double worst = 0.0;
      json per = json::array();
      for (const auto* u : units) {
        const auto& r = u->lemma2[static_cast<std::size_t>(k)][q];
        passed += r.pass;
        chain += r.chain_pass;
        worst = std::max(worst, std::abs(r.lhs.value - r.rhs.value) / (1.0 + std::abs(r.lhs.value)));
        per.push_back(r.to_json());
      }
      json rec = base(N, "lemma2");
      rec["p"] = degrees[q];
      rec["per_disorder"] = per;
      rec["passed"] = passed;
      rec["chain_passed"] = chain;
      record(rec, N, "lemma2");
      const std::string tag = "_p" + std::to_string(degrees[q]);
      row(N, "lemma2", "pass_fraction" + tag, static_cast<double>(passed) / static_cast<double>(units.size()));
      row(N, "lemma2", "chain_pass_fraction" + tag, static_cast<double>(chain) / static_cast<double>(units.size()));
      row(N, "lemma2", "max_relative_gap" + tag, worst);
    }
  }

  void reduce_lemma3(int N, const DiagnosticRequest& d, const std::vector<const UnitResult*>& units, int k) {
    const int n = d.params.value("n", 2);
    const double tol = d.params.value("gg_tolerance", 0.05);
    std::vector<OverlapSampleArray> data;
    for (const auto* u : units) data.push_back(u->lemma3[static_cast<std::size_t>(k)]);
    const auto forms = d.params.value("forms", std::vector<std::string>{"eq1"});
    int e = 0;
    for (const auto& ev : events_of(d.params, n)) {
      for (const auto& fs : forms) {
        const auto rep = check_lemma3_inequalities(data, ev, form_of(fs), tol);
        json rec = base(N, "lemma3");
        rec["events"] = ev.to_string();
        rec["report"] = rep.to_json();
        record(rec, N, "lemma3");
        const std::string tag = "_" + fs + "_event" + std::to_string(e);
        row(N, "lemma3", "margin" + tag, rep.margin);
        row(N, "lemma3", "status" + tag, rep.status == CheckStatus::Pass ? 1.0 : rep.status == CheckStatus::Fail ? 0.0 : -1.0);
      }
      ++e;
    }
  }

  void reduce_chaos(int N, const DiagnosticRequest& d, const std::vector<const UnitResult*>& units) {
    std::vector<EmpiricalMeasure> laws;
    for (const auto* u : units) laws.push_back(*u->cross_law);
    const auto th = thresholds_of(d.params);
    const ChaosStats s = chaos_statistics(std::span<const EmpiricalMeasure>(laws), th);
    json rec = base(N, "chaos");
    rec["w_even"] = estimate_json(s.w_even);
    rec["w_odd"] = estimate_json(s.w_odd);
    json tails = json::object();
    for (const auto& [c, e] : s.tail) tails[std::to_string(c)] = estimate_json(e);
    rec["tail"] = tails;
    json moments = json::array();
    for (const auto& m : s.moments) moments.push_back(estimate_json(m));
    rec["moments"] = moments;
    rec["mean_law"] = average_measures(laws).to_json();
    record(rec, N, "chaos");
    row(N, "chaos", "w_even", s.w_even);
    row(N, "chaos", "w_odd", s.w_odd);
    for (const auto& [c, e] : s.tail) {
      std::ostringstream os;
      os << "tail_" << c;
      row(N, "chaos", os.str(), e);
    }
    for (std::size_t p = 0; p < s.moments.size(); ++p) row(N, "chaos", "moment_" + std::to_string(p + 1), s.moments[p]);
  }

  void reduce_parisi(int N, const DiagnosticRequest& d, const std::vector<const UnitResult*>& units) {
    std::vector<EmpiricalMeasure> laws;
    for (const auto* u : units) laws.push_back(*u->within_law);
    const EmpiricalMeasure mu = average_measures(laws);
    const auto powers = powers_of(d.params);
    const Eigen::VectorXd m = moments_of(mu, powers);
    InversionOptions opt;
    opt.grid = d.params.value("grid", opt.grid);
    opt.mass_tol = d.params.value("mass_tol", opt.mass_tol);
    const ParisiEstimate est = invert_moments({m.data(), static_cast<std::size_t>(m.size())}, powers, opt);
    const double c_direct = inf_support(mu, opt.mass_tol);
    json rec = base(N, "parisi");
    rec["empirical"] = mu.to_json();
    rec["inverted"] = est.measure.to_json();
    rec["c_empirical"] = c_direct;
    rec["c_inverted"] = est.c;
    rec["moment_residual"] = est.moment_residual;
    rec["null_space_dim"] = est.null_space_dim;
    rec["converged"] = est.converged;
    rec["powers"] = powers;
    record(rec, N, "parisi");
    row(N, "parisi", "c_empirical", c_direct);
    row(N, "parisi", "c_inverted", est.c);
    row(N, "parisi", "moment_residual", est.moment_residual);
    row(N, "parisi", "null_space_dim", est.null_space_dim);
  }

  void reduce_log_partition(int N, const std::vector<const UnitResult*>& units) {
    std::vector<double> a, b;
    for (const auto* u : units) {
      a.push_back(u->log_partition->first);
      b.push_back(u->log_partition->second);
    }
    json rec = base(N, "log-partition");
    rec["log_z1"] = a;
    rec["log_z2"] = b;
    record(rec, N, "log-partition");
    row(N, "log-partition", "log_z1", mean_se(a));
    row(N, "log-partition", "log_z2", mean_se(b));
  }

  void reduce_moments(int N, const std::vector<const UnitResult*>& units) {
    json rec = base(N, "moments");
    for (int p = 1; p <= 3; ++p) {
      std::vector<double> xs;
      for (const auto* u : units) xs.push_back(u->moments[static_cast<std::size_t>(p - 1)]);
      rec["R^" + std::to_string(p)] = xs;
      row(N, "moments", "R^" + std::to_string(p), mean_se(xs));
    }
    record(rec, N, "moments");
  }

  void write() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.output_dir);
    {
      std::ofstream out(fs::path(cfg_.output_dir) / "records.jsonl");
      for (const auto& r : manifest_.records) out << r.dump() << '\n';
    }
    {
      std::ofstream out(fs::path(cfg_.output_dir) / "summary.csv");
      out << std::setprecision(17) << "N,diagnostic,statistic,estimate,se\n";
      for (const auto& r : manifest_.summary)
        out << r.N << ',' << r.diagnostic << ",\"" << r.statistic << "\"," << r.estimate << ',' << r.se << '\n';
    }
    {
      json m = manifest_.to_json();
      m["config"] = cfg_.raw;
      std::ofstream out(fs::path(cfg_.output_dir) / "manifest.json");
      out << m.dump(2) << '\n';
    }
  }

  const ExperimentConfig& cfg_;
  int threads_;
  std::string hash_;
  RunManifest manifest_;
};

}  // namespace

RunManifest run(const ExperimentConfig& config) {
  config.validate();
  return Runner(config).go();
}

}  // namespace pspin

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pspin/errors.hpp"
#include "pspin/harness.hpp"

using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int n_max = 0;
  int n = 0;
  int samples = 0;
  int threads = 0;
  std::string beta1, beta2, t;
  bool beta1_set = false, beta2_set = false;
  double default_t = -1.0;
  std::string support1, support2, witness1, witness2;
  std::string engine;
};

json pairs(const std::string& list) {
  json out = json::array();
  for (const auto& [p, v] : pspin::parse_beta_list(list)) out.push_back({p, v});
  return out;
}

json pattern_json(const std::string& s) {
  if (s.find(">=") != std::string::npos) return s;
  std::vector<int> ds;
  for (const auto& [p, v] : pspin::parse_beta_list([&] {
         std::string expanded;
         std::string item;
         std::stringstream ss(s);
         while (std::getline(ss, item, ',')) expanded += item + ":1,";
         return expanded;
       }()))
    ds.push_back(p);
  return ds;
}

// Base config: the file if given, then inline flags on top.
json compose(const Flags& f, const json& model_default) {
  json j = json::object();
  if (!f.config.empty()) j = pspin::load_config(f.config).raw;
  if (!j.contains("model")) j["model"] = model_default;
  json& m = j["model"];
  if (f.beta1_set) m["beta1"] = pairs(f.beta1);
  if (f.beta2_set) m["beta2"] = pairs(f.beta2);
  if (!f.t.empty()) m["t"] = pairs(f.t);
  if (f.default_t >= 0.0) m["default_t"] = f.default_t;
  if (!f.support1.empty()) m["support1"] = pattern_json(f.support1);
  if (!f.support2.empty()) m["support2"] = pattern_json(f.support2);
  if (f.seed_set) j["seed"] = f.seed;
  if (!f.out.empty()) j["output_dir"] = f.out;
  if (f.threads > 0) j["threads"] = f.threads;
  if (!f.engine.empty()) {
    if (j.contains("engine") && j["engine"].is_object())
      j["engine"]["kind"] = f.engine;
    else
      j["engine"] = f.engine;
  }
  return j;
}

void print(const pspin::RunManifest& m) {
  for (const auto& r : m.summary) {
    std::printf("%s", r.N ? ("N=" + std::to_string(r.N) + " ").c_str() : "");
    std::printf("%s %s=%.10g", r.diagnostic.c_str(), r.statistic.c_str(), r.estimate);
    if (r.se > 0.0) std::printf(" se=%.3g", r.se);
    std::printf("\n");
  }
  for (const auto& rec : m.records)
    if (rec.value("status", "") == "failed")
      std::printf("failed: %s %s\n", rec.value("diagnostic", "").c_str(), rec.value("error", "").c_str());
  std::printf("outputs: %s\n", m.failed_units ? "partial" : "complete");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled mixed p-spin simulator and chaos diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pspin::kVersion);
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
    s->add_option("--seed", f.seed, "master seed")->each([&](const std::string&) { f.seed_set = true; });
    s->add_option("--out", f.out, "output directory");
    s->add_option("--threads", f.threads, "worker threads (default: PSPIN_THREADS or 1)");
    s->add_option("--beta1", f.beta1, "system 1 coefficients, e.g. 2:1.0,3:0.5 (empty for none)")
        ->each([&](const std::string&) { f.beta1_set = true; });
    s->add_option("--beta2", f.beta2, "system 2 coefficients")->each([&](const std::string&) { f.beta2_set = true; });
    s->add_option("--t", f.t, "per-degree correlations, e.g. 2:0.5");
    s->add_option("--default-t", f.default_t, "correlation for unlisted degrees");
    s->add_option("--support1", f.support1, "declared support of system 1 (evens>=2, odds>=3, all>=1 or a list)");
    s->add_option("--support2", f.support2, "declared support of system 2");
  };
  auto sized = [&](CLI::App* s) {
    s->add_option("--n", f.n, "system size")->check(CLI::Range(1, 64));
    s->add_option("--samples", f.samples, "disorder samples M")->check(CLI::PositiveNumber);
    s->add_option("--engine", f.engine, "exact, mc or auto")->check(CLI::IsMember({"exact", "mc", "auto"}));
  };

  auto* conditions = app.add_subcommand("conditions", "decide the chaos conditions for a model");
  common(conditions);
  conditions->add_option("--witness1", f.witness1, "dense-subset witness for system 1");
  conditions->add_option("--witness2", f.witness2, "dense-subset witness for system 2");
  auto* exact = app.add_subcommand("exact", "exact enumeration: log partition functions and cross moments");
  common(exact);
  sized(exact);
  auto* mc = app.add_subcommand("mc", "parallel-tempering sampling: cross moments and chaos statistics");
  common(mc);
  sized(mc);
  auto* identities = app.add_subcommand("identities", "Lemma 1 and Lemma 2 checks on exact tables");
  common(identities);
  sized(identities);
  auto* sweep = app.add_subcommand("chaos-sweep", "chaos statistics over an N-sweep");
  common(sweep);
  sized(sweep);
  sweep->add_option("--n-max", f.n_max, "largest N; the sweep runs N = 8, 12, ... up to it")->check(CLI::Range(1, 64));
  auto* parisi = app.add_subcommand("parisi", "Parisi measure estimate from |R12| moments");
  common(parisi);
  sized(parisi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  const json sk{{"beta1", json::array({json::array({2, 1.0})})},
                {"beta2", json::array({json::array({2, 1.0})})},
                {"default_t", 0.5}};
  json cfg;
  try {
    if (conditions->parsed()) {
      cfg = compose(f, json::object());
      json d{{"kind", "conditions"}};
      if (!f.witness1.empty()) d["witness1"] = pattern_json(f.witness1);
      if (!f.witness2.empty()) d["witness2"] = pattern_json(f.witness2);
      cfg["diagnostics"] = json::array({d});
      cfg.erase("Ns");
    } else {
      cfg = compose(f, sk);
      const int n = f.n ? f.n : 8;
      if (f.n || !cfg.contains("Ns")) cfg["Ns"] = {n};
      if (f.samples || !cfg.contains("M")) cfg["M"] = f.samples ? f.samples : 20;
      if (exact->parsed()) {
        cfg["engine"] = "exact";
        cfg["diagnostics"] = {"log-partition", "moments"};
      } else if (mc->parsed()) {
        if (f.engine.empty()) cfg["engine"] = "mc";
        cfg["diagnostics"] = {"moments", "chaos"};
      } else if (identities->parsed()) {
        cfg["engine"] = "exact";
        cfg["diagnostics"] = {json{{"kind", "lemma1"}, {"degrees", {1, 2}}},
                              json{{"kind", "lemma2"}, {"degrees", {1, 2, 3}}}};
      } else if (sweep->parsed()) {
        if (f.n_max) {
          json ns = json::array();
          for (int N = 8; N <= f.n_max; N += 4) ns.push_back(N);
          if (ns.empty()) ns.push_back(f.n_max);
          cfg["Ns"] = ns;
        }
        cfg["diagnostics"] = {"chaos"};
      } else if (parisi->parsed()) {
        cfg["diagnostics"] = {"parisi"};
      }
    }
  } catch (const pspin::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  pspin::ExperimentConfig config;
  try {
    config = pspin::parse_config(cfg);
  } catch (const pspin::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "usage error: malformed config: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto manifest = pspin::run(config);
    print(manifest);
    bool failed = manifest.failed_units > 0;
    for (const auto& rec : manifest.records) failed = failed || rec.value("status", "") == "failed";
    return failed ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
}

#ifndef PSPIN_HARNESS_HPP
#define PSPIN_HARNESS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pspin/diagnostics.hpp"
#include "pspin/mc.hpp"
#include "pspin/model.hpp"

namespace pspin {

inline constexpr const char* kVersion = "0.1.0";

enum class EngineKind { Exact, Mc, Auto };

struct EngineChoice {
  EngineKind kind = EngineKind::Auto;
  int auto_threshold = 16;  // Auto: exact for N <= threshold
  SamplerConfig sampler;
};

// One requested report. `params` keeps the raw JSON parameters of the entry.
struct DiagnosticRequest {
  std::string kind;  // conditions, gamma-delta, phi-psi, lemma1, lemma2, lemma3, chaos, parisi, log-partition, moments
  nlohmann::json params = nlohmann::json::object();
};

struct ExperimentConfig {
  CoupledModelSpec model;
  std::vector<int> Ns;
  int M = 1;
  EngineChoice engine;
  std::vector<DiagnosticRequest> diagnostics;
  std::uint64_t seed = 0;
  std::string output_dir = "pspin-out";
  int threads = 0;  // 0: PSPIN_THREADS or 1
  nlohmann::json raw;

  void validate() const;
};

IndexSetPattern parse_pattern(const nlohmann::json& j);
CoupledModelSpec parse_model(const nlohmann::json& j);
nlohmann::json model_to_json(const CoupledModelSpec& spec);
TestFunction parse_test_function(const nlohmann::json& j);
IntervalSet parse_intervals(const nlohmann::json& j);
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
// "2:1.0,3:0.5" -> {2: 1.0, 3: 0.5}
std::map<int, double> parse_beta_list(const std::string& text);

struct SummaryRow {
  int N = 0;  // 0 for N-independent reports
  std::string diagnostic;
  std::string statistic;
  double estimate = 0.0;
  double se = 0.0;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::map<int, std::uint64_t> unit_seeds;  // N -> disorder stream master
  std::string generator;
  std::string version;
  double wall_seconds = 0.0;
  int threads = 1;
  int failed_units = 0;
  std::map<std::string, std::map<std::string, std::string>> outputs;  // N -> diagnostic -> file
  std::vector<SummaryRow> summary;
  std::vector<nlohmann::json> records;

  nlohmann::json to_json() const;
};

int resolve_threads(int requested);
std::string config_hash(const nlohmann::json& raw);

// Runs every requested diagnostic for every N and writes records.jsonl, summary.csv and manifest.json.
RunManifest run(const ExperimentConfig& config);

}  // namespace pspin

#endif  // PSPIN_HARNESS_HPP

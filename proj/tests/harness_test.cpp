#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pspin/errors.hpp"
#include "pspin/harness.hpp"

using namespace pspin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pspin-test-" + name);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json sk_config(const std::string& out) {
  return json{{"seed", 17},
              {"model", {{"beta1", {{2, 1.0}}}, {"beta2", {{2, 0.8}, {3, 0.5}}}, {"default_t", 0.5}}},
              {"Ns", {4, 6}},
              {"M", 12},
              {"engine", "exact"},
              {"output_dir", out},
              {"diagnostics", {"conditions", "moments", "log-partition",
                               {{"kind", "phi-psi"}, {"n", 2}, {"p", 2}},
                               {{"kind", "lemma2"}, {"degrees", {1, 2}}},
                               "chaos"}}};
}

int cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(PSPIN_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string text;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = pclose(pipe);
  if (output) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("patterns") {
    CHECK(parse_pattern(json{3, 5, 3}) == IndexSetPattern::finite({3, 5}));
    CHECK(parse_pattern("evens>=4") == IndexSetPattern::evens(4));
    CHECK(parse_pattern("odds>=3") == IndexSetPattern::odds(3));
    CHECK(parse_pattern("all>=1") == IndexSetPattern::all(1));
    CHECK_THROWS_AS(parse_pattern("primes"), InvalidSpec);
  }
  SUBCASE("model round trip") {
    const auto spec = parse_model(sk_config("x")["model"]);
    CHECK(spec.params1.beta(2) == 1.0);
    CHECK(spec.params2.beta(3) == 0.5);
    CHECK(spec.coupling.t(7) == 0.5);
    CHECK(parse_model(model_to_json(spec)) == spec);
  }
  SUBCASE("beta lists") {
    const auto b = parse_beta_list("2:1.0,3:0.5");
    CHECK(b.at(2) == 1.0);
    CHECK(b.at(3) == 0.5);
    CHECK(parse_beta_list("").empty());
    CHECK_THROWS_AS(parse_beta_list("2=1"), InvalidSpec);
  }
  SUBCASE("intervals and test functions") {
    CHECK(parse_intervals(json{0.0, 0.5}).contains(0.25));
    CHECK_FALSE(parse_intervals(json{{0.0, 0.1}, {0.4, 0.5}}).contains(0.25));
    CHECK(parse_test_function("1").kind() == TestFunction::Kind::Constant);
    const auto f = parse_test_function(json{{"monomial", {{"R1", 1, 2, 2}, {"R", 3, 1, 1}}}});
    CHECK(f.replicas() == 3);
    const auto g = parse_test_function(json{{"indicator", {"R", 1, 1}}, {"set", {0.0, 1.0}}});
    CHECK(g.kind() == TestFunction::Kind::Indicator);
  }
  SUBCASE("invalid configs") {
    auto bad = [](auto edit) {
      json j = sk_config("x");
      edit(j);
      CHECK_THROWS_AS(parse_config(j), InvalidSpec);
    };
    bad([](json& j) { j["M"] = 0; });
    bad([](json& j) { j["Ns"] = {6, 4}; });
    bad([](json& j) { j["Ns"] = {65}; });
    bad([](json& j) { j["engine"] = "quantum"; });
    bad([](json& j) { j["diagnostics"] = {"telepathy"}; });
    bad([](json& j) { j["model"]["default_t"] = 1.5; });
    bad([](json& j) { j["engine"] = {{"kind", "auto"}, {"auto_threshold", 40}}; });
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidSpec);
  }
}

TEST_CASE("runs write records, summary and manifest") {
  const auto out = scratch("full");
  const auto m = run(parse_config(sk_config(out)));
  CHECK(m.failed_units == 0);
  for (const char* f : {"records.jsonl", "summary.csv", "manifest.json"}) CHECK(fs::exists(fs::path(out) / f));
  const json man = json::parse(slurp(fs::path(out) / "manifest.json"));
  CHECK(man.at("master_seed") == 17);
  CHECK(man.at("config") == sk_config(out));
  CHECK(man.at("outputs").contains("4"));
  CHECK(man.at("outputs").contains("6"));
  std::istringstream rec(slurp(fs::path(out) / "records.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(rec, line)) {
    const json r = json::parse(line);
    CHECK(r.contains("spec_hash"));
    CHECK(r.value("status", "ok") != "failed");
    ++n;
  }
  CHECK(n == static_cast<int>(m.records.size()));
  CHECK(slurp(fs::path(out) / "summary.csv").starts_with("N,diagnostic,statistic,estimate,se\n"));
}

TEST_CASE("empty and conditions-only runs") {
  json j = sk_config(scratch("empty"));
  j["diagnostics"] = json::array();
  auto m = run(parse_config(j));
  CHECK(m.records.empty());
  CHECK(m.summary.empty());

  j = sk_config(scratch("cond"));
  j.erase("Ns");
  j["diagnostics"] = {"conditions"};
  m = run(parse_config(j));
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].at("diagnostic") == "conditions");
}

TEST_CASE("reproducible and thread independent") {
  json j = sk_config(scratch("rep-a"));
  j["threads"] = 1;
  const auto a = run(parse_config(j));
  j["output_dir"] = scratch("rep-b");
  j["threads"] = 4;
  const auto b = run(parse_config(j));
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) CHECK(a.records[k] == b.records[k]);
  j["seed"] = 18;
  j["output_dir"] = scratch("rep-c");
  const auto c = run(parse_config(j));
  CHECK(c.records != a.records);
}

TEST_CASE("MC runs are reproducible") {
  json j = sk_config(scratch("mc-a"));
  j["Ns"] = {8};
  j["M"] = 3;
  j["engine"] = {{"kind", "mc"}, {"sweeps", 2000}, {"burn_in", 200}};
  j["diagnostics"] = {"moments", "chaos"};
  j["threads"] = 1;
  const auto a = run(parse_config(j));
  j["threads"] = 3;
  j["output_dir"] = scratch("mc-b");
  const auto b = run(parse_config(j));
  CHECK(a.records == b.records);
}

TEST_CASE("failed units are recorded and the rest continue") {
  json j = sk_config(scratch("fail"));
  j["Ns"] = {30};
  j["M"] = 2;
  j["diagnostics"] = {"conditions", "moments"};
  const auto m = run(parse_config(j));
  CHECK(m.failed_units == 2);
  int failed = 0;
  for (const auto& r : m.records)
    if (r.value("status", "") == "failed") {
      ++failed;
      CHECK(r.contains("error"));
    }
  CHECK(failed == 2);
  CHECK(m.records[0].at("diagnostic") == "conditions");
}

TEST_CASE("command line") {
  std::string text;
  const auto out = scratch("cli");
  CHECK(cli("exact --n 6 --beta1 \"\" --beta2 \"\" --samples 2 --out " + out, &text) == 0);
  CHECK(text.find("outputs: complete") != std::string::npos);
  bool found = false;
  std::istringstream csv(slurp(fs::path(out) / "summary.csv"));
  for (std::string line; std::getline(csv, line);)
    if (line.find("log-partition") != std::string::npos && line.find("\"log_z1\"") != std::string::npos) {
      const double v = std::stod(line.substr(line.find("\"log_z1\"") + 9));
      CHECK(v == doctest::Approx(6.0 * std::log(2.0)).epsilon(1e-12));
      found = true;
    }
  CHECK(found);

  CHECK(cli("conditions --beta1 3:1 --beta2 5:1 --out " + scratch("cli-c"), &text) == 0);
  CHECK(text.find("co=1") != std::string::npos);
  CHECK(cli("teleport", &text) == 1);
  CHECK(cli("exact --n 0 --out " + scratch("cli-0"), &text) == 1);
  CHECK(cli("exact --beta1 2=1", &text) == 1);
  CHECK(cli("exact --n 30 --samples 1 --out " + scratch("cli-2"), &text) == 2);
  CHECK(text.find("outputs: partial") != std::string::npos);
}

TEST_CASE("config hash ignores where and how fast a run happens") {
  json a = sk_config("one");
  json b = sk_config("two");
  b["threads"] = 8;
  CHECK(config_hash(a) == config_hash(b));
  b["seed"] = 99;
  CHECK(config_hash(a) != config_hash(b));
}

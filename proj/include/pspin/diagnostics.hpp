#ifndef PSPIN_DIAGNOSTICS_HPP
#define PSPIN_DIAGNOSTICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pspin/disorder.hpp"
#include "pspin/exact.hpp"
#include "pspin/mc.hpp"
#include "pspin/model.hpp"
#include "pspin/overlaps.hpp"
#include "pspin/stats.hpp"

namespace pspin {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool closed_lo = true;
  bool closed_hi = true;

  bool contains(double x) const {
    return (closed_lo ? x >= lo : x > lo) && (closed_hi ? x <= hi : x < hi);
  }
  std::string to_string() const;
};

// A finite union of intervals.
struct IntervalSet {
  std::vector<Interval> parts;

  IntervalSet() = default;
  IntervalSet(Interval i) : parts{i} {}
  IntervalSet(std::vector<Interval> ps) : parts(std::move(ps)) {}
  bool contains(double x) const;
  // True when [lo, hi] lies inside a single closed part.
  bool covers(double lo, double hi) const;
  std::string to_string() const;
};

using OverlapPower = std::pair<OverlapId, int>;

// Bounded test function of the overlaps on n replicas.
class TestFunction {
 public:
  enum class Kind { Constant, Monomial, Indicator };

  static TestFunction constant();
  static TestFunction monomial(std::vector<OverlapPower> factors);
  static TestFunction indicator(OverlapId id, IntervalSet set);

  Kind kind() const { return kind_; }
  const std::vector<OverlapPower>& factors() const { return factors_; }
  const IntervalSet& set() const { return set_; }
  // Largest replica label the function touches (0 for constants).
  int replicas() const;
  double evaluate(const OverlapSampleArray& data, Eigen::Index row) const;
  std::string to_string() const;

 private:
  Kind kind_ = Kind::Constant;
  std::vector<OverlapPower> factors_;
  IntervalSet set_;
};

// A ten-member family of monomials on two replicas used by the identity and bound checks.
std::vector<TestFunction> default_test_family();

// Pure-process values attached to the first replica: H^1_p(sigma^1), H^2_p(rho^1), Z^2_p(sigma^1), Z^1_p(rho^1), each / N.
enum class Insertion { None, H1, H2, Z2, Z1 };

// Weighted correlation table sum_sigma G_j(sigma) X(sigma) sigma_S for an insertion X on system j.
Eigen::VectorXd insertion_table(const ExactPair& pair, int system, const Eigen::VectorXd& values);

// Exact Gibbs average of prod (overlap)^e over independent replicas. When `weighted` is given it replaces
// the correlation table of replica 1 of `weighted_system`.
double gibbs_average(const ExactPair& pair, std::span<const OverlapPower> factors,
                     const Eigen::VectorXd* weighted = nullptr, int weighted_system = 1);

// Per-unit disorder seed used by every disorder-averaged routine.
DisorderSeed unit_seed(std::uint64_t master, int N, std::uint64_t index);

struct ExactInner {
  ExactBudget budget;
};
struct McInner {
  SamplerConfig config;
};
using InnerMode = std::variant<ExactInner, McInner>;

struct GammaDelta {
  int p = 0;
  int system = 1;
  Estimate gamma;
  Estimate delta;
};

struct GGResidualReport {
  int N = 0;
  int M = 0;
  std::vector<GammaDelta> entries;

  const GammaDelta& at(int p, int system) const;
  nlohmann::json to_json() const;
};

GGResidualReport estimate_gamma_delta(const CoupledModelSpec& spec, int N, int M, std::span<const int> degrees,
                                      const InnerMode& inner, std::uint64_t seed, int threads = 1);

struct FunctionalReport {
  int j = 1;
  int n = 1;
  int p = 1;
  std::string f;
  Estimate phi;
  Estimate psi;
  int groups = 0;
  nlohmann::json to_json() const;
};

// Data path: each array is one disorder sample; a single array is split into 32 time batches.
FunctionalReport compute_phi_psi(std::span<const OverlapSampleArray> data, int j, int n, const TestFunction& f, int p);
// Exact path: one pair per disorder sample.
FunctionalReport compute_phi_psi(std::span<const ExactPair> pairs, int j, int n, const TestFunction& f, int p);

// Per-disorder inner averages (A, X, Y, B) with Phi = E[A] - E[X]E[Y]/n and Psi = E[B], for streaming reductions.
Eigen::RowVector4d functional_terms(const ExactPair& pair, int j, int n, const TestFunction& f, int p);
Eigen::RowVector4d functional_terms(const OverlapSampleArray& data, int j, int n, const TestFunction& f, int p);
FunctionalReport reduce_functionals(const Eigen::MatrixXd& terms, int j, int n, const TestFunction& f, int p);

struct IdentityCheck {
  std::string name;
  std::string f;
  Estimate lhs;
  Estimate rhs;
  bool pass = false;
};

struct Lemma1IdentityReport {
  int N = 0;
  int M = 0;
  int n = 0;
  int p = 0;
  std::vector<IdentityCheck> checks;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

// Both sides of the three integration-by-parts identities from exact inner averages; pass within 4 combined SE.
Lemma1IdentityReport check_lemma1_identities(const CoupledModelSpec& spec, int N, int M, int n,
                                             std::span<const TestFunction> family, int p, std::uint64_t seed,
                                             int threads = 1);

struct BoundCheck {
  std::string name;
  std::string f;
  Estimate lhs;    // signed left-hand combination before the absolute value
  Estimate bound;  // Delta or Gamma divided by n
  bool pass = false;
};

struct Lemma1BoundReport {
  int N = 0;
  int M = 0;
  int n = 0;
  int p = 0;
  GGResidualReport residuals;
  std::vector<BoundCheck> checks;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

Lemma1BoundReport check_lemma1_bounds(const CoupledModelSpec& spec, int N, int M, int n,
                                      std::span<const TestFunction> family, int p, std::uint64_t seed,
                                      int threads = 1);

struct Lemma2Report {
  int p = 0;
  int l = 2;
  Estimate lhs;
  Estimate rhs;
  bool pass = false;
  std::optional<Estimate> chain;  // <||R_11| - |R_1l||^{2p}>, even p only
  bool chain_pass = true;
  nlohmann::json to_json() const;
};

Lemma2Report check_lemma2_identity(const ExactPair& pair, int p, int l, const ExactBudget& budget = {});
Lemma2Report check_lemma2_identity(std::span<const OverlapSampleArray> data, int p, int l);

struct EventSpec {
  IntervalSet A{Interval{-1.0, 1.0}};
  IntervalSet A1{Interval{0.0, 1.0}};
  IntervalSet A2{Interval{0.0, 1.0}};
  int n = 2;
  std::string to_string() const;
};

enum class Lemma3Form { Eq1, Eq2, Eq3 };
enum class CheckStatus { Pass, Fail, NotApplicable };
std::string to_string(CheckStatus s);

struct Lemma3Report {
  Lemma3Form form = Lemma3Form::Eq1;
  CheckStatus status = CheckStatus::NotApplicable;
  double lhs = 0.0;
  double rhs = 0.0;
  Estimate margin;  // lhs - rhs
  double slack = 0.0;
  double gg_tolerance = 0.0;
  std::vector<double> defects;
  std::string reason;
  nlohmann::json to_json() const;
};

Lemma3Report check_lemma3_inequalities(std::span<const OverlapSampleArray> data, const EventSpec& events,
                                       Lemma3Form form, double gg_tolerance);

}  // namespace pspin

#endif  // PSPIN_DIAGNOSTICS_HPP

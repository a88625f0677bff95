#ifndef PSPIN_MODEL_HPP
#define PSPIN_MODEL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pspin {

// A possibly infinite set of degrees. Finite lists are sorted and deduplicated.
class IndexSetPattern {
 public:
  enum class Kind { Finite, Evens, Odds, All };

  IndexSetPattern() = default;
  static IndexSetPattern finite(std::vector<int> degrees);
  static IndexSetPattern evens(int start);
  static IndexSetPattern odds(int start);
  static IndexSetPattern all(int start);

  Kind kind() const { return kind_; }
  // First member for symbolic kinds (normalized to the right parity).
  int start() const { return start_; }
  const std::vector<int>& degrees() const { return degrees_; }

  bool is_finite() const { return kind_ == Kind::Finite; }
  bool empty() const { return kind_ == Kind::Finite && degrees_.empty(); }
  bool contains(int p) const;
  // Members not exceeding `horizon`, ascending.
  std::vector<int> members_up_to(int horizon) const;

  std::string to_string() const;
  friend bool operator==(const IndexSetPattern&, const IndexSetPattern&) = default;

 private:
  Kind kind_ = Kind::Finite;
  int start_ = 1;
  std::vector<int> degrees_;
};

// Decidable containment a ⊆ b.
bool is_subset(const IndexSetPattern& a, const IndexSetPattern& b);

// Müntz criterion: span{x^p : p in pattern} dense in C[0,1] iff sum 1/p diverges.
// Finite patterns are never dense; every symbolic pattern is.
bool muntz_dense(const IndexSetPattern& pattern);

// Coefficients (beta_p) of a mixed p-spin Hamiltonian. Zero coefficients are not stored.
//
// `symbolic_support` optionally declares the untruncated index set when `betas` is the
// truncation of an infinite model; condition checking uses it to certify dense subsets.
struct MixedSpinParams {
  std::map<int, double> betas;
  std::optional<IndexSetPattern> symbolic_support;

  MixedSpinParams() = default;
  explicit MixedSpinParams(const std::map<int, double>& b, std::optional<IndexSetPattern> support = std::nullopt);

  double beta(int p) const;
  std::vector<int> support() const;
  int horizon() const { return betas.empty() ? 0 : betas.rbegin()->first; }
  MixedSpinParams scaled(double s) const;
  friend bool operator==(const MixedSpinParams&, const MixedSpinParams&) = default;
};

struct CouplingSpec {
  std::map<int, double> correlations;
  double default_correlation = 1.0;

  double t(int p) const;
  friend bool operator==(const CouplingSpec&, const CouplingSpec&) = default;
};

struct CoupledModelSpec {
  MixedSpinParams params1;
  MixedSpinParams params2;
  CouplingSpec coupling;

  // Union of both supports, ascending.
  std::vector<int> degrees() const;
  const MixedSpinParams& params(int system) const { return system == 1 ? params1 : params2; }
  CoupledModelSpec swapped() const { return {params2, params1, coupling}; }
  // Throws InvalidSpec when an invariant fails.
  void validate() const;
  friend bool operator==(const CoupledModelSpec&, const CoupledModelSpec&) = default;
};

struct IndexSets {
  IndexSetPattern all;
  IndexSetPattern even;
  IndexSetPattern odd;
};

IndexSets index_sets(const MixedSpinParams& params);

// Certificate for one of the conditions (C_j^e), (C_j^o).
struct ConditionWitness {
  bool holds = false;
  // Set-difference clause: a degree in I_other \ I_j of the right parity.
  std::optional<int> difference_degree;
  // Ratio clause: dense subset, common ratio and the degree breaking it.
  std::optional<IndexSetPattern> dense_subset;
  std::optional<double> tau;
  std::optional<int> p0;
};

struct ConditionReport {
  std::optional<int> corrp_even;
  std::optional<int> corrp_odd;
  ConditionWitness c1e, c1o, c2e, c2o;
  bool ce = false;
  bool co = false;

  // Swaps the roles of the two systems (for symmetry checks).
  ConditionReport swapped() const;
};

// Decides (Corrp), (C_j^e), (C_j^o), (C^e), (C^o). Witnesses are candidate dense subsets A
// for the ratio clause of system 1 and system 2 respectively; a witness applies to the
// parity clause matching its members. Without witnesses, tails Evens(s)/Odds(s) of a
// declared symbolic support are tried automatically.
ConditionReport check_chaos_conditions(const CoupledModelSpec& spec,
                                       const std::optional<IndexSetPattern>& c0_witness_1 = std::nullopt,
                                       const std::optional<IndexSetPattern>& c0_witness_2 = std::nullopt);

}  // namespace pspin

#endif  // PSPIN_MODEL_HPP

#ifndef PSPIN_EXACT_HPP
#define PSPIN_EXACT_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pspin/disorder.hpp"
#include "pspin/measures.hpp"
#include "pspin/spins.hpp"
#include "pspin/stats.hpp"

namespace pspin {

struct ExactBudget {
  int max_table_n = 24;         // energies table
  int max_double_sum_n = 14;    // direct 2^{2N} sums
  int max_factorization_p = 4;  // site-sum factorization of moments
};

// Definitional energy: sum_p beta_p N^{-(p-1)/2} sum_{i_1..i_p} g_{i_1..i_p} sigma_{i_1}..sigma_{i_p}.
double energy(const SpinConfiguration& config, const CoupledDisorder& disorder, int system);

// Which tensor of a degree to expand into a polynomial.
enum class TensorRole { Coupling1, Coupling2, Private1, Private2, Shared };

// Full mixed Hamiltonian of one system, scaled by `scale`.
SpinPolynomial hamiltonian_polynomial(const CoupledDisorder& disorder, int system, double scale = 1.0);
// Pure degree-p process N^{-(p-1)/2} sum g sigma..sigma for the chosen tensor, without beta.
SpinPolynomial pure_polynomial(const CoupledDisorder& disorder, int p, TensorRole role);

class GibbsTable {
 public:
  GibbsTable() = default;
  // Normalizes `energies` with a max-shifted log-sum-exp.
  GibbsTable(int N, Eigen::VectorXd energies);

  int N() const { return N_; }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::VectorXd& probabilities() const { return probs_; }
  double log_partition() const { return log_partition_; }
  double probability(std::uint64_t bits) const { return probs_[static_cast<Eigen::Index>(bits)]; }

  // Inverse-CDF draw of a configuration.
  template <typename Rng>
  std::uint64_t sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cdf_[cdf_.size() - 1]);
    const double x = u(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint64_t>(it - cdf_.begin());
  }

 private:
  int N_ = 0;
  Eigen::VectorXd energies_;
  Eigen::VectorXd probs_;
  std::vector<double> cdf_;
  double log_partition_ = 0.0;
};

GibbsTable build_gibbs_table(const CoupledDisorder& disorder, int system, const ExactBudget& budget = {}, int threads = 1);

// <sigma_S> for every subset S, indexed by the subset mask (Walsh-Hadamard transform).
Eigen::VectorXd correlation_table(const GibbsTable& table);
// sum_sigma weights(sigma) sigma_S for every S.
Eigen::VectorXd correlation_table(const Eigen::VectorXd& weights);

// Correlations of a single table; `values` lists <sigma_{i_1}..sigma_{i_k}> for i_1 < .. < i_k.
class CorrelationSet {
 public:
  CorrelationSet(const GibbsTable& table, int order);

  int order() const { return order_; }
  const std::map<std::vector<int>, double>& values() const { return values_; }
  // Any tuple; repeated indices cancel in pairs.
  double value(std::span<const int> tuple) const;

 private:
  int order_;
  Eigen::VectorXd table_;
  std::map<std::vector<int>, double> values_;
};

enum class MomentStrategy { Auto, Factorization, Distribution, Direct };

// <R(sigma, rho)^p> under table1 x table2.
double cross_overlap_moment(const GibbsTable& table1, const GibbsTable& table2, int p,
                            MomentStrategy strategy = MomentStrategy::Auto, const ExactBudget& budget = {});

struct ExactMode {};
struct HybridMode {
  int samples = 10000;
  std::uint64_t seed = 0;
};
using DistributionMode = std::variant<ExactMode, HybridMode>;

// Law of R(sigma, rho) on the N+1 overlap values. Exact mode uses the XOR convolution of
// the two Gibbs measures; Hybrid draws sigma from table1 and sums exactly over rho.
EmpiricalMeasure cross_overlap_distribution(const GibbsTable& table1, const GibbsTable& table2,
                                            DistributionMode mode = ExactMode{}, const ExactBudget& budget = {});
EmpiricalMeasure within_overlap_distribution(const GibbsTable& table, DistributionMode mode = ExactMode{},
                                             const ExactBudget& budget = {});
// Direct 2^{2N} double sum; used as an independent check.
EmpiricalMeasure cross_overlap_distribution_direct(const GibbsTable& table1, const GibbsTable& table2,
                                                   const ExactBudget& budget = {});

// Monte Carlo estimate over fresh disorder of (1/N) H_{N,p}(s1) H_{N,p}(s2).
Estimate covariance_probe(int N, int p, int samples, const SpinConfiguration& s1, const SpinConfiguration& s2,
                          std::uint64_t seed);

// Both systems of one disorder realization, with correlation tables.
struct ExactPair {
  GibbsTable table1;
  GibbsTable table2;
  Eigen::VectorXd corr1;
  Eigen::VectorXd corr2;

  const GibbsTable& table(int system) const { return system == 1 ? table1 : table2; }
  const Eigen::VectorXd& corr(int system) const { return system == 1 ? corr1 : corr2; }
};

ExactPair build_exact_pair(const CoupledDisorder& disorder, const ExactBudget& budget = {}, int threads = 1);

}  // namespace pspin

#endif  // PSPIN_EXACT_HPP

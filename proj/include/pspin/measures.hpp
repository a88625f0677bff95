#ifndef PSPIN_MEASURES_HPP
#define PSPIN_MEASURES_HPP

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "pspin/stats.hpp"

namespace pspin {

// Atoms (strictly ascending) with nonnegative weights summing to one, on [lo, hi].
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  // Validates the invariants; sorts and merges equal atoms first.
  EmpiricalMeasure(Eigen::VectorXd atoms, Eigen::VectorXd weights, double lo = -1.0, double hi = 1.0);

  static EmpiricalMeasure dirac(double atom, double lo = -1.0, double hi = 1.0);
  // Uniform weights over the given samples.
  static EmpiricalMeasure from_samples(std::span<const double> samples, double lo = -1.0, double hi = 1.0);
  // Image under x -> |x|, living on [0, max(|lo|,|hi|)].
  EmpiricalMeasure absolute() const;

  const Eigen::VectorXd& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  Eigen::Index size() const { return atoms_.size(); }

  double mass(double a, double b, bool closed_left = true, bool closed_right = true) const;
  double cdf(double x) const;  // mu((-inf, x])
  double mean() const;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  static EmpiricalMeasure from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd atoms_;
  Eigen::VectorXd weights_;
  double lo_ = -1.0;
  double hi_ = 1.0;
};

// Weighted average of several measures on a common interval.
EmpiricalMeasure average_measures(std::span<const EmpiricalMeasure> measures);

double total_variation(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
double kolmogorov_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
// Kolmogorov distance to the uniform law on [0,1].
double kolmogorov_to_uniform(const EmpiricalMeasure& a);

// m_p = sum_k w_k atom_k^p.
Eigen::VectorXd moments_of(const EmpiricalMeasure& measure, std::span<const int> powers);

struct InversionOptions {
  int grid = 201;
  int max_iterations = 400000;
  double tolerance = 1e-10;  // relative objective decrease per iteration
  double mass_tol = 0.01;    // for the inf-support estimate
};

struct ParisiEstimate {
  EmpiricalMeasure measure;
  double c = 0.0;
  double moment_residual = 0.0;
  std::vector<int> powers_used;
  int null_space_dim = 0;
  int iterations = 0;
  bool converged = false;
};

// Simplex-constrained least squares on a uniform grid of [0,1]:
//   min_w sum_p (sum_k w_k q_k^p - m_p)^2,  w >= 0, sum w = 1.
// Solved by accelerated projected gradient with step 1/L, L = 2 lambda_max(A^T A),
// stopping when the relative objective decrease falls below `tolerance`. On
// non-convergence the best iterate is returned with converged = false.
ParisiEstimate invert_moments(std::span<const double> moments, std::span<const int> powers,
                              const InversionOptions& options = {});

// Smallest atom q with mu([lo, q]) > mass_tol.
double inf_support(const EmpiricalMeasure& measure, double mass_tol = 0.01);

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct ChaosStats {
  Estimate w_even;  // E< (|R| - <|R|>)^2 >
  Estimate w_odd;   // E< (R - <R>)^2 >
  std::map<double, Estimate> tail;  // c -> E< I(|R| > c) >
  std::vector<Estimate> moments;    // E<R^k>, k = 1..3
  int disorder_samples = 0;
};

// Chaos statistics from per-disorder laws of the cross overlap. Gibbs variances are taken
// per disorder and then averaged; standard errors are over disorder samples.
ChaosStats chaos_statistics(std::span<const EmpiricalMeasure> per_disorder_laws, std::span<const double> thresholds);

struct OverlapSampleArray;
// Same statistics from Monte Carlo overlap samples (cross overlaps of all replica pairs pooled).
// With a single disorder the standard errors come from batch means.
ChaosStats chaos_statistics(std::span<const OverlapSampleArray> per_disorder_samples, std::span<const double> thresholds);

}  // namespace pspin

#endif  // PSPIN_MEASURES_HPP

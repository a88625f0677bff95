#include "pspin/exact.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pspin/errors.hpp"
#include "pspin/seeding.hpp"

namespace pspin {

namespace {

// Calls fn(mask) for every p-tuple over [0, N), where mask is the odd-multiplicity set.
template <typename Fn>
void for_each_tuple_mask(int N, int p, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  std::uint64_t mask = p % 2 == 1 ? 1 : 0;
  while (true) {
    fn(mask);
    int pos = p - 1;
    for (; pos >= 0; --pos) {
      auto& i = idx[static_cast<std::size_t>(pos)];
      mask ^= std::uint64_t{1} << i;
      if (++i < N) {
        mask ^= std::uint64_t{1} << i;
        break;
      }
      i = 0;
      mask ^= 1;
    }
    if (pos < 0) return;
  }
}

double naive_tensor_energy(const CouplingTensor& t, const std::vector<int>& spins) {
  const int p = t.degree, N = t.N;
  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  double sum = 0.0;
  for (Eigen::Index e = 0; e < t.entries.size(); ++e) {
    double prod = t.entries[e];
    for (int i : idx) prod *= spins[static_cast<std::size_t>(i)];
    sum += prod;
    for (int pos = p - 1; pos >= 0; --pos) {
      if (++idx[static_cast<std::size_t>(pos)] < N) break;
      idx[static_cast<std::size_t>(pos)] = 0;
    }
  }
  return sum;
}

const CouplingTensor& tensor_for(const DegreeDisorder& d, TensorRole role) {
  switch (role) {
    case TensorRole::Coupling1:
      return d.g1;
    case TensorRole::Coupling2:
      return d.g2;
    case TensorRole::Private1:
      return d.private1;
    case TensorRole::Private2:
      return d.private2;
    case TensorRole::Shared:
      return d.shared;
  }
  return d.shared;
}

double degree_scale(int N, int p) { return std::pow(static_cast<double>(N), -(p - 1) / 2.0); }

EmpiricalMeasure law_from_popcounts(const std::vector<double>& mass_by_distance, int N) {
  Eigen::VectorXd atoms(N + 1), weights(N + 1);
  for (int d = N, k = 0; d >= 0; --d, ++k) {
    atoms[k] = static_cast<double>(N - 2 * d) / N;
    weights[k] = std::max(0.0, mass_by_distance[static_cast<std::size_t>(d)]);
  }
  weights /= weights.sum();
  return EmpiricalMeasure(atoms, weights, -1.0, 1.0);
}

void require_same_n(const GibbsTable& a, const GibbsTable& b) {
  if (a.N() != b.N()) throw DimensionMismatch("Gibbs tables have different N");
}

}  // namespace

double energy(const SpinConfiguration& config, const CoupledDisorder& disorder, int system) {
  if (config.N != disorder.N) throw DimensionMismatch("configuration and disorder differ in N");
  const std::vector<int> spins = config.spins();
  double h = 0.0;
  for (const auto& d : disorder.degrees) {
    const double beta = disorder.params(system).beta(d.degree);
    if (beta == 0.0) continue;
    h += beta * degree_scale(disorder.N, d.degree) * naive_tensor_energy(d.coupling(system), spins);
  }
  return h;
}

SpinPolynomial hamiltonian_polynomial(const CoupledDisorder& disorder, int system, double scale) {
  SpinPolynomial poly(disorder.N);
  for (const auto& d : disorder.degrees) {
    const double beta = disorder.params(system).beta(d.degree);
    if (beta == 0.0) continue;
    const auto& t = d.coupling(system);
    poly.add_tensor({t.entries.data(), static_cast<std::size_t>(t.entries.size())}, d.degree,
                    scale * beta * degree_scale(disorder.N, d.degree));
  }
  poly.compile();
  return poly;
}

SpinPolynomial pure_polynomial(const CoupledDisorder& disorder, int p, TensorRole role) {
  SpinPolynomial poly(disorder.N);
  const auto& t = tensor_for(disorder.at(p), role);
  poly.add_tensor({t.entries.data(), static_cast<std::size_t>(t.entries.size())}, p, degree_scale(disorder.N, p));
  poly.compile();
  return poly;
}

GibbsTable::GibbsTable(int N, Eigen::VectorXd energies) : N_(N), energies_(std::move(energies)) {
  if (energies_.size() != (Eigen::Index{1} << N)) throw DimensionMismatch("energy table size is not 2^N");
  if (!energies_.allFinite()) throw Error("non-finite energy in Gibbs table");
  const double top = energies_.maxCoeff();
  const double s = (energies_.array() - top).exp().sum();
  log_partition_ = top + std::log(s);
  probs_ = (energies_.array() - log_partition_).exp().matrix();
  cdf_.resize(static_cast<std::size_t>(probs_.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs_.size(); ++i) cdf_[static_cast<std::size_t>(i)] = (acc += probs_[i]);
}

GibbsTable build_gibbs_table(const CoupledDisorder& disorder, int system, const ExactBudget& budget, int threads) {
  if (disorder.N > budget.max_table_n || disorder.N > 30)
    throw MemoryBudget("exact enumeration for N = " + std::to_string(disorder.N) + " exceeds the table cap " +
                       std::to_string(budget.max_table_n));
  const SpinPolynomial poly = hamiltonian_polynomial(disorder, system);
  return GibbsTable(disorder.N, poly.evaluate_all(threads));
}

Eigen::VectorXd correlation_table(const Eigen::VectorXd& weights) {
  Eigen::VectorXd c = weights;
  walsh_hadamard(c);
  for (Eigen::Index s = 0; s < c.size(); ++s)
    if (std::popcount(static_cast<std::uint64_t>(s)) & 1) c[s] = -c[s];
  return c;
}

Eigen::VectorXd correlation_table(const GibbsTable& table) { return correlation_table(table.probabilities()); }

CorrelationSet::CorrelationSet(const GibbsTable& table, int order) : order_(order), table_(correlation_table(table)) {
  const int N = table.N();
  if (order < 0 || order > N) throw DimensionMismatch("correlation order out of range");
  std::vector<int> combo(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) combo[static_cast<std::size_t>(k)] = k;
  while (true) {
    std::uint64_t m = 0;
    for (int i : combo) m |= std::uint64_t{1} << i;
    values_[combo] = table_[static_cast<Eigen::Index>(m)];
    int pos = order - 1;
    while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == N - order + pos) --pos;
    if (pos < 0) break;
    ++combo[static_cast<std::size_t>(pos)];
    for (int k = pos + 1; k < order; ++k) combo[static_cast<std::size_t>(k)] = combo[static_cast<std::size_t>(k) - 1] + 1;
  }
}

double CorrelationSet::value(std::span<const int> tuple) const {
  std::uint64_t m = 0;
  for (int i : tuple) m ^= std::uint64_t{1} << i;
  return table_[static_cast<Eigen::Index>(m)];
}

double cross_overlap_moment(const GibbsTable& table1, const GibbsTable& table2, int p, MomentStrategy strategy,
                            const ExactBudget& budget) {
  require_same_n(table1, table2);
  if (p < 1) throw DimensionMismatch("moment power must be >= 1");
  const int N = table1.N();
  if (strategy == MomentStrategy::Auto) {
    const bool cheap = p <= budget.max_factorization_p && std::pow(N, p) <= std::pow(4.0, N);
    strategy = cheap ? MomentStrategy::Factorization : MomentStrategy::Distribution;
  }
  switch (strategy) {
    case MomentStrategy::Factorization: {
      if (p > budget.max_factorization_p) throw BudgetExceeded("factorization power above cap");
      const Eigen::VectorXd c1 = correlation_table(table1);
      const Eigen::VectorXd c2 = &table1 == &table2 ? c1 : correlation_table(table2);
      CompensatedSum sum;
      for_each_tuple_mask(N, p, [&](std::uint64_t m) {
        sum.add(c1[static_cast<Eigen::Index>(m)] * c2[static_cast<Eigen::Index>(m)]);
      });
      return sum.value() / std::pow(static_cast<double>(N), p);
    }
    case MomentStrategy::Distribution: {
      const EmpiricalMeasure law = cross_overlap_distribution(table1, table2, ExactMode{}, budget);
      const std::vector<int> powers{p};
      return moments_of(law, powers)[0];
    }
    case MomentStrategy::Direct: {
      if (N > budget.max_double_sum_n) throw BudgetExceeded("direct double sum above cap");
      std::vector<double> rp(static_cast<std::size_t>(N) + 1);
      for (int d = 0; d <= N; ++d) rp[static_cast<std::size_t>(d)] = std::pow(static_cast<double>(N - 2 * d) / N, p);
      const auto& p1 = table1.probabilities();
      const auto& p2 = table2.probabilities();
      CompensatedSum sum;
      for (Eigen::Index s = 0; s < p1.size(); ++s) {
        double inner = 0.0;
        for (Eigen::Index r = 0; r < p2.size(); ++r)
          inner += p2[r] * rp[static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(s ^ r)))];
        sum.add(p1[s] * inner);
      }
      return sum.value();
    }
    case MomentStrategy::Auto:
      break;
  }
  throw BudgetExceeded("no moment strategy available");
}

EmpiricalMeasure cross_overlap_distribution(const GibbsTable& table1, const GibbsTable& table2, DistributionMode mode,
                                            const ExactBudget& budget) {
  require_same_n(table1, table2);
  const int N = table1.N();
  if (N > budget.max_table_n) throw BudgetExceeded("overlap law above the table cap");
  std::vector<double> mass(static_cast<std::size_t>(N) + 1, 0.0);

  if (std::holds_alternative<ExactMode>(mode)) {
    Eigen::VectorXd f1 = table1.probabilities();
    walsh_hadamard(f1);
    if (&table1 == &table2) {
      f1 = f1.cwiseProduct(f1);
    } else {
      Eigen::VectorXd f2 = table2.probabilities();
      walsh_hadamard(f2);
      f1 = f1.cwiseProduct(f2);
    }
    walsh_hadamard(f1);
    f1 /= static_cast<double>(f1.size());
    for (Eigen::Index x = 0; x < f1.size(); ++x) mass[static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(x)))] += f1[x];
    return law_from_popcounts(mass, N);
  }

  const auto& hybrid = std::get<HybridMode>(mode);
  if (hybrid.samples < 1000) throw InvalidSpec("hybrid overlap law needs at least 1000 samples");
  Engine rng(hybrid.seed);
  const auto& p2 = table2.probabilities();
  for (int k = 0; k < hybrid.samples; ++k) {
    const std::uint64_t s = table1.sample(rng);
    for (Eigen::Index r = 0; r < p2.size(); ++r) mass[static_cast<std::size_t>(std::popcount(s ^ static_cast<std::uint64_t>(r)))] += p2[r];
  }
  for (auto& m : mass) m /= hybrid.samples;
  return law_from_popcounts(mass, N);
}

EmpiricalMeasure within_overlap_distribution(const GibbsTable& table, DistributionMode mode, const ExactBudget& budget) {
  return cross_overlap_distribution(table, table, mode, budget);
}

EmpiricalMeasure cross_overlap_distribution_direct(const GibbsTable& table1, const GibbsTable& table2,
                                                   const ExactBudget& budget) {
  require_same_n(table1, table2);
  const int N = table1.N();
  if (N > budget.max_double_sum_n) throw BudgetExceeded("direct double sum above cap");
  std::vector<double> mass(static_cast<std::size_t>(N) + 1, 0.0);
  const auto& p1 = table1.probabilities();
  const auto& p2 = table2.probabilities();
  for (Eigen::Index s = 0; s < p1.size(); ++s)
    for (Eigen::Index r = 0; r < p2.size(); ++r)
      mass[static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(s ^ r)))] += p1[s] * p2[r];
  return law_from_popcounts(mass, N);
}

Estimate covariance_probe(int N, int p, int samples, const SpinConfiguration& s1, const SpinConfiguration& s2,
                          std::uint64_t seed) {
  if (s1.N != N || s2.N != N) throw DimensionMismatch("probe configurations differ from N");
  if (samples < 100) throw InvalidSpec("covariance probe needs at least 100 disorder samples");
  const std::vector<int> a = s1.spins(), b = s2.spins();
  const double scale = degree_scale(N, p);
  std::vector<double> values(static_cast<std::size_t>(samples));
  std::size_t len = 1;
  for (int k = 0; k < p; ++k) len *= static_cast<std::size_t>(N);
  for (int m = 0; m < samples; ++m) {
    Engine eng(derive_stream({seed, static_cast<std::uint64_t>(m)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    CouplingTensor t{p, N, Eigen::VectorXd(static_cast<Eigen::Index>(len))};
    for (Eigen::Index i = 0; i < t.entries.size(); ++i) t.entries[i] = normal(eng);
    values[static_cast<std::size_t>(m)] = scale * naive_tensor_energy(t, a) * scale * naive_tensor_energy(t, b) / N;
  }
  return mean_se(values);
}

ExactPair build_exact_pair(const CoupledDisorder& disorder, const ExactBudget& budget, int threads) {
  ExactPair pair;
  pair.table1 = build_gibbs_table(disorder, 1, budget, threads);
  pair.table2 = build_gibbs_table(disorder, 2, budget, threads);
  pair.corr1 = correlation_table(pair.table1);
  pair.corr2 = correlation_table(pair.table2);
  return pair;
}

}  // namespace pspin

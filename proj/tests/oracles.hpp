#ifndef PSPIN_TESTS_ORACLES_HPP
#define PSPIN_TESTS_ORACLES_HPP

// Brute-force references built straight from the coupling tensors.

#include <cmath>
#include <cstdint>
#include <vector>

#include "pspin/disorder.hpp"

namespace oracle {

inline std::vector<int> spins_of(std::uint64_t bits, int N) {
  std::vector<int> s(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) s[static_cast<std::size_t>(i)] = (bits >> i) & 1U ? 1 : -1;
  return s;
}

// Sum over all p-tuples of g_{i1..ip} s_{i1}...s_{ip}.
inline double contract(const pspin::CouplingTensor& g, const std::vector<int>& s) {
  const int N = g.N, p = g.degree;
  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  double total = 0.0;
  while (true) {
    double prod = 1.0;
    for (int k = 0; k < p; ++k) prod *= s[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    total += g.entries[static_cast<Eigen::Index>(g.index(idx))] * prod;
    int pos = p - 1;
    while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == N) idx[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return total;
}

inline double energy(const pspin::CoupledDisorder& d, int system, const std::vector<int>& s) {
  double h = 0.0;
  for (const auto& dd : d.degrees) {
    const double beta = d.params(system).beta(dd.degree);
    if (beta == 0.0) continue;
    h += beta * std::pow(static_cast<double>(d.N), -(dd.degree - 1) / 2.0) * contract(dd.coupling(system), s);
  }
  return h;
}

// Gibbs probabilities indexed by bit pattern (bit i set means spin i is +1).
inline std::vector<double> gibbs(const pspin::CoupledDisorder& d, int system) {
  const std::uint64_t total = std::uint64_t{1} << d.N;
  std::vector<double> w(total);
  double mx = -1e300;
  for (std::uint64_t b = 0; b < total; ++b) {
    w[b] = energy(d, system, spins_of(b, d.N));
    mx = std::max(mx, w[b]);
  }
  double z = 0.0;
  for (auto& x : w) z += (x = std::exp(x - mx));
  for (auto& x : w) x /= z;
  return w;
}

inline double log_partition(const pspin::CoupledDisorder& d, int system) {
  const std::uint64_t total = std::uint64_t{1} << d.N;
  double z = 0.0;
  for (std::uint64_t b = 0; b < total; ++b) z += std::exp(energy(d, system, spins_of(b, d.N)));
  return std::log(z);
}

inline double overlap(std::uint64_t a, std::uint64_t b, int N) {
  int agree = 0;
  for (int i = 0; i < N; ++i) agree += (((a ^ b) >> i) & 1U) ? 0 : 1;
  return (2.0 * agree - N) / N;
}

// E over G1 x G2 of R^p by the double sum.
inline double cross_moment(const std::vector<double>& g1, const std::vector<double>& g2, int N, int p) {
  double s = 0.0;
  for (std::size_t a = 0; a < g1.size(); ++a)
    for (std::size_t b = 0; b < g2.size(); ++b) s += g1[a] * g2[b] * std::pow(overlap(a, b, N), p);
  return s;
}

}  // namespace oracle

#endif

#include "pspin/spins.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

#include "pspin/errors.hpp"

namespace pspin {

SpinConfiguration SpinConfiguration::from_spins(std::span<const int> spins) {
  if (spins.size() > static_cast<std::size_t>(kMaxSpins)) throw DimensionMismatch("at most 64 spins are supported");
  SpinConfiguration c;
  c.N = static_cast<int>(spins.size());
  for (std::size_t i = 0; i < spins.size(); ++i)
    if (spins[i] > 0) c.bits |= std::uint64_t{1} << i;
  return c;
}

SpinConfiguration SpinConfiguration::all_up(int N) { return {low_mask(N), N}; }

SpinConfiguration SpinConfiguration::negated() const { return {~bits & low_mask(N), N}; }

std::vector<int> SpinConfiguration::spins() const {
  std::vector<int> s(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) s[static_cast<std::size_t>(i)] = spin(i);
  return s;
}

double overlap(const SpinConfiguration& a, const SpinConfiguration& b) {
  if (a.N != b.N) throw DimensionMismatch("overlap of configurations with different N");
  return overlap_bits(a.bits, b.bits, a.N);
}

SpinPolynomial::SpinPolynomial(int N) : N_(N) {
  if (N < 0 || N > kMaxSpins) throw DimensionMismatch("spin polynomials support 0 <= N <= 64");
}

void SpinPolynomial::add_tensor(std::span<const double> entries, int degree, double coefficient) {
  if (coefficient == 0.0) return;
  std::size_t expected = 1;
  for (int k = 0; k < degree; ++k) expected *= static_cast<std::size_t>(N_);
  if (entries.size() != expected) throw DimensionMismatch("tensor size does not match N^p");

  // Odometer over tuples; the odd-multiplicity set is tracked by XOR.
  std::unordered_map<std::uint64_t, double> acc;
  std::vector<int> idx(static_cast<std::size_t>(degree), 0);
  std::uint64_t mask = 0;  // all-zero tuple: index 0 appears `degree` times
  if (degree % 2 == 1) mask = 1;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    acc[mask] += coefficient * entries[e];
    for (int pos = degree - 1; pos >= 0; --pos) {
      auto& i = idx[static_cast<std::size_t>(pos)];
      mask ^= std::uint64_t{1} << i;
      if (++i < N_) {
        mask ^= std::uint64_t{1} << i;
        break;
      }
      i = 0;
      mask ^= 1;
    }
  }
  for (const auto& [m, c] : acc) {
    if (m == 0)
      constant_ += c;
    else
      pending_.emplace_back(m, c);
  }
  compiled_ = false;
}

void SpinPolynomial::compile() {
  if (compiled_) return;
  for (std::size_t k = 0; k < masks_.size(); ++k) pending_.emplace_back(masks_[k], coeffs_[k]);
  std::sort(pending_.begin(), pending_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  masks_.clear();
  coeffs_.clear();
  for (const auto& [m, c] : pending_) {
    if (!masks_.empty() && masks_.back() == m)
      coeffs_.back() += c;
    else {
      masks_.push_back(m);
      coeffs_.push_back(c);
    }
  }
  pending_.clear();

  site_offsets_.assign(static_cast<std::size_t>(N_) + 1, 0);
  for (auto m : masks_)
    for (int i = 0; i < N_; ++i)
      if ((m >> i) & 1U) ++site_offsets_[static_cast<std::size_t>(i) + 1];
  for (int i = 0; i < N_; ++i) site_offsets_[static_cast<std::size_t>(i) + 1] += site_offsets_[static_cast<std::size_t>(i)];
  site_masks_.resize(site_offsets_.back());
  site_coeffs_.resize(site_offsets_.back());
  std::vector<std::size_t> fill(site_offsets_.begin(), site_offsets_.end() - 1);
  for (std::size_t k = 0; k < masks_.size(); ++k)
    for (int i = 0; i < N_; ++i)
      if ((masks_[k] >> i) & 1U) {
        auto& pos = fill[static_cast<std::size_t>(i)];
        site_masks_[pos] = masks_[k] & ~(std::uint64_t{1} << i);
        site_coeffs_[pos] = coeffs_[k];
        ++pos;
      }
  compiled_ = true;
}

double SpinPolynomial::evaluate(std::uint64_t bits) const {
  if (!compiled_) const_cast<SpinPolynomial*>(this)->compile();
  double h = constant_;
  for (std::size_t k = 0; k < masks_.size(); ++k) h += coeffs_[k] * parity_sign(masks_[k], bits);
  return h;
}

double SpinPolynomial::local_field(int k, std::uint64_t bits) const {
  if (!compiled_) const_cast<SpinPolynomial*>(this)->compile();
  const std::size_t begin = site_offsets_[static_cast<std::size_t>(k)];
  const std::size_t end = site_offsets_[static_cast<std::size_t>(k) + 1];
  double h = 0.0;
  for (std::size_t t = begin; t < end; ++t) h += site_coeffs_[t] * parity_sign(site_masks_[t], bits);
  return h;
}

Eigen::VectorXd SpinPolynomial::evaluate_all(int threads) const {
  if (N_ > 30) throw BudgetExceeded("full enumeration requires N <= 30");
  if (!compiled_) const_cast<SpinPolynomial*>(this)->compile();
  const std::uint64_t total = std::uint64_t{1} << N_;
  Eigen::VectorXd values(static_cast<Eigen::Index>(total));
  // Fixed segment length keeps results independent of the thread count.
  const std::uint64_t seg_len = std::min<std::uint64_t>(total, std::uint64_t{1} << 14);
  const std::uint64_t segments = total / seg_len;

  auto run_segment = [&](std::uint64_t s) {
    const std::uint64_t first = s * seg_len;
    std::uint64_t bits = first ^ (first >> 1);
    double h = evaluate(bits);
    values[static_cast<Eigen::Index>(bits)] = h;
    for (std::uint64_t i = first + 1; i < first + seg_len; ++i) {
      const int k = std::countr_zero(i);
      h += flip_delta(k, bits);
      bits ^= std::uint64_t{1} << k;
      values[static_cast<Eigen::Index>(bits)] = h;
    }
  };

  const auto workers = static_cast<std::uint64_t>(std::max(1, threads));
  if (workers == 1 || segments == 1) {
    for (std::uint64_t s = 0; s < segments; ++s) run_segment(s);
    return values;
  }
  std::vector<std::thread> pool;
  for (std::uint64_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::uint64_t s = w; s < segments; s += workers) run_segment(s);
    });
  for (auto& t : pool) t.join();
  return values;
}

}  // namespace pspin

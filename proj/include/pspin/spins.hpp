#ifndef PSPIN_SPINS_HPP
#define PSPIN_SPINS_HPP

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pspin {

inline constexpr int kMaxSpins = 64;

// Packed configuration: bit i set encodes sigma_i = +1, clear encodes -1.
struct SpinConfiguration {
  std::uint64_t bits = 0;
  int N = 0;

  static SpinConfiguration from_spins(std::span<const int> spins);
  static SpinConfiguration all_up(int N);
  int spin(int i) const { return (bits >> i) & 1U ? 1 : -1; }
  SpinConfiguration negated() const;
  std::vector<int> spins() const;
  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;
};

inline std::uint64_t low_mask(int N) { return N >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << N) - 1; }

// prod_{i in S} sigma_i for the configuration `bits`.
inline double parity_sign(std::uint64_t set, std::uint64_t bits) {
  return (std::popcount(set & ~bits) & 1) ? -1.0 : 1.0;
}

// Overlap N^-1 sum_i sigma_i rho_i, via popcount of the disagreement mask.
double overlap(const SpinConfiguration& a, const SpinConfiguration& b);

inline double overlap_bits(std::uint64_t a, std::uint64_t b, int N) {
  return static_cast<double>(N - 2 * std::popcount((a ^ b) & low_mask(N))) / N;
}

// In-place unnormalized Walsh-Hadamard transform: out[S] = sum_x in[x] (-1)^{|S & x|}.
template <typename Derived>
void walsh_hadamard(Eigen::DenseBase<Derived>& v) {
  const Eigen::Index n = v.size();
  for (Eigen::Index h = 1; h < n; h <<= 1)
    for (Eigen::Index i = 0; i < n; i += h << 1)
      for (Eigen::Index j = i; j < i + h; ++j) {
        const auto a = v(j), b = v(j + h);
        v(j) = a + b;
        v(j + h) = a - b;
      }
}

// A multilinear polynomial in the spins, sum_S c_S prod_{i in S} sigma_i, stored per site
// so that single-flip energy differences cost one pass over the terms containing the site.
class SpinPolynomial {
 public:
  explicit SpinPolynomial(int N = 0);

  int N() const { return N_; }
  // Adds coefficient * sum_{i_1..i_p} entries[i] sigma_{i_1}...sigma_{i_p}, reducing sigma_i^2 = 1.
  void add_tensor(std::span<const double> entries, int degree, double coefficient);
  // Finalizes the per-site layout; called automatically by the evaluators when needed.
  void compile();

  double constant() const { return constant_; }
  std::size_t term_count() const { return masks_.size(); }
  double evaluate(std::uint64_t bits) const;
  // sum over terms containing k of c_S prod_{i in S\k} sigma_i.
  double local_field(int k, std::uint64_t bits) const;
  // H(bits with spin k flipped) - H(bits).
  double flip_delta(int k, std::uint64_t bits) const {
    const double s = (bits >> k) & 1U ? 1.0 : -1.0;
    return -2.0 * s * local_field(k, bits);
  }
  // All 2^N values indexed by configuration bits, by Gray-code enumeration in fixed-size
  // segments, each re-anchored by a direct evaluation.
  Eigen::VectorXd evaluate_all(int threads = 1) const;

 private:
  int N_;
  double constant_ = 0.0;
  std::vector<std::uint64_t> masks_;
  std::vector<double> coeffs_;
  bool compiled_ = false;
  std::vector<std::size_t> site_offsets_;
  std::vector<std::uint64_t> site_masks_;  // term mask with the site removed
  std::vector<double> site_coeffs_;
  std::vector<std::pair<std::uint64_t, double>> pending_;
};

}  // namespace pspin

#endif  // PSPIN_SPINS_HPP

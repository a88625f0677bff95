#ifndef PSPIN_DISORDER_HPP
#define PSPIN_DISORDER_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pspin/model.hpp"

namespace pspin {

struct DisorderSeed {
  std::uint64_t master = 0;
  std::uint64_t sample_index = 0;
  friend bool operator==(const DisorderSeed&, const DisorderSeed&) = default;
};

// Dense, unsymmetrized degree-p tensor with N^p entries in row-major tuple order.
struct CouplingTensor {
  int degree = 0;
  int N = 0;
  Eigen::VectorXd entries;

  std::size_t index(std::span<const int> tuple) const;
};

struct DegreeDisorder {
  int degree = 0;
  double t = 1.0;
  CouplingTensor shared;    // g
  CouplingTensor private1;  // z^1
  CouplingTensor private2;  // z^2
  CouplingTensor g1;        // sqrt(t) g + sqrt(1-t) z^1
  CouplingTensor g2;        // sqrt(t) g + sqrt(1-t) z^2

  const CouplingTensor& coupling(int system) const { return system == 1 ? g1 : g2; }
  const CouplingTensor& independent(int system) const { return system == 1 ? private1 : private2; }
};

struct CoupledDisorder {
  int N = 0;
  DisorderSeed seed;
  MixedSpinParams params1;
  MixedSpinParams params2;
  std::vector<DegreeDisorder> degrees;  // ascending by degree

  const MixedSpinParams& params(int system) const { return system == 1 ? params1 : params2; }

  const DegreeDisorder* find(int p) const;
  const DegreeDisorder& at(int p) const;
};

inline constexpr std::size_t kDefaultMaxTensorEntries = std::size_t{1} << 24;

// Materializes tensors for every degree in the union of supports plus `extra_degrees`.
// Throws MemoryBudget when sum_p N^p exceeds `max_entries`.
CoupledDisorder sample_coupled_disorder(const CoupledModelSpec& spec, int N, DisorderSeed seed,
                                        std::span<const int> extra_degrees = {},
                                        std::size_t max_entries = kDefaultMaxTensorEntries);

// Binary replay format (little-endian): "PSPD", u32 version, u32 N, u64 master, u64 sample_index,
// u32 degree count, then per degree: u32 p, f64 t, f64 beta1, f64 beta2, and the shared, private1, private2 arrays
// (N^p f64 each). g1/g2 are rebuilt on load.
void save_disorder(const CoupledDisorder& disorder, std::ostream& out);
CoupledDisorder load_disorder(std::istream& in);
void save_disorder(const CoupledDisorder& disorder, const std::string& path);
CoupledDisorder load_disorder(const std::string& path);

}  // namespace pspin

#endif  // PSPIN_DISORDER_HPP

#ifndef PSPIN_OVERLAPS_HPP
#define PSPIN_OVERLAPS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace pspin {

// R^1_{l,l'} (within system 1), R^2_{l,l'} (within system 2), R_{l,l'} = R(sigma^l, rho^l').
enum class OverlapKind { Within1, Within2, Cross };

// Replica labels are 1-based, as in the overlap notation.
struct OverlapId {
  OverlapKind kind = OverlapKind::Cross;
  int l = 1;
  int lp = 1;
  friend bool operator==(const OverlapId&, const OverlapId&) = default;
};

std::string to_string(const OverlapId& id);

// Retained overlap samples for one disorder realization, one row per retained sweep.
// Matrix rows are flattened n x n arrays in row-major (l-1)*n + (l'-1) order; within-system
// diagonals are 1 and the cross array is not symmetrized.
struct OverlapSampleArray {
  int N = 0;
  int n = 0;
  std::uint64_t seed = 0;
  std::uint64_t disorder_index = 0;
  Eigen::MatrixXd within1;
  Eigen::MatrixXd within2;
  Eigen::MatrixXd cross;
  // Optional per-sample energies divided by N: for each entry of `energy_degrees`, four
  // columns H^1_p(sigma^1), H^2_p(rho^1), Z^2_p(sigma^1), Z^1_p(rho^1).
  std::vector<int> energy_degrees;
  Eigen::MatrixXd energies;
  nlohmann::json metadata;

  Eigen::Index samples() const { return cross.rows(); }
  double value(Eigen::Index sample, const OverlapId& id) const;
  // Column of `energies` for degree p; which = 0..3 in the order documented above.
  Eigen::Index energy_column(int p, int which) const;
};

// One JSON object per retained sample; the first line carries the metadata.
void write_jsonl(const OverlapSampleArray& data, std::ostream& out);
OverlapSampleArray read_jsonl(std::istream& in);

}  // namespace pspin

#endif  // PSPIN_OVERLAPS_HPP

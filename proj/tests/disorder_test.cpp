#include <sstream>

#include "doctest.h"
#include "pspin/disorder.hpp"
#include "pspin/errors.hpp"
#include "pspin/stats.hpp"

using namespace pspin;

namespace {

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
  return (da * db).sum() / std::sqrt((da * da).sum() * (db * db).sum());
}

CoupledModelSpec pure(int p, double t) {
  return {MixedSpinParams({{p, 1.0}}), MixedSpinParams({{p, 1.0}}), CouplingSpec{{}, t}};
}

}  // namespace

TEST_CASE("full correlation gives identical couplings") {
  const auto d = sample_coupled_disorder(pure(2, 1.0), 20, {3, 0});
  const auto& dd = d.at(2);
  CHECK(dd.g1.entries == dd.g2.entries);
  CHECK(dd.g1.entries == dd.shared.entries);
}

TEST_CASE("coupled entries have the requested correlation") {
  // p = 3 at N = 47: 103823 entries.
  for (double t : {0.0, 0.5}) {
    const auto d = sample_coupled_disorder(pure(3, t), 47, {17, 1});
    const auto& dd = d.at(3);
    CHECK(dd.g1.entries.size() >= 100000);
    const double r = correlation(dd.g1.entries, dd.g2.entries);
    CHECK(std::abs(r - t) < 3.0 / std::sqrt(static_cast<double>(dd.g1.entries.size())));
  }
}

TEST_CASE("entries are standard normal") {
  const auto d = sample_coupled_disorder(pure(3, 0.3), 47, {5, 2});
  const auto& e = d.at(3).g1.entries;
  const double n = static_cast<double>(e.size());
  CHECK(std::abs(e.mean()) < 4.0 / std::sqrt(n));
  CHECK(std::abs(e.squaredNorm() / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("same seed reproduces, different index decorrelates") {
  const auto spec = pure(2, 0.5);
  const auto a = sample_coupled_disorder(spec, 12, {9, 4});
  const auto b = sample_coupled_disorder(spec, 12, {9, 4});
  const auto c = sample_coupled_disorder(spec, 12, {9, 5});
  CHECK(a.at(2).g1.entries == b.at(2).g1.entries);
  CHECK(a.at(2).g2.entries == b.at(2).g2.entries);
  CHECK(a.at(2).g1.entries != c.at(2).g1.entries);
}

TEST_CASE("a degree's tensors do not depend on which other degrees are present") {
  const CoupledModelSpec one{MixedSpinParams({{2, 1.0}}), MixedSpinParams({{2, 1.0}}), CouplingSpec{{}, 0.5}};
  const CoupledModelSpec two{MixedSpinParams({{2, 1.0}, {3, 1.0}}), MixedSpinParams({{2, 1.0}}), CouplingSpec{{}, 0.5}};
  const auto a = sample_coupled_disorder(one, 8, {1, 1});
  const auto b = sample_coupled_disorder(two, 8, {1, 1});
  CHECK(a.at(2).g1.entries == b.at(2).g1.entries);
}

TEST_CASE("tensor indexing is row-major over the tuple") {
  CouplingTensor t{3, 4, Eigen::VectorXd::Zero(64)};
  const std::vector<int> idx{1, 2, 3};
  CHECK(t.index(idx) == 1 * 16 + 2 * 4 + 3);
}

TEST_CASE("memory budget is enforced") {
  CHECK_THROWS_AS(sample_coupled_disorder(pure(4, 1.0), 64, {1, 0}, {}, 1000), MemoryBudget);
  CHECK_THROWS_AS(sample_coupled_disorder(pure(2, 1.0), 0, {1, 0}), InvalidSpec);
}

TEST_CASE("save and load round trip") {
  const auto d = sample_coupled_disorder(pure(2, 0.25), 6, {42, 3});
  std::stringstream ss;
  save_disorder(d, ss);
  const auto e = load_disorder(ss);
  CHECK(e.N == d.N);
  CHECK(e.seed == d.seed);
  CHECK(e.params1 == d.params1);
  REQUIRE(e.degrees.size() == d.degrees.size());
  CHECK(e.at(2).t == d.at(2).t);
  CHECK(e.at(2).g1.entries == d.at(2).g1.entries);
  CHECK(e.at(2).private2.entries == d.at(2).private2.entries);
}

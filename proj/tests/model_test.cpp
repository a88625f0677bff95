#include <random>

#include "doctest.h"
#include "pspin/errors.hpp"
#include "pspin/model.hpp"

using namespace pspin;

namespace {

MixedSpinParams evens_up_to(int pmax, int start, double base, double tau_from4 = 1.0) {
  std::map<int, double> b;
  for (int p = start; p <= pmax; p += 2) b[p] = (p >= 4 ? tau_from4 : 1.0) * base / p;
  return MixedSpinParams(b, IndexSetPattern::evens(start));
}

}  // namespace

TEST_CASE("index sets split by parity") {
  const auto s = index_sets(MixedSpinParams({{2, 1.0}, {3, 0.5}}));
  CHECK(s.even == IndexSetPattern::finite({2}));
  CHECK(s.odd == IndexSetPattern::finite({3}));
  CHECK(s.all == IndexSetPattern::finite({2, 3}));

  const auto e = index_sets(MixedSpinParams{});
  CHECK(e.all.empty());
  CHECK(e.even.empty());
  CHECK(e.odd.empty());

  std::map<int, double> b;
  for (int p = 4; p <= 20; p += 2) b[p] = 1.0;
  const auto ex3 = index_sets(MixedSpinParams(b));
  CHECK(ex3.even == IndexSetPattern::finite({4, 6, 8, 10, 12, 14, 16, 18, 20}));
  CHECK(ex3.odd.empty());
}

TEST_CASE("zero coefficients are not part of the support") {
  const MixedSpinParams p({{2, 0.0}, {3, 1.0}});
  CHECK(p.support() == std::vector<int>{3});
}

TEST_CASE("muntz criterion") {
  CHECK(muntz_dense(IndexSetPattern::all(1)));
  CHECK(muntz_dense(IndexSetPattern::evens(2)));
  CHECK(muntz_dense(IndexSetPattern::odds(7)));
  CHECK_FALSE(muntz_dense(IndexSetPattern::finite({2, 4, 8, 16})));
  CHECK_FALSE(muntz_dense(IndexSetPattern::finite({})));
}

TEST_CASE("muntz criterion is monotone under adding degrees") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ds;
    for (int k = 0; k < 5; ++k) ds.push_back(1 + static_cast<int>(rng() % 30));
    const auto small = IndexSetPattern::finite(ds);
    const auto big = IndexSetPattern::all(1 + static_cast<int>(rng() % 5));
    if (is_subset(small, big)) CHECK(muntz_dense(big) >= muntz_dense(small));
  }
}

TEST_CASE("symbolic patterns") {
  CHECK(IndexSetPattern::evens(3).start() == 4);
  CHECK(IndexSetPattern::odds(4).start() == 5);
  CHECK(IndexSetPattern::evens(4).contains(10));
  CHECK_FALSE(IndexSetPattern::evens(4).contains(2));
  CHECK(is_subset(IndexSetPattern::evens(4), IndexSetPattern::all(1)));
  CHECK_FALSE(is_subset(IndexSetPattern::all(1), IndexSetPattern::evens(2)));
  CHECK(is_subset(IndexSetPattern::finite({4, 8}), IndexSetPattern::evens(2)));
  CHECK(IndexSetPattern::odds(3).members_up_to(9) == std::vector<int>{3, 5, 7, 9});
}

TEST_CASE("example 1: single odd degrees on each side") {
  CoupledModelSpec spec{MixedSpinParams({{3, 1.0}}), MixedSpinParams({{5, 1.0}}), {}};
  const auto r = check_chaos_conditions(spec);
  CHECK(r.co);
  CHECK(r.c1o.holds);
  CHECK(r.c2o.holds);
  CHECK(r.c1o.difference_degree == 5);
  CHECK(r.c2o.difference_degree == 3);
  CHECK_FALSE(r.corrp_odd.has_value());
}

TEST_CASE("example 2: proportional even tails") {
  const double tau = 0.5;
  CoupledModelSpec spec{evens_up_to(20, 2, 1.0), evens_up_to(20, 2, 1.0, tau), {}};
  const auto r = check_chaos_conditions(spec);
  CHECK(r.ce);
  REQUIRE(r.c1e.holds);
  REQUIRE(r.c1e.dense_subset.has_value());
  CHECK(*r.c1e.dense_subset == IndexSetPattern::evens(4));
  CHECK(r.c1e.p0 == 2);
  CHECK(*r.c1e.tau == doctest::Approx(tau));
  CHECK(r.c2e.holds);
  CHECK(*r.c2e.tau == doctest::Approx(1.0 / tau));
}

TEST_CASE("example 2 with tau = 1 has no ratio break") {
  CoupledModelSpec spec{evens_up_to(20, 2, 1.0), evens_up_to(20, 2, 1.0), {}};
  const auto r = check_chaos_conditions(spec);
  CHECK_FALSE(r.c1e.holds);
  CHECK_FALSE(r.ce);
}

TEST_CASE("example 3: SK against an even tail") {
  std::map<int, double> b;
  for (int p = 4; p <= 20; p += 2) b[p] = 1.0 / p;
  CoupledModelSpec spec{MixedSpinParams({{2, 1.0}}), MixedSpinParams(b, IndexSetPattern::evens(4)), {}};
  const auto r = check_chaos_conditions(spec);
  CHECK(r.ce);
  CHECK(r.c1e.holds);
  CHECK(r.c2e.holds);
}

TEST_CASE("identical systems satisfy nothing") {
  const MixedSpinParams p({{1, 0.3}, {2, 1.0}, {3, 0.7}});
  CoupledModelSpec spec{p, p, {}};
  const auto r = check_chaos_conditions(spec);
  CHECK_FALSE(r.ce);
  CHECK_FALSE(r.co);
  CHECK_FALSE(r.corrp_even.has_value());
  CHECK_FALSE(r.corrp_odd.has_value());
}

TEST_CASE("corrp reports decorrelated shared degrees") {
  const MixedSpinParams p({{2, 1.0}, {3, 0.5}});
  CoupledModelSpec spec{p, p, CouplingSpec{{{2, 0.5}}, 1.0}};
  const auto r = check_chaos_conditions(spec);
  CHECK(r.corrp_even == 2);
  CHECK_FALSE(r.corrp_odd.has_value());
}

TEST_CASE("witness outside the index set is rejected") {
  CoupledModelSpec spec{evens_up_to(20, 2, 1.0), evens_up_to(20, 2, 1.0, 0.5), {}};
  CHECK_THROWS_AS(check_chaos_conditions(spec, IndexSetPattern::odds(3)), InvalidWitness);
  CHECK_NOTHROW(check_chaos_conditions(spec, IndexSetPattern::evens(4)));
}

TEST_CASE("condition checking is symmetric under swapping the systems") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::map<int, double> b1, b2, t;
    for (int p = 1; p <= 6; ++p) {
      if (rng() % 2) b1[p] = (rng() % 3 == 0) ? 1.0 : u(rng);
      if (rng() % 2) b2[p] = (rng() % 3 == 0) ? b1.count(p) ? b1[p] : 1.0 : u(rng);
      if (rng() % 4 == 0) t[p] = 0.5;
    }
    CoupledModelSpec spec{MixedSpinParams(b1), MixedSpinParams(b2), CouplingSpec{t, 1.0}};
    const auto r = check_chaos_conditions(spec);
    const auto s = check_chaos_conditions(spec.swapped()).swapped();
    CHECK(r.c1e.holds == s.c1e.holds);
    CHECK(r.c1o.holds == s.c1o.holds);
    CHECK(r.c2e.holds == s.c2e.holds);
    CHECK(r.c2o.holds == s.c2o.holds);
    CHECK(r.ce == s.ce);
    CHECK(r.co == s.co);
    if (r.co) CHECK(r.ce);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((CoupledModelSpec{MixedSpinParams({{2, 1.0}}), {}, CouplingSpec{{{2, 1.5}}, 1.0}}.validate()),
                  InvalidSpec);
  CHECK_THROWS_AS((CoupledModelSpec{MixedSpinParams({{0, 1.0}}), {}, {}}.validate()), InvalidSpec);
  CHECK_NOTHROW((CoupledModelSpec{MixedSpinParams({{2, 1.0}}), {}, CouplingSpec{{{2, 0.0}}, 1.0}}.validate()));
}

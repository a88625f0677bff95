#include <array>

#include "doctest.h"
#include "oracles.hpp"
#include "pspin/diagnostics.hpp"
#include "pspin/errors.hpp"
#include "pspin/exact.hpp"
#include "pspin/mc.hpp"

using namespace pspin;

namespace {

const CoupledModelSpec kMixed{MixedSpinParams({{1, 0.6}, {2, 1.0}, {3, 0.8}}),
                              MixedSpinParams({{1, 0.4}, {2, 0.9}, {3, 1.1}}), CouplingSpec{{{2, 0.3}}, 0.6}};

OverlapPower pw(OverlapKind k, int l, int lp, int e = 1) { return {OverlapId{k, l, lp}, e}; }

// Brute-force Gibbs average over three replicas per system.
template <typename F>
double replica_average(const std::vector<double>& g1, const std::vector<double>& g2, int N, F f) {
  const std::size_t S = g1.size();
  double total = 0.0;
  std::array<std::uint64_t, 3> s{}, r{};
  for (s[0] = 0; s[0] < S; ++s[0])
    for (s[1] = 0; s[1] < S; ++s[1])
      for (s[2] = 0; s[2] < S; ++s[2]) {
        const double ws = g1[s[0]] * g1[s[1]] * g1[s[2]];
        for (r[0] = 0; r[0] < S; ++r[0])
          for (r[1] = 0; r[1] < S; ++r[1])
            for (r[2] = 0; r[2] < S; ++r[2]) {
              auto R1 = [&](int a, int b) { return oracle::overlap(s[a - 1], s[b - 1], N); };
              auto R2 = [&](int a, int b) { return oracle::overlap(r[a - 1], r[b - 1], N); };
              auto R = [&](int a, int b) { return oracle::overlap(s[a - 1], r[b - 1], N); };
              total += ws * g2[r[0]] * g2[r[1]] * g2[r[2]] * f(R1, R2, R);
            }
      }
  return total;
}

std::vector<OverlapSampleArray> exact_samples(const CoupledModelSpec& spec, int N, int M, int n, int samples,
                                              std::uint64_t seed) {
  std::vector<OverlapSampleArray> out;
  for (int m = 0; m < M; ++m) {
    const auto d = sample_coupled_disorder(spec, N, unit_seed(seed, N, m));
    out.push_back(sample_exact_replicas(d, build_exact_pair(d), n, samples, seed));
  }
  return out;
}

}  // namespace

TEST_CASE("intervals") {
  const Interval open{0.0, 0.5, false, true};
  CHECK_FALSE(open.contains(0.0));
  CHECK(open.contains(0.5));
  const IntervalSet s({Interval{0.0, 0.25}, Interval{0.5, 1.0}});
  CHECK(s.contains(0.2));
  CHECK_FALSE(s.contains(0.3));
  CHECK_FALSE(s.covers(0.0, 1.0));
  CHECK(IntervalSet({Interval{0.0, 0.6}, Interval{0.5, 1.0}}).covers(0.0, 1.0));
  CHECK(IntervalSet({Interval{0.5, 1.0}, Interval{0.0, 0.5, true, false}}).covers(0.0, 1.0));
  CHECK_FALSE(IntervalSet({Interval{0.0, 0.5, true, false}, Interval{0.5, 1.0, false, true}}).covers(0.0, 1.0));
  CHECK(IntervalSet({Interval{-1.0, 1.0}}).covers(0.0, 1.0));
  CHECK_FALSE(IntervalSet({Interval{0.0, 0.9}}).covers(0.0, 1.0));
}

TEST_CASE("test functions") {
  const auto fam = default_test_family();
  CHECK(fam.size() == 10);
  CHECK(fam[0].kind() == TestFunction::Kind::Constant);
  const auto f = TestFunction::monomial({pw(OverlapKind::Within1, 1, 2, 2), pw(OverlapKind::Cross, 3, 1)});
  CHECK(f.replicas() == 3);
  CHECK_NOTHROW(TestFunction::monomial({pw(OverlapKind::Within1, 1, 1)}));
  CHECK_THROWS_AS(TestFunction::monomial({pw(OverlapKind::Cross, 0, 1)}), InvalidSpec);
  CHECK_THROWS_AS(TestFunction::monomial({pw(OverlapKind::Cross, 1, 1, 0)}), InvalidSpec);
}

TEST_CASE("exact functional terms match brute-force replica sums") {
  const int N = 3, n = 2;
  for (std::uint64_t m = 0; m < 2; ++m) {
    const auto d = sample_coupled_disorder(kMixed, N, {40, m});
    const auto pair = build_exact_pair(d);
    const auto g1 = oracle::gibbs(d, 1), g2 = oracle::gibbs(d, 2);
    for (int p : {1, 2, 3}) {
      const auto f = TestFunction::monomial({pw(OverlapKind::Within1, 1, 2), pw(OverlapKind::Cross, 2, 1, 2)});
      auto fv = [](auto& R1, auto&, auto& R) { return R1(1, 2) * R(2, 1) * R(2, 1); };
      const double A = replica_average(g1, g2, N, [&](auto& R1, auto& R2, auto& R) {
        return fv(R1, R2, R) * (std::pow(R1(1, 3), p) - std::pow(R1(1, 2), p) / n);
      });
      const double X = replica_average(g1, g2, N, fv);
      const double Y = replica_average(g1, g2, N, [&](auto& R1, auto&, auto&) { return std::pow(R1(1, 2), p); });
      const double B = replica_average(g1, g2, N, [&](auto& R1, auto& R2, auto& R) {
        return fv(R1, R2, R) * (std::pow(R(1, 3), p) - (std::pow(R(1, 1), p) + std::pow(R(1, 2), p)) / n);
      });
      const auto t = functional_terms(pair, 1, n, f, p);
      CHECK(t[0] == doctest::Approx(A).epsilon(1e-10));
      CHECK(t[1] == doctest::Approx(X).epsilon(1e-10));
      CHECK(t[2] == doctest::Approx(Y).epsilon(1e-10));
      CHECK(t[3] == doctest::Approx(B).epsilon(1e-10));

      // system 2 uses R^2 and R_{l,1}
      const double B2 = replica_average(g1, g2, N, [&](auto& R1, auto& R2, auto& R) {
        return fv(R1, R2, R) * (std::pow(R(3, 1), p) - (std::pow(R(1, 1), p) + std::pow(R(2, 1), p)) / n);
      });
      const double A2 = replica_average(g1, g2, N, [&](auto& R1, auto& R2, auto& R) {
        return fv(R1, R2, R) * (std::pow(R2(1, 3), p) - std::pow(R2(1, 2), p) / n);
      });
      const auto t2 = functional_terms(pair, 2, n, f, p);
      CHECK(t2[0] == doctest::Approx(A2).epsilon(1e-10));
      CHECK(t2[3] == doctest::Approx(B2).epsilon(1e-10));
    }
  }
}

TEST_CASE("constant f: Phi vanishes and Psi_{1,1} vanishes") {
  std::vector<ExactPair> pairs;
  for (int m = 0; m < 6; ++m) pairs.push_back(build_exact_pair(sample_coupled_disorder(kMixed, 6, unit_seed(3, 6, m))));
  for (int n : {1, 2, 3})
    for (int p : {1, 2, 3})
      for (int j : {1, 2}) {
        for (const auto& pr : pairs) {
          const auto t = functional_terms(pr, j, n, TestFunction::constant(), p);
          // per disorder: A = (1 - (n-1)/n) <R^p> = <R^p>/n and X = 1, Y = <R^p>
          CHECK(std::abs(t[0] - t[1] * t[2] / n) < 1e-12);
        }
        CHECK(std::abs(compute_phi_psi(pairs, j, n, TestFunction::constant(), p).phi.value) < 1e-12);
      }
  for (int p : {1, 2, 3}) CHECK(std::abs(compute_phi_psi(pairs, 1, 1, TestFunction::constant(), p).psi.value) < 1e-12);
}

TEST_CASE("Psi_{1,1} with constant f is zero on sampled replicas within 4 SE") {
  const auto data = exact_samples(kMixed, 6, 20, 2, 400, 8);
  const auto r = compute_phi_psi(data, 1, 1, TestFunction::constant(), 2);
  CHECK(std::abs(r.psi.value) < 4.0 * r.psi.se);
  CHECK_THROWS_AS(compute_phi_psi(data, 1, 2, TestFunction::constant(), 2), InsufficientReplicas);
}

TEST_CASE("sampled and exact functionals agree") {
  const int N = 6, M = 16;
  std::vector<ExactPair> pairs;
  std::vector<OverlapSampleArray> data;
  SamplerConfig cfg;
  cfg.sweeps = 20000;
  cfg.burn_in = 2000;
  cfg.threads = 4;
  for (int m = 0; m < M; ++m) {
    const auto d = sample_coupled_disorder(kMixed, N, unit_seed(5, N, m));
    pairs.push_back(build_exact_pair(d));
    data.push_back(sample_replica_overlaps(d, cfg, 3));
  }
  for (const auto& f : default_test_family())
    for (int j : {1, 2}) {
      const auto e = compute_phi_psi(pairs, j, 2, f, 2);
      const auto s = compute_phi_psi(data, j, 2, f, 2);
      CHECK(std::abs(e.phi.value - s.phi.value) <= 4.0 * combined_se(e.phi.se, s.phi.se));
      CHECK(std::abs(e.psi.value - s.psi.value) <= 4.0 * combined_se(e.psi.se, s.psi.se));
    }
}

TEST_CASE("indicator test functions need samples") {
  const auto pair = build_exact_pair(sample_coupled_disorder(kMixed, 4, {1, 0}));
  const auto f = TestFunction::indicator({OverlapKind::Cross, 1, 1}, Interval{0.0, 1.0});
  CHECK_THROWS_AS(functional_terms(pair, 1, 2, f, 2), InvalidSpec);
  const auto data = exact_samples(kMixed, 4, 2, 3, 100, 1);
  CHECK_NOTHROW(compute_phi_psi(data, 1, 2, f, 2));
}

TEST_CASE("gibbs_average matches a brute-force sum") {
  const int N = 3;
  const auto d = sample_coupled_disorder(kMixed, N, {41, 0});
  const auto pair = build_exact_pair(d);
  const auto g1 = oracle::gibbs(d, 1), g2 = oracle::gibbs(d, 2);
  const std::vector<OverlapPower> fs{pw(OverlapKind::Within1, 1, 2, 2), pw(OverlapKind::Cross, 1, 3), pw(OverlapKind::Within2, 2, 3)};
  const double ref = replica_average(g1, g2, N, [](auto& R1, auto& R2, auto& R) { return R1(1, 2) * R1(1, 2) * R(1, 3) * R2(2, 3); });
  CHECK(gibbs_average(pair, fs) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("gamma and delta") {
  SUBCASE("delta obeys the N^{-1/2} bound") {
    for (int N : {4, 6}) {
      const std::vector<int> ps{2, 3};
      const auto rep = estimate_gamma_delta(kMixed, N, 60, ps, ExactInner{}, 2, 4);
      for (int p : ps)
        for (int j : {1, 2}) {
          const auto& e = rep.at(p, j);
          CHECK(e.delta.value <= 1.0 / std::sqrt(N) + 3.0 * e.delta.se);
          CHECK(e.gamma.value >= 0.0);
        }
    }
  }
  SUBCASE("free spins: gamma is E|N(0, 1/N)|") {
    const int N = 6;
    const std::vector<int> ps{2, 3};
    const auto rep = estimate_gamma_delta(CoupledModelSpec{}, N, 400, ps, ExactInner{}, 4, 4);
    const double ref = std::sqrt(2.0 / (M_PI * N));
    for (int p : ps)
      for (int j : {1, 2}) CHECK(std::abs(rep.at(p, j).gamma.value - ref) < 4.0 * rep.at(p, j).gamma.se);
  }
  SUBCASE("needs enough disorder samples") {
    const std::vector<int> ps{2};
    CHECK_THROWS_AS(estimate_gamma_delta(kMixed, 4, 10, ps, ExactInner{}, 1), InvalidSpec);
  }
}

TEST_CASE("gamma and delta: exact and MC inner averages agree at N = 8") {
  const std::vector<int> ps{2};
  SamplerConfig cfg;
  cfg.sweeps = 4000;
  cfg.burn_in = 800;
  const auto ex = estimate_gamma_delta(kMixed, 8, 50, ps, ExactInner{}, 6, 4);
  const auto mc = estimate_gamma_delta(kMixed, 8, 50, ps, McInner{cfg}, 6, 4);
  for (int j : {1, 2}) {
    const auto &a = ex.at(2, j), &b = mc.at(2, j);
    CHECK(std::abs(a.gamma.value - b.gamma.value) <= 4.0 * combined_se(a.gamma.se, b.gamma.se));
    CHECK(std::abs(a.delta.value - b.delta.value) <= 4.0 * combined_se(a.delta.se, b.delta.se));
  }
}

TEST_CASE("integration-by-parts identities") {
  const auto R1_12 = TestFunction::monomial({pw(OverlapKind::Within1, 1, 2)});
  const std::vector<TestFunction> fam{R1_12};
  SUBCASE("N = 4, p = 2, n = 2 at M = 500") {
    const auto rep = check_lemma1_identities(kMixed, 4, 500, 2, fam, 2, 11, 4);
    CHECK(rep.checks.size() >= 3);
    for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);
  }
  SUBCASE("beta^2 = 0: identity (a) has two vanishing sides") {
    const CoupledModelSpec spec{MixedSpinParams({{2, 1.0}}), MixedSpinParams({{1, 0.5}}), CouplingSpec{{}, 0.5}};
    const auto rep = check_lemma1_identities(spec, 4, 500, 2, fam, 2, 12, 4);
    for (const auto& c : rep.checks)
      if (c.name.starts_with("a")) {
        CHECK(std::abs(c.rhs.value) < 1e-14);
        CHECK(std::abs(c.lhs.value) <= 4.0 * c.lhs.se);
      }
    CHECK(rep.all_pass());
  }
  SUBCASE("(b) with beta^1 = 1") {
    const CoupledModelSpec spec{MixedSpinParams({{2, 1.0}}), MixedSpinParams({{2, 1.0}}), CouplingSpec{{}, 0.5}};
    const auto rep = check_lemma1_identities(spec, 4, 500, 2, fam, 2, 13, 4);
    CHECK(rep.all_pass());
  }
  SUBCASE("too few disorder samples") { CHECK_THROWS_AS(check_lemma1_identities(kMixed, 4, 50, 2, fam, 2, 1), InvalidSpec); }
}

TEST_CASE("Lemma 1 bounds") {
  const auto fam = default_test_family();
  SUBCASE("t = 1 makes the Psi bounds trivial") {
    const CoupledModelSpec spec{kMixed.params1, kMixed.params2, CouplingSpec{{}, 1.0}};
    const auto rep = check_lemma1_bounds(spec, 4, 200, 2, fam, 2, 14, 4);
    for (const auto& c : rep.checks)
      if (c.name.starts_with("psi")) CHECK(c.lhs.value == 0.0);
    CHECK(rep.all_pass());
  }
  SUBCASE("n = 1 and constant f") {
    const std::vector<TestFunction> one{TestFunction::constant()};
    const auto rep = check_lemma1_bounds(kMixed, 4, 200, 1, one, 2, 15, 4);
    CHECK(rep.all_pass());
  }
  SUBCASE("N = 8, p = 2, t = 0, n = 2, default family, M = 500") {
    const CoupledModelSpec spec{kMixed.params1, kMixed.params2, CouplingSpec{{}, 0.0}};
    const auto rep = check_lemma1_bounds(spec, 8, 500, 2, fam, 2, 16, 4);
    CHECK(rep.checks.size() == 4 * fam.size());
    CHECK(rep.all_pass());
  }
}

TEST_CASE("Lemma 2 identity on exact tables") {
  for (int N : {5, 6})
    for (std::uint64_t m = 0; m < 5; ++m) {
      const auto pair = build_exact_pair(sample_coupled_disorder(kMixed, N, {42, m}));
      for (int p : {1, 2, 3})
        for (int l : {2, 3}) {
          const auto r = check_lemma2_identity(pair, p, l);
          CHECK(std::abs(r.lhs.value - r.rhs.value) < 1e-12 * (1.0 + std::abs(r.lhs.value)));
          CHECK(r.pass);
          if (p % 2 == 0) {
            REQUIRE(r.chain.has_value());
            CHECK(r.chain->value <= r.lhs.value + 1e-12);
          }
        }
    }
}

TEST_CASE("Lemma 2 matches the brute-force double sum") {
  const int N = 4;
  const auto d = sample_coupled_disorder(kMixed, N, {43, 0});
  const auto pair = build_exact_pair(d);
  const auto g1 = oracle::gibbs(d, 1), g2 = oracle::gibbs(d, 2);
  const int p = 2;
  double lhs = 0.0;
  for (std::size_t s = 0; s < g1.size(); ++s)
    for (std::size_t a = 0; a < g2.size(); ++a)
      for (std::size_t b = 0; b < g2.size(); ++b) {
        const double x = std::pow(oracle::overlap(s, a, N), p) - std::pow(oracle::overlap(s, b, N), p);
        lhs += g1[s] * g2[a] * g2[b] * x * x;
      }
  const auto r = check_lemma2_identity(pair, p, 2);
  CHECK(r.lhs.value == doctest::Approx(lhs).epsilon(1e-12));
  CHECK(r.rhs.value == doctest::Approx(lhs).epsilon(1e-12));
}

TEST_CASE("Lemma 2 on a frozen Gibbs measure") {
  const MixedSpinParams frozen({{1, 1000.0}});
  const auto pair = build_exact_pair(sample_coupled_disorder(CoupledModelSpec{frozen, frozen, {}}, 4, {44, 0}));
  const auto r = check_lemma2_identity(pair, 2, 2);
  CHECK(std::abs(r.lhs.value) < 1e-10);
  CHECK(std::abs(r.rhs.value) < 1e-10);
}

TEST_CASE("Lemma 2 on sampled replicas") {
  const auto data = exact_samples(kMixed, 6, 4, 2, 4000, 9);
  for (int p : {1, 2}) {
    const auto r = check_lemma2_identity(data, p, 2);
    CHECK(r.pass);
    CHECK(std::abs(r.lhs.value - r.rhs.value) <= 4.0 * combined_se(r.lhs.se, r.rhs.se));
  }
}

TEST_CASE("Lemma 3 inequalities") {
  const CoupledModelSpec sk{MixedSpinParams({{2, 0.4}}), MixedSpinParams({{2, 0.4}}), CouplingSpec{{}, 0.0}};
  SUBCASE("full sets") {
    const auto data = exact_samples(sk, 8, 4, 3, 500, 3);
    for (auto form : {Lemma3Form::Eq1, Lemma3Form::Eq2, Lemma3Form::Eq3}) {
      const auto r = check_lemma3_inequalities(data, EventSpec{}, form, 0.05);
      CHECK(r.status == CheckStatus::Pass);
      CHECK(r.lhs == 1.0);
      CHECK(r.rhs == 1.0);
    }
  }
  SUBCASE("an event of zero cross mass") {
    const auto data = exact_samples(sk, 8, 4, 3, 500, 3);
    EventSpec ev;
    ev.A = Interval{0.3, 0.3};  // not on the 1/4 lattice
    const auto r = check_lemma3_inequalities(data, ev, Lemma3Form::Eq1, 0.05);
    CHECK(r.rhs == 0.0);
    CHECK(r.status != CheckStatus::Fail);
  }
  SUBCASE("high-temperature SK pair, exact replicas at N = 8") {
    const auto data = exact_samples(sk, 8, 20, 3, 1000, 4);
    EventSpec ev;
    ev.A = Interval{-0.5, 0.5};
    ev.A1 = Interval{0.0, 0.5};
    const auto r = check_lemma3_inequalities(data, ev, Lemma3Form::Eq1, 0.05);
    CHECK(r.status != CheckStatus::Fail);
    CHECK(r.margin.value >= -r.slack);
  }
  SUBCASE("high-temperature SK pair, MC at N = 16") {
    SamplerConfig cfg;
    cfg.sweeps = 6000;
    cfg.burn_in = 1000;
    cfg.thinning = 5;
    cfg.threads = 4;
    std::vector<OverlapSampleArray> data;
    for (int m = 0; m < 8; ++m) data.push_back(sample_replica_overlaps(sample_coupled_disorder(sk, 16, unit_seed(5, 16, m)), cfg, 3));
    EventSpec ev;
    ev.A = Interval{-0.5, 0.5};
    ev.A1 = Interval{0.0, 0.5};
    const auto r = check_lemma3_inequalities(data, ev, Lemma3Form::Eq1, 0.05);
    CHECK(r.status != CheckStatus::Fail);
  }
  SUBCASE("form preconditions") {
    const auto data = exact_samples(sk, 6, 2, 3, 100, 3);
    EventSpec ev;
    ev.A2 = Interval{0.0, 0.5};
    CHECK(check_lemma3_inequalities(data, ev, Lemma3Form::Eq1, 0.05).status == CheckStatus::NotApplicable);
  }
}

#include <random>

#include "doctest.h"
#include "pspin/exact.hpp"
#include "pspin/measures.hpp"
#include "pspin/overlaps.hpp"

using namespace pspin;

namespace {

EmpiricalMeasure midpoint_uniform(int atoms) {
  Eigen::VectorXd a(atoms), w = Eigen::VectorXd::Constant(atoms, 1.0 / atoms);
  for (int k = 0; k < atoms; ++k) a[k] = (k + 0.5) / atoms;
  return {a, w, 0.0, 1.0};
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> out;
  for (int p = lo; p <= hi; ++p) out.push_back(p);
  return out;
}

}  // namespace

TEST_CASE("construction merges and validates") {
  const EmpiricalMeasure m(Eigen::Vector3d(0.5, -0.5, 0.5), Eigen::Vector3d(0.25, 0.5, 0.25));
  CHECK(m.size() == 2);
  CHECK(m.atoms()[0] == -0.5);
  CHECK(m.weights()[1] == doctest::Approx(0.5));
  CHECK_THROWS(EmpiricalMeasure(Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(0.5, 0.4)));
  CHECK_THROWS(EmpiricalMeasure(Eigen::Vector2d(0.0, 1.5), Eigen::Vector2d(0.5, 0.5)));
  CHECK_THROWS(EmpiricalMeasure(Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(1.1, -0.1)));
}

TEST_CASE("mass, cdf, mean and absolute value") {
  const EmpiricalMeasure m(Eigen::Vector4d(-0.5, 0.0, 0.5, 1.0), Eigen::Vector4d(0.1, 0.2, 0.3, 0.4));
  CHECK(m.mass(0.0, 0.5) == doctest::Approx(0.5));
  CHECK(m.mass(0.0, 0.5, false, true) == doctest::Approx(0.3));
  CHECK(m.cdf(0.25) == doctest::Approx(0.3));
  CHECK(m.cdf(-2.0) == 0.0);
  CHECK(m.mean() == doctest::Approx(-0.05 + 0.15 + 0.4));
  const auto a = m.absolute();
  CHECK(a.size() == 3);
  CHECK(a.mass(0.5, 0.5) == doctest::Approx(0.4));
}

TEST_CASE("from samples") {
  const std::vector<double> xs{0.5, -0.25, 0.5, 1.0};
  const auto m = EmpiricalMeasure::from_samples(xs);
  CHECK(m.size() == 3);
  CHECK(m.mass(0.5, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("distances") {
  const auto a = EmpiricalMeasure::dirac(0.2), b = EmpiricalMeasure::dirac(0.4);
  CHECK(total_variation(a, a) == 0.0);
  CHECK(total_variation(a, b) == doctest::Approx(1.0));
  CHECK(kolmogorov_distance(a, b) == doctest::Approx(1.0));
  const EmpiricalMeasure c(Eigen::Vector2d(0.2, 0.4), Eigen::Vector2d(0.5, 0.5));
  CHECK(total_variation(a, c) == doctest::Approx(0.5));
  CHECK(kolmogorov_distance(a, c) == doctest::Approx(0.5));
  CHECK(kolmogorov_to_uniform(midpoint_uniform(1000)) < 1e-3);
  CHECK(kolmogorov_to_uniform(EmpiricalMeasure::dirac(0.5, 0.0, 1.0)) == doctest::Approx(0.5));
}

TEST_CASE("averaging measures") {
  const std::vector<EmpiricalMeasure> ms{EmpiricalMeasure::dirac(0.0), EmpiricalMeasure::dirac(1.0)};
  const auto avg = average_measures(ms);
  CHECK(avg.mass(0.0, 0.0) == doctest::Approx(0.5));
  CHECK(avg.mean() == doctest::Approx(0.5));
}

TEST_CASE("json round trip") {
  const EmpiricalMeasure m(Eigen::Vector3d(-0.25, 0.1, 0.7), Eigen::Vector3d(0.2, 0.3, 0.5));
  const auto back = EmpiricalMeasure::from_json(m.to_json());
  CHECK(back.atoms() == m.atoms());
  CHECK(back.weights() == m.weights());
  CHECK(m.to_csv().find("atom") != std::string::npos);
}

TEST_CASE("moments of diracs and of the uniform law") {
  const auto ps = range(1, 8);
  CHECK(moments_of(EmpiricalMeasure::dirac(1.0), ps) == Eigen::VectorXd::Ones(8));
  CHECK(moments_of(EmpiricalMeasure::dirac(0.0), ps) == Eigen::VectorXd::Zero(8));
  const auto m = moments_of(midpoint_uniform(1001), ps);
  for (int k = 0; k < 8; ++k) CHECK(std::abs(m[k] - 1.0 / (ps[static_cast<std::size_t>(k)] + 1)) < 1e-4);
}

TEST_CASE("simplex projection") {
  const Eigen::Vector3d v(0.5, 0.5, 0.5);
  const auto p = project_to_simplex(v);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p[0] == doctest::Approx(1.0 / 3));
  const auto q = project_to_simplex(Eigen::Vector3d(2.0, 0.0, -1.0));
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[2] == 0.0);
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(7);
    for (auto& e : x) e = g(rng);
    const auto y = project_to_simplex(x);
    CHECK(y.minCoeff() >= 0.0);
    CHECK(std::abs(y.sum() - 1.0) < 1e-12);
    // optimality: <x - y, z - y> <= 0 for vertices z
    for (int k = 0; k < 7; ++k) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(7);
      z[k] = 1.0;
      CHECK((x - y).dot(z - y) <= 1e-10);
    }
  }
}

TEST_CASE("inverting the moments of a dirac") {
  const auto ps = range(1, 8);
  std::vector<double> m;
  for (int p : ps) m.push_back(std::pow(0.5, p));
  InversionOptions opt;
  const double h = 1.0 / (opt.grid - 1);
  const auto est = invert_moments(m, ps, opt);
  CHECK(est.measure.mass(0.5 - h - 1e-12, 0.5 + h + 1e-12) >= 0.99);
  CHECK(std::abs(est.c - 0.5) <= h + 1e-12);

  const std::vector<double> ones(8, 1.0);
  const auto one = invert_moments(ones, ps, opt);
  CHECK(one.measure.mass(1.0, 1.0) >= 0.99);
  CHECK(one.c == doctest::Approx(1.0));
}

TEST_CASE("single atoms on the grid are recovered within one spacing") {
  const auto ps = range(1, 8);
  InversionOptions opt;
  const double h = 1.0 / (opt.grid - 1);
  for (int k : {0, 20, 57, 100, 143, 180, 200}) {
    const double x = k * h;
    const auto m = moments_of(EmpiricalMeasure::dirac(x, 0.0, 1.0), ps);
    const auto est = invert_moments({m.data(), 8}, ps, opt);
    CHECK(est.measure.mass(x - h - 1e-12, x + h + 1e-12) >= 0.99);
  }
}

TEST_CASE("inverting uniform moments") {
  const auto ps = range(1, 10);
  std::vector<double> m;
  for (int p : ps) m.push_back(1.0 / (p + 1));
  const auto est = invert_moments(m, ps);
  CHECK(kolmogorov_to_uniform(est.measure) < 0.05);
  CHECK(est.moment_residual < 1e-3);
  CHECK(est.null_space_dim > 0);
}

TEST_CASE("inversion rejects inconsistent input") {
  const std::vector<int> ps{1, 2};
  const std::vector<double> m{0.5};
  CHECK_THROWS(invert_moments(m, ps));
}

TEST_CASE("inf support") {
  CHECK(inf_support(EmpiricalMeasure::dirac(0.0, 0.0, 1.0), 0.01) == 0.0);
  CHECK(inf_support(EmpiricalMeasure::dirac(0.0, 0.0, 1.0), 0.3) == 0.0);
  CHECK(inf_support(EmpiricalMeasure::dirac(0.7, 0.0, 1.0)) == doctest::Approx(0.7));
  const EmpiricalMeasure dust(Eigen::Vector2d(0.0, 0.6), Eigen::Vector2d(0.005, 0.995), 0.0, 1.0);
  CHECK(inf_support(dust, 0.01) == doctest::Approx(0.6));
}

TEST_CASE("free spins: w_odd is exactly 1/N") {
  for (int N : {4, 7, 10}) {
    const auto d = sample_coupled_disorder(CoupledModelSpec{}, N, {1, 0});
    const auto t = build_gibbs_table(d, 1);
    const std::vector<EmpiricalMeasure> laws{cross_overlap_distribution(t, t)};
    const std::vector<double> th{0.5};
    const auto s = chaos_statistics(laws, th);
    CHECK(std::abs(s.w_odd.value - 1.0 / N) < 1e-10);
    CHECK(std::abs(s.moments[1].value - 1.0 / N) < 1e-10);
  }
}

TEST_CASE("identical systems: cross tails equal within-system tails") {
  const MixedSpinParams p({{2, 1.2}, {3, 0.5}});
  const std::vector<double> th{0.1, 0.3, 0.5, 0.8};
  std::vector<EmpiricalMeasure> cross, within;
  for (std::uint64_t m = 0; m < 5; ++m) {
    const auto d = sample_coupled_disorder(CoupledModelSpec{p, p, {}}, 9, {2, m});
    const auto t1 = build_gibbs_table(d, 1), t2 = build_gibbs_table(d, 2);
    cross.push_back(cross_overlap_distribution(t1, t2));
    within.push_back(within_overlap_distribution(t1));
  }
  const auto a = chaos_statistics(cross, th), b = chaos_statistics(within, th);
  for (double c : th) CHECK(std::abs(a.tail.at(c).value - b.tail.at(c).value) < 1e-10);
  CHECK(std::abs(a.w_even.value - b.w_even.value) < 1e-10);
}

TEST_CASE("chaos statistics from samples agree with the laws they come from") {
  OverlapSampleArray d;
  d.N = 4;
  d.n = 1;
  d.cross.resize(64, 1);
  d.within1.resize(64, 0);
  d.within2.resize(64, 0);
  for (int r = 0; r < 64; ++r) d.cross(r, 0) = (r % 4 == 0) ? 1.0 : (r % 4 == 1 ? -0.5 : 0.0);
  const std::vector<OverlapSampleArray> data{d, d};
  const std::vector<double> th{0.25};
  const auto s = chaos_statistics(data, th);
  std::vector<double> xs(d.cross.data(), d.cross.data() + 64);
  const std::vector<EmpiricalMeasure> laws{EmpiricalMeasure::from_samples(xs)};
  const auto e = chaos_statistics(laws, th);
  CHECK(s.w_odd.value == doctest::Approx(e.w_odd.value));
  CHECK(s.w_even.value == doctest::Approx(e.w_even.value));
  CHECK(s.tail.at(0.25).value == doctest::Approx(0.5));
}

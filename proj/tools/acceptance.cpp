// Runs the eleven acceptance checks and prints one PASS/FAIL line each.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "pspin/diagnostics.hpp"
#include "pspin/exact.hpp"
#include "pspin/mc.hpp"
#include "pspin/measures.hpp"
#include "pspin/parallel.hpp"
#include "pspin/stats.hpp"

using namespace pspin;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_threads = 1;

const CoupledModelSpec kMixed{MixedSpinParams({{1, 0.6}, {2, 1.0}, {3, 0.8}}),
                              MixedSpinParams({{1, 0.4}, {2, 0.9}, {3, 1.1}}), CouplingSpec{{{2, 0.3}}, 0.6}};

CoupledModelSpec with_t(const CoupledModelSpec& s, double t) { return {s.params1, s.params2, CouplingSpec{{}, t}}; }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> range(int a, int b) {
  std::vector<int> v;
  for (int k = a; k <= b; ++k) v.push_back(k);
  return v;
}

Outcome cross_moment_oracle() {
  Outcome o;
  double worst = 0.0;
  for (int N : {4, 6, 8})
    for (std::uint64_t m = 0; m < 20; ++m) {
      const auto d = sample_coupled_disorder(kMixed, N, unit_seed(101, N, m));
      const auto t1 = build_gibbs_table(d, 1), t2 = build_gibbs_table(d, 2);
      for (int p : {1, 2, 3}) {
        const double direct = cross_overlap_moment(t1, t2, p, MomentStrategy::Direct);
        const double fact = cross_overlap_moment(t1, t2, p, MomentStrategy::Factorization);
        const double rel = std::abs(fact - direct) / std::max(std::abs(direct), 1e-300);
        // odd moments can vanish by symmetry; fall back to an absolute scale there
        const double err = std::abs(direct) < 1e-12 ? std::abs(fact - direct) : rel;
        worst = std::max(worst, err);
      }
    }
  o.pass = worst <= 1e-10;
  o.detail = fmt("max relative deviation %.2e", worst);
  return o;
}

Outcome lemma2_exact() {
  Outcome o;
  double worst = 0.0;
  for (int N : {4, 6, 8})
    for (std::uint64_t m = 0; m < 20; ++m) {
      const auto pair = build_exact_pair(sample_coupled_disorder(kMixed, N, unit_seed(102, N, m)));
      for (int p : {1, 2, 3}) {
        const auto r = check_lemma2_identity(pair, p, 2);
        worst = std::max(worst, std::abs(r.lhs.value - r.rhs.value) / std::max(std::abs(r.lhs.value), 1e-300));
        o.pass = o.pass && r.pass;
      }
    }
  o.pass = o.pass && worst <= 1e-12;
  o.detail = fmt("max relative deviation %.2e", worst);
  return o;
}

Outcome lemma1_identities() {
  Outcome o;
  const auto fam = default_test_family();
  int checks = 0, fails = 0;
  for (int p : {1, 2}) {
    const auto rep = check_lemma1_identities(kMixed, 4, 500, 2, fam, p, 103, g_threads);
    for (const auto& c : rep.checks) {
      ++checks;
      if (!c.pass) ++fails;
    }
  }
  o.pass = fails == 0 && checks > 0;
  o.detail = fmt("%d/%d identity checks within 4 SE", checks - fails, checks);
  return o;
}

Outcome lemma1_bounds() {
  Outcome o;
  const auto fam = default_test_family();
  int checks = 0, fails = 0;
  std::string first;
  for (double t : {0.0, 0.5, 1.0})
    for (int p : {1, 2, 3})
      for (int N : {4, 6, 8}) {
        const auto rep = check_lemma1_bounds(with_t(kMixed, t), N, 200, 2, fam, p, 104, g_threads);
        for (const auto& c : rep.checks) {
          ++checks;
          if (!c.pass) {
            ++fails;
            if (first.empty()) first = fmt(" first: t=%g p=%d N=%d %s f=%s", t, p, N, c.name.c_str(), c.f.c_str());
          }
        }
      }
  o.pass = fails == 0;
  o.detail = fmt("%d/%d bounds hold", checks - fails, checks) + first;
  return o;
}

Outcome delta_rate() {
  Outcome o;
  const std::vector<int> ps{2, 3};
  double worst = -1e300;
  for (int N : {8, 12, 16}) {
    const auto rep = estimate_gamma_delta(kMixed, N, 200, ps, ExactInner{}, 105, g_threads);
    for (int p : ps)
      for (int j : {1, 2}) {
        const auto& e = rep.at(p, j);
        const double excess = e.delta.value - (1.0 / std::sqrt(N) + 3.0 * e.delta.se);
        worst = std::max(worst, excess);
      }
  }
  o.pass = worst <= 0.0;
  o.detail = fmt("max of Delta - (N^-1/2 + 3 SE) = %.4f", worst);
  return o;
}

Outcome mc_vs_exact() {
  Outcome o;
  const int N = 8;
  SamplerConfig cfg;
  cfg.threads = g_threads;
  double worst = 0.0;
  for (std::uint64_t m = 0; m < 2; ++m) {
    const auto d = sample_coupled_disorder(kMixed, N, unit_seed(106, N, m));
    const auto t1 = build_gibbs_table(d, 1), t2 = build_gibbs_table(d, 2);
    const std::vector<EmpiricalMeasure> law{cross_overlap_distribution(t1, t2)};
    const std::vector<OverlapSampleArray> data{sample_replica_overlaps(d, cfg, 2)};
    const auto ex = chaos_statistics(law, {});
    const auto mc = chaos_statistics(data, {});
    auto z = [](const Estimate& a, const Estimate& b) {
      return std::abs(a.value - b.value) / std::max(combined_se(a.se, b.se), 1e-300);
    };
    for (int k = 0; k < 3; ++k) worst = std::max(worst, z(mc.moments[static_cast<std::size_t>(k)], ex.moments[static_cast<std::size_t>(k)]));
    worst = std::max({worst, z(mc.w_even, ex.w_even), z(mc.w_odd, ex.w_odd)});
  }
  o.pass = worst <= 4.0;
  o.detail = fmt("max deviation %.2f combined SE", worst);
  return o;
}

Outcome free_spins() {
  Outcome o;
  const int N = 8;
  double exact_err = 0.0, tv = 0.0;
  for (std::uint64_t m = 0; m < 5; ++m) {
    const auto d = sample_coupled_disorder(CoupledModelSpec{}, N, unit_seed(107, N, m));
    const auto t1 = build_gibbs_table(d, 1), t2 = build_gibbs_table(d, 2);
    const std::vector<EmpiricalMeasure> law{cross_overlap_distribution(t1, t2)};
    exact_err = std::max(exact_err, std::abs(chaos_statistics(law, {}).w_odd.value - 1.0 / N));
    Eigen::VectorXd atoms(N + 1), w(N + 1);
    for (int k = 0; k <= N; ++k) {
      atoms[k] = (2.0 * k - N) / N;
      w[k] = std::exp(std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0)) / std::pow(2.0, N);
    }
    tv = std::max(tv, total_variation(law[0], EmpiricalMeasure(atoms, w)));
  }
  SamplerConfig cfg;
  cfg.threads = g_threads;
  const std::vector<OverlapSampleArray> data{
      sample_replica_overlaps(sample_coupled_disorder(CoupledModelSpec{}, N, unit_seed(107, N, 9)), cfg, 2)};
  const double mc = chaos_statistics(data, {}).w_odd.value;
  const double rel = std::abs(mc * N - 1.0);
  o.pass = exact_err <= 1e-10 && tv < 1e-10 && rel <= 0.10;
  o.detail = fmt("exact |w_odd - 1/N| %.1e, TV %.1e, MC relative error %.2e", exact_err, tv, rel);
  return o;
}

MixedSpinParams evens_up_to(int pmax, int start, double scale, double tau = 1.0) {
  std::map<int, double> b;
  for (int p = start; p <= pmax; p += 2) b[p] = (p == start ? 1.0 : tau) * scale / p;
  return MixedSpinParams(b, IndexSetPattern::evens(start));
}

Outcome examples() {
  Outcome o;
  const auto e1 = check_chaos_conditions({MixedSpinParams({{3, 1.0}}), MixedSpinParams({{5, 1.0}}), {}});
  const auto e2 = check_chaos_conditions({evens_up_to(20, 2, 1.0), evens_up_to(20, 2, 1.0, 0.5), {}});
  std::map<int, double> tail;
  for (int p = 4; p <= 20; p += 2) tail[p] = 1.0 / p;
  const auto e3 = check_chaos_conditions({MixedSpinParams({{2, 1.0}}), MixedSpinParams(tail, IndexSetPattern::evens(4)), {}});
  o.pass = e1.co && e2.ce && e3.ce;
  o.detail = fmt("example 1 co=%d, example 2 ce=%d, example 3 ce=%d", e1.co, e2.ce, e3.ce);
  return o;
}

Outcome weak_chaos_trend() {
  Outcome o;
  const CoupledModelSpec sk{MixedSpinParams({{2, 1.5}}), MixedSpinParams({{2, 1.5}}), CouplingSpec{{}, 0.0}};
  std::vector<Estimate> w;
  for (int N : {8, 12, 16}) {
    std::vector<EmpiricalMeasure> laws(100);
    parallel_for(laws.size(), g_threads, [&](std::size_t m) {
      const auto d = sample_coupled_disorder(sk, N, unit_seed(109, N, m));
      laws[m] = cross_overlap_distribution(build_gibbs_table(d, 1), build_gibbs_table(d, 2));
    });
    w.push_back(chaos_statistics(laws, {}).w_even);
  }
  for (std::size_t k = 1; k < w.size(); ++k)
    o.pass = o.pass && w[k - 1].value - w[k].value > 2.0 * combined_se(w[k - 1].se, w[k].se);
  o.detail = fmt("w_even %.4f(%.4f) > %.4f(%.4f) > %.4f(%.4f)", w[0].value, w[0].se, w[1].value, w[1].se, w[2].value,
                 w[2].se);
  return o;
}

Outcome inversion() {
  Outcome o;
  const auto ps = range(1, 8);
  InversionOptions opt;
  const double h = 1.0 / (opt.grid - 1);
  double worst_mass = 1.0;
  for (int k = 0; k < opt.grid; k += 8) {
    const double x = k * h;
    const auto m = moments_of(EmpiricalMeasure::dirac(x, 0.0, 1.0), ps);
    const auto est = invert_moments({m.data(), static_cast<std::size_t>(m.size())}, ps, opt);
    worst_mass = std::min(worst_mass, est.measure.mass(x - h - 1e-12, x + h + 1e-12));
  }
  const auto pu = range(1, 10);
  std::vector<double> mu;
  for (int p : pu) mu.push_back(1.0 / (p + 1));
  const double ks = kolmogorov_to_uniform(invert_moments(mu, pu).measure);
  o.pass = worst_mass >= 0.99 && ks < 0.05;
  o.detail = fmt("min mass within one spacing %.4f over 26 atoms, uniform KS %.4f", worst_mass, ks);
  return o;
}

Outcome lemma3() {
  Outcome o;
  const int N = 8, n = 2;
  std::vector<OverlapSampleArray> data(20);
  parallel_for(data.size(), g_threads, [&](std::size_t m) {
    const auto d = sample_coupled_disorder(kMixed, N, unit_seed(111, N, m));
    data[m] = sample_exact_replicas(d, build_exact_pair(d), n + 1, 2000, 111 + m);
  });
  std::mt19937_64 rng(111);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int held = 0;
  std::string worst;
  double worst_margin = 1e300;
  for (int k = 0; k < 10; ++k) {
    EventSpec ev;
    ev.n = n;
    double a = -1.0 + 2.0 * u(rng), b = -1.0 + 2.0 * u(rng);
    ev.A = Interval{std::min(a, b), std::max(a, b)};
    a = u(rng), b = u(rng);
    ev.A1 = Interval{std::min(a, b), std::max(a, b)};
    const auto r = check_lemma3_inequalities(data, ev, Lemma3Form::Eq1, 0.05);
    if (r.status != CheckStatus::Fail) ++held;
    if (r.margin.value + r.slack < worst_margin) {
      worst_margin = r.margin.value + r.slack;
      worst = ev.to_string();
    }
  }
  o.pass = held == 10;
  o.detail = fmt("%d/10 event specs hold, smallest margin+slack %.4f at ", held, worst_margin) + worst;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pspin acceptance checks"};
  g_threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  std::vector<int> only;
  app.add_option("--threads", g_threads, "worker threads");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cross-moment factorization equals direct enumeration", cross_moment_oracle},
      {"Lemma 2 identity on exact tables", lemma2_exact},
      {"Lemma 1 integration-by-parts identities", lemma1_identities},
      {"Lemma 1 bounds", lemma1_bounds},
      {"Delta rate bound", delta_rate},
      {"MC agrees with exact enumeration at N = 8", mc_vs_exact},
      {"free-spin analytic checks", free_spins},
      {"condition checker on Examples 1-3", examples},
      {"weak-chaos trend for the SK pair", weak_chaos_trend},
      {"moment inversion recovery", inversion},
      {"Lemma 3 inequality on exact replicas", lemma3},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!r.pass) ++failed;
    std::printf("%s %2d %s: %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", id, criteria[k].first, r.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

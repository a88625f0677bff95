#include "pspin/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pspin/errors.hpp"
#include "pspin/parallel.hpp"

namespace pspin {

std::vector<double> geometric_ladder(double lo, double hi, int rungs) {
  if (rungs < 1 || !(lo > 0.0) || !(hi > 0.0) || lo > hi) throw InvalidSpec("bad ladder parameters");
  std::vector<double> out(static_cast<std::size_t>(rungs));
  for (int k = 0; k < rungs; ++k)
    out[static_cast<std::size_t>(k)] = rungs == 1 ? hi : lo * std::pow(hi / lo, static_cast<double>(k) / (rungs - 1));
  out.back() = hi;
  return out;
}

void SamplerConfig::validate() const {
  if (sweeps < 1) throw InvalidSpec("sweeps must be >= 1");
  if (burn_in < 0 || burn_in >= sweeps) throw InvalidSpec("burn_in must lie in [0, sweeps)");
  if (thinning < 1) throw InvalidSpec("thinning must be >= 1");
  if (exchange_interval < 1) throw InvalidSpec("exchange_interval must be >= 1");
  if (ladder.empty() || ladder.back() != 1.0) throw InvalidSpec("ladder must end at 1");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0 && ladder[k] <= 1.0)) throw InvalidSpec("ladder scales must lie in (0, 1]");
    if (k && ladder[k] < ladder[k - 1]) throw InvalidSpec("ladder must be ascending");
  }
}

int metropolis_sweep(ChainState& state, const SpinPolynomial& hamiltonian, double scale, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> site(0, std::max(0, hamiltonian.N() - 1));
  int accepted = 0;
  for (int step = 0; step < hamiltonian.N(); ++step) {
    const int k = site(rng);
    const double dh = hamiltonian.flip_delta(k, state.bits);
    const double x = scale * dh;
    if (x >= 0.0 || u(rng) < std::exp(x)) {
      state.bits ^= std::uint64_t{1} << k;
      state.energy += dh;
      ++accepted;
    }
  }
  return accepted;
}

namespace {

Ladder make_ladder(int N, std::size_t rungs, std::uint64_t seed, const SpinPolynomial& h) {
  Ladder lad;
  lad.rng.seed(seed);
  lad.swap_attempts.assign(rungs > 1 ? rungs - 1 : 0, 0);
  lad.swap_accepts.assign(rungs > 1 ? rungs - 1 : 0, 0);
  for (std::size_t k = 0; k < rungs; ++k) {
    ChainState s;
    s.bits = lad.rng() & low_mask(N);
    s.energy = h.evaluate(s.bits);
    lad.rungs.push_back(s);
  }
  return lad;
}

std::uint64_t chain_stream(const SamplerConfig& config, const CoupledDisorder& d, int system, int replica) {
  return derive_stream({config.chain_seed, d.seed.master, d.seed.sample_index, static_cast<std::uint64_t>(system),
                        static_cast<std::uint64_t>(replica)});
}

void reanchor(Ladder& lad, const SpinPolynomial& h) {
  for (auto& s : lad.rungs) {
    const double e = h.evaluate(s.bits);
    lad.max_drift = std::max(lad.max_drift, std::abs(e - s.energy));
    s.energy = e;
  }
}

struct EnergyProbes {
  std::vector<int> degrees;
  std::vector<SpinPolynomial> polys;  // four per degree

  EnergyProbes(const CoupledDisorder& d, std::span<const int> ps) : degrees(ps.begin(), ps.end()) {
    for (int p : degrees)
      for (TensorRole r : {TensorRole::Coupling1, TensorRole::Coupling2, TensorRole::Private2, TensorRole::Private1}) {
        polys.push_back(pure_polynomial(d, p, r));
        polys.back().compile();
      }
  }
  // sigma is the first system-1 replica, rho the first system-2 replica.
  void record(OverlapSampleArray& out, Eigen::Index row, std::uint64_t sigma, std::uint64_t rho, int N) const {
    for (std::size_t k = 0; k < polys.size(); ++k)
      out.energies(row, static_cast<Eigen::Index>(k)) = polys[k].evaluate(k % 2 == 0 ? sigma : rho) / N;
  }
};

void allocate(OverlapSampleArray& out, int N, int n, Eigen::Index rows, const EnergyProbes& probes) {
  out.N = N;
  out.n = n;
  out.within1.resize(rows, n * n);
  out.within2.resize(rows, n * n);
  out.cross.resize(rows, n * n);
  out.energy_degrees = probes.degrees;
  out.energies.resize(rows, static_cast<Eigen::Index>(probes.polys.size()));
}

void fill_row(OverlapSampleArray& out, Eigen::Index row, std::span<const std::uint64_t> sigma,
              std::span<const std::uint64_t> rho) {
  const int n = out.n, N = out.N;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Eigen::Index c = a * n + b;
      out.within1(row, c) = overlap_bits(sigma[a], sigma[b], N);
      out.within2(row, c) = overlap_bits(rho[a], rho[b], N);
      out.cross(row, c) = overlap_bits(sigma[a], rho[b], N);
    }
}

}  // namespace

ReplicaPool make_replica_pool(const CoupledDisorder& disorder, const SamplerConfig& config, int n,
                              const SpinPolynomial& h1, const SpinPolynomial& h2) {
  config.validate();
  if (n < 1) throw InvalidSpec("need at least one replica per system");
  if (disorder.N > kMaxSpins) throw InvalidSpec("N exceeds 64");
  ReplicaPool pool;
  pool.N = disorder.N;
  pool.n = n;
  pool.ladder = config.ladder;
  for (int l = 0; l < n; ++l) {
    pool.system1.push_back(make_ladder(disorder.N, config.ladder.size(), chain_stream(config, disorder, 1, l), h1));
    pool.system2.push_back(make_ladder(disorder.N, config.ladder.size(), chain_stream(config, disorder, 2, l), h2));
  }
  return pool;
}

void parallel_tempering_step(Ladder& ladder, std::span<const double> scales, const SpinPolynomial& hamiltonian) {
  reanchor(ladder, hamiltonian);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < ladder.rungs.size(); ++k) {
    auto& a = ladder.rungs[k];
    auto& b = ladder.rungs[k + 1];
    const double x = (scales[k] - scales[k + 1]) * (b.energy - a.energy);
    ++ladder.swap_attempts[k];
    if (x >= 0.0 || u(ladder.rng) < std::exp(x)) {
      std::swap(a, b);
      ++ladder.swap_accepts[k];
    }
  }
}

void parallel_tempering_step(ReplicaPool& pool, const SpinPolynomial& h1, const SpinPolynomial& h2) {
  for (auto& lad : pool.system1) parallel_tempering_step(lad, pool.ladder, h1);
  for (auto& lad : pool.system2) parallel_tempering_step(lad, pool.ladder, h2);
}

OverlapSampleArray sample_replica_overlaps(const CoupledDisorder& disorder, const SamplerConfig& config, int n,
                                           std::span<const int> energy_degrees) {
  SpinPolynomial h1 = hamiltonian_polynomial(disorder, 1);
  SpinPolynomial h2 = hamiltonian_polynomial(disorder, 2);
  h1.compile();
  h2.compile();
  ReplicaPool pool = make_replica_pool(disorder, config, n, h1, h2);
  const EnergyProbes probes(disorder, energy_degrees);

  const Eigen::Index rows = (config.sweeps - config.burn_in + config.thinning - 1) / config.thinning;
  std::vector<std::vector<std::uint64_t>> traj(static_cast<std::size_t>(2 * n));
  std::vector<long> accepted(static_cast<std::size_t>(2 * n), 0);

  parallel_for(static_cast<std::size_t>(2 * n), config.threads, [&](std::size_t c) {
    const int system = c < static_cast<std::size_t>(n) ? 1 : 2;
    Ladder& lad = pool.system(system)[c % static_cast<std::size_t>(n)];
    const SpinPolynomial& h = system == 1 ? h1 : h2;
    auto& out = traj[c];
    out.reserve(static_cast<std::size_t>(rows));
    for (int s = 0; s < config.sweeps; ++s) {
      for (std::size_t k = 0; k < lad.rungs.size(); ++k) {
        const int acc = metropolis_sweep(lad.rungs[k], h, pool.ladder[k], lad.rng);
        if (k + 1 == lad.rungs.size()) accepted[c] += acc;
      }
      if ((s + 1) % config.exchange_interval == 0) {
        if (lad.rungs.size() > 1)
          parallel_tempering_step(lad, pool.ladder, h);
        else
          reanchor(lad, h);
      }
      if (s >= config.burn_in && (s - config.burn_in) % config.thinning == 0) out.push_back(lad.rungs.back().bits);
    }
    reanchor(lad, h);
  });

  OverlapSampleArray data;
  allocate(data, disorder.N, n, rows, probes);
  data.seed = config.chain_seed;
  data.disorder_index = disorder.seed.sample_index;
  std::vector<std::uint64_t> sigma(static_cast<std::size_t>(n)), rho(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int l = 0; l < n; ++l) {
      sigma[static_cast<std::size_t>(l)] = traj[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)];
      rho[static_cast<std::size_t>(l)] = traj[static_cast<std::size_t>(n + l)][static_cast<std::size_t>(r)];
    }
    fill_row(data, r, sigma, rho);
    if (!probes.polys.empty()) probes.record(data, r, sigma[0], rho[0], disorder.N);
  }

  double drift = 0.0;
  std::vector<double> swap_rates(config.ladder.size() > 1 ? config.ladder.size() - 1 : 0, 0.0);
  std::vector<long> attempts(swap_rates.size(), 0), accepts(swap_rates.size(), 0);
  for (int j : {1, 2})
    for (const auto& lad : pool.system(j)) {
      drift = std::max(drift, lad.max_drift);
      for (std::size_t k = 0; k < swap_rates.size(); ++k) {
        attempts[k] += lad.swap_attempts[k];
        accepts[k] += lad.swap_accepts[k];
      }
    }
  for (std::size_t k = 0; k < swap_rates.size(); ++k)
    swap_rates[k] = attempts[k] ? static_cast<double>(accepts[k]) / static_cast<double>(attempts[k]) : 0.0;
  long total_acc = 0;
  for (long a : accepted) total_acc += a;
  data.metadata = {{"engine", "mc"},
                   {"sweeps", config.sweeps},
                   {"burn_in", config.burn_in},
                   {"thinning", config.thinning},
                   {"exchange_interval", config.exchange_interval},
                   {"ladder", config.ladder},
                   {"chain_seed", config.chain_seed},
                   {"acceptance", static_cast<double>(total_acc) / (2.0 * n * config.sweeps * disorder.N)},
                   {"swap_rates", swap_rates},
                   {"max_energy_drift", drift}};
  return data;
}

OverlapSampleArray sample_exact_replicas(const CoupledDisorder& disorder, const ExactPair& pair, int n, int samples,
                                         std::uint64_t seed, std::span<const int> energy_degrees) {
  if (n < 1 || samples < 1) throw InvalidSpec("need at least one replica and one sample");
  const EnergyProbes probes(disorder, energy_degrees);
  OverlapSampleArray data;
  allocate(data, disorder.N, n, samples, probes);
  data.seed = seed;
  data.disorder_index = disorder.seed.sample_index;
  Engine rng(derive_stream({seed, disorder.seed.master, disorder.seed.sample_index, 0x5A3D}));
  std::vector<std::uint64_t> sigma(static_cast<std::size_t>(n)), rho(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < samples; ++r) {
    for (auto& s : sigma) s = pair.table1.sample(rng);
    for (auto& s : rho) s = pair.table2.sample(rng);
    fill_row(data, r, sigma, rho);
    if (!probes.polys.empty()) probes.record(data, r, sigma[0], rho[0], disorder.N);
  }
  data.metadata = {{"engine", "exact-iid"}, {"samples", samples}, {"seed", seed}};
  return data;
}

}  // namespace pspin

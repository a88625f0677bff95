#ifndef PSPIN_MC_HPP
#define PSPIN_MC_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "pspin/disorder.hpp"
#include "pspin/exact.hpp"
#include "pspin/overlaps.hpp"
#include "pspin/seeding.hpp"
#include "pspin/spins.hpp"

namespace pspin {

// Geometric ladder lo..hi with `rungs` points; the last rung is exactly hi.
std::vector<double> geometric_ladder(double lo = 0.3, double hi = 1.0, int rungs = 8);

struct SamplerConfig {
  int sweeps = 100000;
  int burn_in = 20000;
  int thinning = 1;
  std::vector<double> ladder = geometric_ladder();
  int exchange_interval = 1;
  std::uint64_t chain_seed = 0;
  int threads = 1;

  void validate() const;
};

// One chain state: packed spins and the cached unscaled energy H(bits).
struct ChainState {
  std::uint64_t bits = 0;
  double energy = 0.0;
};

// N single-spin-flip proposals at Hamiltonian scale `scale`. Returns the number accepted.
int metropolis_sweep(ChainState& state, const SpinPolynomial& hamiltonian, double scale, Engine& rng);

// One tempering ladder per (system, replica).
struct Ladder {
  std::vector<ChainState> rungs;  // rungs[k] runs at scale ladder[k]
  Engine rng;
  std::vector<long> swap_attempts;  // per adjacent pair (k, k+1)
  std::vector<long> swap_accepts;
  double max_drift = 0.0;  // largest cached-vs-recomputed energy gap seen at re-anchoring
};

struct ReplicaPool {
  int N = 0;
  int n = 0;
  std::vector<double> ladder;
  std::vector<Ladder> system1;  // n ladders
  std::vector<Ladder> system2;

  std::vector<Ladder>& system(int j) { return j == 1 ? system1 : system2; }
  const std::vector<Ladder>& system(int j) const { return j == 1 ? system1 : system2; }
};

ReplicaPool make_replica_pool(const CoupledDisorder& disorder, const SamplerConfig& config, int n,
                              const SpinPolynomial& h1, const SpinPolynomial& h2);

// Adjacent swap proposals on one ladder, accepted with min(1, exp((s_a - s_b)(H_b - H_a))).
// Cached energies are re-anchored against `hamiltonian` first.
void parallel_tempering_step(Ladder& ladder, std::span<const double> scales, const SpinPolynomial& hamiltonian);
// All ladders of the pool.
void parallel_tempering_step(ReplicaPool& pool, const SpinPolynomial& h1, const SpinPolynomial& h2);

// Runs 2n tempering chains and records overlaps at the scale-1 rung after burn-in and thinning.
// For each degree in `energy_degrees` four pure-process values per sample are stored (see OverlapSampleArray).
// metadata carries acceptance rates, swap rates and the largest energy drift.
OverlapSampleArray sample_replica_overlaps(const CoupledDisorder& disorder, const SamplerConfig& config, int n,
                                           std::span<const int> energy_degrees = {});

// I.i.d. replicas drawn from exact Gibbs tables, in the same layout.
OverlapSampleArray sample_exact_replicas(const CoupledDisorder& disorder, const ExactPair& pair, int n, int samples,
                                         std::uint64_t seed, std::span<const int> energy_degrees = {});

}  // namespace pspin

#endif  // PSPIN_MC_HPP

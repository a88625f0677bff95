#include "pspin/disorder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>

#include "pspin/errors.hpp"
#include "pspin/seeding.hpp"

namespace pspin {

namespace {

enum StreamTag : std::uint64_t { kShared = 0, kPrivate1 = 1, kPrivate2 = 2 };

std::size_t ipow(int base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= static_cast<std::size_t>(base);
  return r;
}

CouplingTensor gaussian_tensor(int p, int N, std::uint64_t stream) {
  CouplingTensor t{p, N, Eigen::VectorXd(static_cast<Eigen::Index>(ipow(N, p)))};
  Engine eng(stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < t.entries.size(); ++i) t.entries[i] = normal(eng);
  return t;
}

void mix_pair(DegreeDisorder& d) {
  if (d.t == 1.0) {
    d.g1 = d.shared;
    d.g2 = d.shared;
    return;
  }
  if (d.t == 0.0) {
    d.g1 = d.private1;
    d.g2 = d.private2;
    return;
  }
  const double a = std::sqrt(d.t), b = std::sqrt(1.0 - d.t);
  d.g1 = {d.degree, d.shared.N, a * d.shared.entries + b * d.private1.entries};
  d.g2 = {d.degree, d.shared.N, a * d.shared.entries + b * d.private2.entries};
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "dump format assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated disorder dump");
  return v;
}

constexpr char kMagic[4] = {'P', 'S', 'P', 'D'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::size_t CouplingTensor::index(std::span<const int> tuple) const {
  if (static_cast<int>(tuple.size()) != degree) throw DimensionMismatch("tuple length differs from tensor degree");
  std::size_t idx = 0;
  for (int i : tuple) idx = idx * static_cast<std::size_t>(N) + static_cast<std::size_t>(i);
  return idx;
}

const DegreeDisorder* CoupledDisorder::find(int p) const {
  for (const auto& d : degrees)
    if (d.degree == p) return &d;
  return nullptr;
}

const DegreeDisorder& CoupledDisorder::at(int p) const {
  if (const auto* d = find(p)) return *d;
  throw DimensionMismatch("degree " + std::to_string(p) + " not materialized");
}

CoupledDisorder sample_coupled_disorder(const CoupledModelSpec& spec, int N, DisorderSeed seed,
                                        std::span<const int> extra_degrees, std::size_t max_entries) {
  if (N < 1) throw InvalidSpec("N must be >= 1");
  spec.validate();
  std::vector<int> degrees = spec.degrees();
  degrees.insert(degrees.end(), extra_degrees.begin(), extra_degrees.end());
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());

  double total = 0.0;
  for (int p : degrees) total += std::pow(static_cast<double>(N), p);
  if (total > static_cast<double>(max_entries))
    throw MemoryBudget("disorder needs " + std::to_string(static_cast<long double>(total)) + " entries per tensor family, cap is " +
                       std::to_string(max_entries));

  CoupledDisorder out;
  out.N = N;
  out.seed = seed;
  out.params1 = spec.params1;
  out.params2 = spec.params2;
  for (int p : degrees) {
    if (p < 1) throw InvalidSpec("degree must be >= 1");
    DegreeDisorder d;
    d.degree = p;
    d.t = spec.coupling.t(p);
    const auto stream = [&](std::uint64_t tag) {
      return derive_stream({seed.master, seed.sample_index, tag, static_cast<std::uint64_t>(p)});
    };
    d.shared = gaussian_tensor(p, N, stream(kShared));
    d.private1 = gaussian_tensor(p, N, stream(kPrivate1));
    d.private2 = gaussian_tensor(p, N, stream(kPrivate2));
    mix_pair(d);
    out.degrees.push_back(std::move(d));
  }
  return out;
}

void save_disorder(const CoupledDisorder& disorder, std::ostream& out) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(disorder.N));
  put<std::uint64_t>(out, disorder.seed.master);
  put<std::uint64_t>(out, disorder.seed.sample_index);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(disorder.degrees.size()));
  for (const auto& d : disorder.degrees) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.degree));
    put<double>(out, d.t);
    put<double>(out, disorder.params1.beta(d.degree));
    put<double>(out, disorder.params2.beta(d.degree));
    for (const auto* t : {&d.shared, &d.private1, &d.private2})
      out.write(reinterpret_cast<const char*>(t->entries.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t->entries.size())));
  }
  if (!out) throw Error("failed to write disorder dump");
}

CoupledDisorder load_disorder(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error("not a disorder dump");
  if (get<std::uint32_t>(in) != kVersion) throw Error("unsupported disorder dump version");
  CoupledDisorder out;
  out.N = static_cast<int>(get<std::uint32_t>(in));
  out.seed.master = get<std::uint64_t>(in);
  out.seed.sample_index = get<std::uint64_t>(in);
  const auto count = get<std::uint32_t>(in);
  std::map<int, double> b1, b2;
  for (std::uint32_t k = 0; k < count; ++k) {
    DegreeDisorder d;
    d.degree = static_cast<int>(get<std::uint32_t>(in));
    d.t = get<double>(in);
    b1[d.degree] = get<double>(in);
    b2[d.degree] = get<double>(in);
    const auto len = static_cast<Eigen::Index>(ipow(out.N, d.degree));
    for (auto* t : {&d.shared, &d.private1, &d.private2}) {
      *t = {d.degree, out.N, Eigen::VectorXd(len)};
      in.read(reinterpret_cast<char*>(t->entries.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(len)));
      if (!in) throw Error("truncated disorder dump");
    }
    mix_pair(d);
    out.degrees.push_back(std::move(d));
  }
  out.params1 = MixedSpinParams(b1);
  out.params2 = MixedSpinParams(b2);
  return out;
}

void save_disorder(const CoupledDisorder& disorder, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  save_disorder(disorder, out);
}

CoupledDisorder load_disorder(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_disorder(in);
}

}  // namespace pspin

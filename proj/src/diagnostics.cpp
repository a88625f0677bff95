#include "pspin/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "pspin/errors.hpp"
#include "pspin/parallel.hpp"

namespace pspin {

std::string Interval::to_string() const {
  std::ostringstream os;
  os << (closed_lo ? '[' : '(') << lo << ',' << hi << (closed_hi ? ']' : ')');
  return os.str();
}

bool IntervalSet::contains(double x) const {
  return std::any_of(parts.begin(), parts.end(), [x](const Interval& i) { return i.contains(x); });
}

bool IntervalSet::covers(double lo, double hi) const {
  // Sweep right from lo, extending through any part that contains the current point.
  double x = lo;
  for (bool moved = true; moved;) {
    moved = false;
    for (const auto& i : parts) {
      if (!i.contains(x)) continue;
      if (i.contains(hi)) return true;
      if (i.hi > x) {
        x = i.hi;
        moved = true;
      }
    }
  }
  return false;
}

std::string IntervalSet::to_string() const {
  if (parts.empty()) return "{}";
  std::string s;
  for (std::size_t k = 0; k < parts.size(); ++k) s += (k ? "u" : "") + parts[k].to_string();
  return s;
}

// ---- test functions ----

namespace {

void check_id(const OverlapId& id) {
  if (id.l < 1 || id.lp < 1) throw InvalidSpec("replica labels start at 1");
}

double ipow(double x, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= x;
  return r;
}

}  // namespace

TestFunction TestFunction::constant() { return {}; }

TestFunction TestFunction::monomial(std::vector<OverlapPower> factors) {
  TestFunction f;
  f.kind_ = Kind::Monomial;
  for (const auto& [id, e] : factors) {
    check_id(id);
    if (e < 1) throw InvalidSpec("monomial exponents must be >= 1");
  }
  f.factors_ = std::move(factors);
  return f;
}

TestFunction TestFunction::indicator(OverlapId id, IntervalSet set) {
  check_id(id);
  TestFunction f;
  f.kind_ = Kind::Indicator;
  f.factors_ = {{id, 1}};
  f.set_ = std::move(set);
  return f;
}

int TestFunction::replicas() const {
  int r = 0;
  for (const auto& [id, e] : factors_) r = std::max({r, id.l, id.lp});
  return r;
}

double TestFunction::evaluate(const OverlapSampleArray& data, Eigen::Index row) const {
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Monomial: {
      double v = 1.0;
      for (const auto& [id, e] : factors_) v *= ipow(data.value(row, id), e);
      return v;
    }
    case Kind::Indicator:
      return set_.contains(data.value(row, factors_.front().first)) ? 1.0 : 0.0;
  }
  return 0.0;
}

std::string TestFunction::to_string() const {
  switch (kind_) {
    case Kind::Constant:
      return "1";
    case Kind::Monomial: {
      std::string s;
      for (const auto& [id, e] : factors_) {
        if (!s.empty()) s += "*";
        s += pspin::to_string(id);
        if (e != 1) s += "^" + std::to_string(e);
      }
      return s;
    }
    case Kind::Indicator:
      return "I(" + pspin::to_string(factors_.front().first) + " in " + set_.to_string() + ")";
  }
  return "?";
}

std::vector<TestFunction> default_test_family() {
  using K = OverlapKind;
  auto id = [](K k, int l, int lp) { return OverlapId{k, l, lp}; };
  return {
      TestFunction::constant(),
      TestFunction::monomial({{id(K::Within1, 1, 2), 1}}),
      TestFunction::monomial({{id(K::Within2, 1, 2), 1}}),
      TestFunction::monomial({{id(K::Cross, 1, 1), 1}}),
      TestFunction::monomial({{id(K::Cross, 1, 2), 1}}),
      TestFunction::monomial({{id(K::Cross, 2, 1), 1}}),
      TestFunction::monomial({{id(K::Within1, 1, 2), 2}}),
      TestFunction::monomial({{id(K::Within1, 1, 2), 1}, {id(K::Cross, 1, 1), 1}}),
      TestFunction::monomial({{id(K::Cross, 1, 1), 1}, {id(K::Cross, 2, 2), 1}}),
      TestFunction::monomial({{id(K::Within2, 1, 2), 1}, {id(K::Cross, 2, 1), 1}}),
  };
}

// ---- exact Gibbs averages of overlap monomials ----

Eigen::VectorXd insertion_table(const ExactPair& pair, int system, const Eigen::VectorXd& values) {
  const auto& probs = pair.table(system).probabilities();
  if (values.size() != probs.size()) throw DimensionMismatch("insertion values do not match the table");
  return correlation_table(Eigen::VectorXd(probs.cwiseProduct(values)));
}

namespace {

// Multiset of XOR masks produced by e site draws: mask -> number of tuples.
std::vector<std::pair<std::uint64_t, double>> mask_power(int N, int e) {
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(Eigen::Index{1} << N);
  cur[0] = 1.0;
  for (int k = 0; k < e; ++k) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(cur.size());
    for (Eigen::Index m = 0; m < cur.size(); ++m) {
      if (cur[m] == 0.0) continue;
      for (int i = 0; i < N; ++i) next[m ^ (Eigen::Index{1} << i)] += cur[m];
    }
    cur.swap(next);
  }
  std::vector<std::pair<std::uint64_t, double>> out;
  for (Eigen::Index m = 0; m < cur.size(); ++m)
    if (cur[m] != 0.0) out.emplace_back(static_cast<std::uint64_t>(m), cur[m]);
  return out;
}

struct Edge {
  int a = 0;
  int b = 0;
  int e = 0;
};

}  // namespace

double gibbs_average(const ExactPair& pair, std::span<const OverlapPower> factors, const Eigen::VectorXd* weighted,
                     int weighted_system) {
  const int N = pair.table1.N();
  // Replica nodes keyed by (system, label).
  std::map<std::pair<int, int>, int> nodes;
  std::vector<const Eigen::VectorXd*> tables;
  auto node = [&](int system, int label) {
    auto [it, fresh] = nodes.try_emplace({system, label}, static_cast<int>(tables.size()));
    if (fresh) {
      const bool w = weighted && system == weighted_system && label == 1;
      tables.push_back(w ? weighted : &pair.corr(system));
    }
    return it->second;
  };
  if (weighted) node(weighted_system, 1);

  std::map<std::pair<int, int>, int> merged;
  for (const auto& [id, e] : factors) {
    if (e < 0) throw InvalidSpec("negative overlap exponent");
    if (e == 0) continue;
    int a = 0, b = 0;
    switch (id.kind) {
      case OverlapKind::Within1:
      case OverlapKind::Within2: {
        if (id.l == id.lp) continue;
        const int s = id.kind == OverlapKind::Within1 ? 1 : 2;
        a = node(s, id.l);
        b = node(s, id.lp);
        break;
      }
      case OverlapKind::Cross:
        a = node(1, id.l);
        b = node(2, id.lp);
        break;
    }
    merged[{std::min(a, b), std::max(a, b)}] += e;
  }

  std::vector<Edge> edges;
  int K = 0;
  std::map<int, std::vector<std::pair<std::uint64_t, double>>> powers;
  double leaves = 1.0;
  for (const auto& [ab, e] : merged) {
    edges.push_back({ab.first, ab.second, e});
    K += e;
    if (!powers.count(e)) powers[e] = mask_power(N, e);
    leaves *= static_cast<double>(powers[e].size());
  }
  if (leaves > 4e8) throw BudgetExceeded("overlap monomial too large for exact averaging");

  std::vector<std::uint64_t> masks(tables.size(), 0);
  std::function<double(std::size_t)> dfs = [&](std::size_t k) -> double {
    if (k == edges.size()) {
      double v = 1.0;
      for (std::size_t r = 0; r < tables.size(); ++r) v *= (*tables[r])[static_cast<Eigen::Index>(masks[r])];
      return v;
    }
    const Edge& ed = edges[k];
    double s = 0.0;
    for (const auto& [m, c] : powers[ed.e]) {
      masks[ed.a] ^= m;
      masks[ed.b] ^= m;
      s += c * dfs(k + 1);
      masks[ed.a] ^= m;
      masks[ed.b] ^= m;
    }
    return s;
  };
  return dfs(0) * std::pow(static_cast<double>(N), -K);
}

DisorderSeed unit_seed(std::uint64_t master, int N, std::uint64_t index) {
  return {derive_stream({master, static_cast<std::uint64_t>(N)}), index};
}

// ---- observables and per-group evaluation ----

namespace {

int insertion_system(Insertion ins) { return ins == Insertion::H1 || ins == Insertion::Z2 ? 1 : 2; }
int insertion_column(Insertion ins) {
  switch (ins) {
    case Insertion::H1:
      return 0;
    case Insertion::H2:
      return 1;
    case Insertion::Z2:
      return 2;
    case Insertion::Z1:
      return 3;
    case Insertion::None:
      break;
  }
  return -1;
}
TensorRole insertion_role(Insertion ins) {
  switch (ins) {
    case Insertion::H1:
      return TensorRole::Coupling1;
    case Insertion::H2:
      return TensorRole::Coupling2;
    case Insertion::Z2:
      return TensorRole::Private2;
    default:
      return TensorRole::Private1;
  }
}

// coef * < f^{with_f} * prod extra * insertion >
struct Term {
  double coef = 1.0;
  bool with_f = true;
  std::vector<OverlapPower> extra;
  Insertion ins = Insertion::None;
  int p = 0;  // degree of the inserted process
};
using LinearForm = std::vector<Term>;

class SampleContext {
 public:
  SampleContext(const OverlapSampleArray& data, Eigen::Index begin, Eigen::Index end)
      : data_(data), begin_(begin), end_(end) {}

  double average(const Term& t, const TestFunction& f) const {
    const Eigen::Index col = t.ins == Insertion::None ? -1 : data_.energy_column(t.p, insertion_column(t.ins));
    CompensatedSum s;
    for (Eigen::Index r = begin_; r < end_; ++r) {
      double v = t.with_f ? f.evaluate(data_, r) : 1.0;
      for (const auto& [id, e] : t.extra) v *= ipow(data_.value(r, id), e);
      if (col >= 0) v *= data_.energies(r, col);
      s.add(v);
    }
    return s.value() / static_cast<double>(end_ - begin_);
  }

 private:
  const OverlapSampleArray& data_;
  Eigen::Index begin_, end_;
};

class ExactContext {
 public:
  ExactContext(const ExactPair& pair, const CoupledDisorder* disorder) : pair_(pair), disorder_(disorder) {}

  double average(const Term& t, const TestFunction& f) {
    std::vector<OverlapPower> factors = t.extra;
    if (t.with_f) {
      if (f.kind() == TestFunction::Kind::Indicator)
        throw InvalidSpec("indicator test functions need sampled data, not exact tables");
      factors.insert(factors.end(), f.factors().begin(), f.factors().end());
    }
    if (t.ins == Insertion::None) return gibbs_average(pair_, factors);
    return gibbs_average(pair_, factors, &weighted(t.ins, t.p), insertion_system(t.ins));
  }

  // Inserted process values / N on the configurations of its system.
  const Eigen::VectorXd& values(Insertion ins, int p) {
    auto key = std::make_pair(static_cast<int>(ins), p);
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    if (!disorder_) throw InvalidSpec("insertions need the disorder realization");
    const auto poly = pure_polynomial(*disorder_, p, insertion_role(ins));
    return values_[key] = poly.evaluate_all() / static_cast<double>(disorder_->N);
  }

  const Eigen::VectorXd& weighted(Insertion ins, int p) {
    auto key = std::make_pair(static_cast<int>(ins), p);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    return tables_[key] = insertion_table(pair_, insertion_system(ins), values(ins, p));
  }

 private:
  const ExactPair& pair_;
  const CoupledDisorder* disorder_;
  std::map<std::pair<int, int>, Eigen::VectorXd> values_;
  std::map<std::pair<int, int>, Eigen::VectorXd> tables_;
};

template <typename Ctx>
double evaluate_form(Ctx& ctx, const LinearForm& form, const TestFunction& f) {
  double v = 0.0;
  for (const auto& t : form) v += t.coef * ctx.average(t, f);
  return v;
}

OverlapPower power(OverlapKind k, int l, int lp, int p) { return {OverlapId{k, l, lp}, p}; }

// Columns A, X, Y, B of the functional estimators for system j:
// Phi = E[A] - E[X] E[Y] / n, Psi = E[B].
std::vector<LinearForm> functional_forms(int j, int n, int p) {
  const OverlapKind within = j == 1 ? OverlapKind::Within1 : OverlapKind::Within2;
  auto cross = [&](int l) { return j == 1 ? power(OverlapKind::Cross, 1, l, p) : power(OverlapKind::Cross, l, 1, p); };
  const double inv = 1.0 / n;
  LinearForm A{{1.0, true, {power(within, 1, n + 1, p)}}};
  for (int l = 2; l <= n; ++l) A.push_back({-inv, true, {power(within, 1, l, p)}});
  LinearForm X{{1.0, true, {}}};
  LinearForm Y{{1.0, false, {power(within, 1, 2, p)}}};
  LinearForm B{{1.0, true, {cross(n + 1)}}};
  for (int l = 1; l <= n; ++l) B.push_back({-inv, true, {cross(l)}});
  return {A, X, Y, B};
}

// Linear part of the integration-by-parts right-hand sides: sum_{l<=n} <R^p f> - n <R_{1,n+1}^p f>.
LinearForm ibp_form(OverlapKind kind, int n, int p, double coef) {
  LinearForm out;
  for (int l = 1; l <= n; ++l) out.push_back({coef, true, {power(kind, 1, l, p)}});
  out.push_back({-coef * n, true, {power(kind, 1, n + 1, p)}});
  return out;
}

// Row blocks for the jackknife: min(rows, 32) contiguous blocks.
std::vector<char> expand_blocks(const std::vector<char>& keep, Eigen::Index rows) {
  const auto blocks = static_cast<Eigen::Index>(keep.size());
  std::vector<char> out(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) out[static_cast<std::size_t>(r)] = keep[static_cast<std::size_t>(r * blocks / rows)];
  return out;
}

int block_count(Eigen::Index rows) { return static_cast<int>(std::min<Eigen::Index>(rows, 32)); }

// c_phi * Phi + c_psi * Psi from the group matrix (columns col0..col0+3 = A, X, Y, B).
double functional_value(const Eigen::MatrixXd& v, const std::vector<char>& rows, int col0, int n, double c_phi,
                        double c_psi) {
  CompensatedSum a, x, y, xy, b;
  double m = 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (!rows[static_cast<std::size_t>(r)]) continue;
    a.add(v(r, col0));
    x.add(v(r, col0 + 1));
    y.add(v(r, col0 + 2));
    xy.add(v(r, col0 + 1) * v(r, col0 + 2));
    b.add(v(r, col0 + 3));
    m += 1.0;
  }
  // Unbiased product of two expectations: average of X_a Y_b over a != b.
  const double product =
      m > 1.0 ? (x.value() * y.value() - xy.value()) / (m * (m - 1.0)) : x.value() * y.value() / (m * m);
  const double phi = a.value() / m - product / n;
  return c_phi * phi + c_psi * b.value() / m;
}

Estimate functional_estimate(const Eigen::MatrixXd& v, int col0, int n, double c_phi, double c_psi) {
  const Eigen::Index rows = v.rows();
  return jackknife(block_count(rows), [&](const std::vector<char>& keep) {
    return functional_value(v, expand_blocks(keep, rows), col0, n, c_phi, c_psi);
  });
}

Estimate column_estimate(const Eigen::MatrixXd& v, Eigen::Index col) {
  std::vector<double> xs(v.col(col).data(), v.col(col).data() + v.rows());
  return mean_se(xs);
}

// Groups of a sample collection: one per array, or 32 time batches of a single array.
struct Group {
  const OverlapSampleArray* data;
  Eigen::Index begin, end;
};

std::vector<Group> make_groups(std::span<const OverlapSampleArray> data) {
  if (data.empty()) throw InvalidSpec("no overlap samples");
  std::vector<Group> out;
  if (data.size() == 1) {
    const auto& d = data.front();
    const Eigen::Index rows = d.samples();
    const int g = block_count(rows);
    if (g < 2) throw InvalidSpec("need at least two retained samples");
    for (int k = 0; k < g; ++k) out.push_back({&d, k * rows / g, (k + 1) * rows / g});
  } else {
    for (const auto& d : data) {
      if (d.samples() < 1) throw InvalidSpec("empty overlap sample array");
      out.push_back({&d, 0, d.samples()});
    }
  }
  return out;
}

void require_replicas(int have, int need) {
  if (have < need)
    throw InsufficientReplicas("need " + std::to_string(need) + " replicas per system, data has " + std::to_string(have));
}

void check_functional_args(int j, int n, const TestFunction& f, int p) {
  if (j != 1 && j != 2) throw InvalidSpec("system index must be 1 or 2");
  if (n < 1) throw InvalidSpec("n must be >= 1");
  if (p < 1) throw InvalidSpec("p must be >= 1");
  if (f.replicas() > n) throw InvalidSpec("test function uses more than n replicas");
}

nlohmann::json estimate_json(const Estimate& e) { return {{"estimate", e.value}, {"se", e.se}}; }

bool within(const Estimate& a, const Estimate& b, double k = 4.0) {
  const double se = combined_se(a.se, b.se);
  const double diff = std::abs(a.value - b.value);
  return diff <= k * se || diff <= 1e-12 * (1.0 + std::abs(a.value) + std::abs(b.value));
}

}  // namespace

// ---- Gamma / Delta ----

const GammaDelta& GGResidualReport::at(int p, int system) const {
  for (const auto& e : entries)
    if (e.p == p && e.system == system) return e;
  throw InvalidSpec("no Gamma/Delta entry for degree " + std::to_string(p));
}

nlohmann::json GGResidualReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries)
    rows.push_back({{"p", e.p}, {"system", e.system}, {"gamma", estimate_json(e.gamma)}, {"delta", estimate_json(e.delta)}});
  return {{"N", N}, {"M", M}, {"entries", rows}};
}

namespace {

// Per-disorder inner laws: for each degree, four (weights, values) pairs in the order H1, H2, Z2, Z1.
struct InnerLaw {
  Eigen::VectorXd w1, w2;  // Gibbs weights of system 1 and 2 (or uniform chain weights)
  std::vector<std::array<Eigen::VectorXd, 4>> values;
};

InnerLaw inner_law(const CoupledDisorder& d, std::span<const int> degrees, const InnerMode& inner) {
  InnerLaw law;
  if (const auto* ex = std::get_if<ExactInner>(&inner)) {
    law.w1 = build_gibbs_table(d, 1, ex->budget).probabilities();
    law.w2 = build_gibbs_table(d, 2, ex->budget).probabilities();
    for (int p : degrees) {
      std::array<Eigen::VectorXd, 4> v;
      const Insertion kinds[4] = {Insertion::H1, Insertion::H2, Insertion::Z2, Insertion::Z1};
      for (int k = 0; k < 4; ++k) v[k] = pure_polynomial(d, p, insertion_role(kinds[k])).evaluate_all() / d.N;
      law.values.push_back(std::move(v));
    }
  } else {
    const auto& mc = std::get<McInner>(inner);
    const OverlapSampleArray data = sample_replica_overlaps(d, mc.config, 1, degrees);
    const Eigen::Index rows = data.samples();
    law.w1 = law.w2 = Eigen::VectorXd::Constant(rows, 1.0 / static_cast<double>(rows));
    for (int p : degrees) {
      std::array<Eigen::VectorXd, 4> v;
      for (int k = 0; k < 4; ++k) v[k] = data.energies.col(data.energy_column(p, k));
      law.values.push_back(std::move(v));
    }
  }
  return law;
}

}  // namespace

GGResidualReport estimate_gamma_delta(const CoupledModelSpec& spec, int N, int M, std::span<const int> degrees,
                                      const InnerMode& inner, std::uint64_t seed, int threads) {
  if (M < 50) throw InvalidSpec("Gamma/Delta estimation needs at least 50 disorder samples");
  std::vector<int> ps(degrees.begin(), degrees.end());
  if (ps.empty()) ps = spec.degrees();
  const std::size_t Q = ps.size() * 4;
  auto draw = [&](std::size_t m) { return inner_law(sample_coupled_disorder(spec, N, unit_seed(seed, N, m), ps), ps, inner); };
  auto weights = [](const InnerLaw& law, int k) -> const Eigen::VectorXd& { return k == 0 || k == 2 ? law.w1 : law.w2; };

  // Pass 1: centers E<X>.
  Eigen::MatrixXd first(M, static_cast<Eigen::Index>(Q));
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const InnerLaw law = draw(m);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (int k = 0; k < 4; ++k)
        first(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i * 4 + k)) = weights(law, k).dot(law.values[i][k]);
  });
  std::vector<double> centers(Q);
  for (std::size_t q = 0; q < Q; ++q) centers[q] = column_estimate(first, static_cast<Eigen::Index>(q)).value;

  // Pass 2: E<|X - center|>, recomputing each realization from its seed.
  Eigen::MatrixXd second(M, static_cast<Eigen::Index>(Q));
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const InnerLaw law = draw(m);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (int k = 0; k < 4; ++k)
        second(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i * 4 + k)) =
            weights(law, k).dot((law.values[i][k].array() - centers[i * 4 + k]).abs().matrix());
  });

  GGResidualReport rep;
  rep.N = N;
  rep.M = M;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (int j : {1, 2}) {
      GammaDelta e;
      e.p = ps[i];
      e.system = j;
      // Gamma^j from H^j; Delta^1 from Z^2 at sigma^1, Delta^2 from Z^1 at rho^1.
      e.gamma = column_estimate(second, static_cast<Eigen::Index>(i * 4 + (j == 1 ? 0 : 1)));
      e.delta = column_estimate(second, static_cast<Eigen::Index>(i * 4 + (j == 1 ? 2 : 3)));
      rep.entries.push_back(e);
    }
  return rep;
}

// ---- Phi / Psi ----

nlohmann::json FunctionalReport::to_json() const {
  return {{"j", j}, {"n", n}, {"p", p}, {"f", f}, {"phi", estimate_json(phi)}, {"psi", estimate_json(psi)}, {"groups", groups}};
}

FunctionalReport reduce_functionals(const Eigen::MatrixXd& terms, int j, int n, const TestFunction& f, int p) {
  if (terms.rows() < 1 || terms.cols() != 4) throw DimensionMismatch("functional terms must be an M x 4 matrix");
  FunctionalReport r{j, n, p, f.to_string(), {}, {}, static_cast<int>(terms.rows())};
  r.phi = functional_estimate(terms, 0, n, 1.0, 0.0);
  r.psi = functional_estimate(terms, 0, n, 0.0, 1.0);
  return r;
}

Eigen::RowVector4d functional_terms(const ExactPair& pair, int j, int n, const TestFunction& f, int p) {
  check_functional_args(j, n, f, p);
  const auto forms = functional_forms(j, n, p);
  ExactContext ctx(pair, nullptr);
  Eigen::RowVector4d v;
  for (int c = 0; c < 4; ++c) v[c] = evaluate_form(ctx, forms[static_cast<std::size_t>(c)], f);
  return v;
}

namespace {

Eigen::RowVector4d group_terms(const Group& g, int j, int n, const TestFunction& f, int p) {
  require_replicas(g.data->n, n + 1);
  const auto forms = functional_forms(j, n, p);
  SampleContext ctx(*g.data, g.begin, g.end);
  Eigen::RowVector4d v;
  for (int c = 0; c < 4; ++c) v[c] = evaluate_form(ctx, forms[static_cast<std::size_t>(c)], f);
  return v;
}

}  // namespace

Eigen::RowVector4d functional_terms(const OverlapSampleArray& data, int j, int n, const TestFunction& f, int p) {
  check_functional_args(j, n, f, p);
  if (data.samples() < 1) throw InvalidSpec("empty overlap sample array");
  return group_terms({&data, 0, data.samples()}, j, n, f, p);
}

FunctionalReport compute_phi_psi(std::span<const OverlapSampleArray> data, int j, int n, const TestFunction& f, int p) {
  check_functional_args(j, n, f, p);
  const auto groups = make_groups(data);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(groups.size()), 4);
  for (std::size_t g = 0; g < groups.size(); ++g) v.row(static_cast<Eigen::Index>(g)) = group_terms(groups[g], j, n, f, p);
  return reduce_functionals(v, j, n, f, p);
}

FunctionalReport compute_phi_psi(std::span<const ExactPair> pairs, int j, int n, const TestFunction& f, int p) {
  check_functional_args(j, n, f, p);
  if (pairs.empty()) throw InvalidSpec("no exact tables");
  Eigen::MatrixXd v(static_cast<Eigen::Index>(pairs.size()), 4);
  for (std::size_t g = 0; g < pairs.size(); ++g) v.row(static_cast<Eigen::Index>(g)) = functional_terms(pairs[g], j, n, f, p);
  return reduce_functionals(v, j, n, f, p);
}

// ---- Lemma 1 ----

bool Lemma1IdentityReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.pass; });
}

nlohmann::json Lemma1IdentityReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks)
    rows.push_back({{"identity", c.name}, {"f", c.f}, {"lhs", estimate_json(c.lhs)}, {"rhs", estimate_json(c.rhs)}, {"pass", c.pass}});
  return {{"N", N}, {"M", M}, {"n", n}, {"p", p}, {"checks", rows}, {"all_pass", all_pass()}};
}

Lemma1IdentityReport check_lemma1_identities(const CoupledModelSpec& spec, int N, int M, int n,
                                             std::span<const TestFunction> family, int p, std::uint64_t seed,
                                             int threads) {
  if (M < 200) throw InvalidSpec("identity checks need at least 200 disorder samples");
  if (family.empty()) throw InvalidSpec("empty test-function family");
  for (const auto& f : family) check_functional_args(1, n, f, p);
  const double b1 = spec.params1.beta(p), b2 = spec.params2.beta(p), t = spec.coupling.t(p);

  // Columns: (b) lhs, rhs; then per f: (a) lhs, rhs, (c) lhs, rhs.
  std::vector<LinearForm> forms;
  std::vector<bool> uses_f;
  forms.push_back({{1.0, false, {}, Insertion::H1, p}});
  forms.push_back({{b1, false, {}}, {-b1, false, {power(OverlapKind::Within1, 1, 2, p)}}});
  const LinearForm a_rhs = ibp_form(OverlapKind::Cross, n, p, b2 * std::sqrt(1.0 - t));
  LinearForm c_rhs = ibp_form(OverlapKind::Within1, n, p, b1);
  const LinearForm c_cross = ibp_form(OverlapKind::Cross, n, p, b2 * t);
  c_rhs.insert(c_rhs.end(), c_cross.begin(), c_cross.end());
  const LinearForm a_lhs{{1.0, true, {}, Insertion::Z2, p}};
  const LinearForm c_lhs{{1.0, true, {}, Insertion::H1, p}};

  const std::size_t F = family.size();
  const std::vector<int> extra{p};
  Eigen::MatrixXd v(M, static_cast<Eigen::Index>(2 + 4 * F));
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const CoupledDisorder d = sample_coupled_disorder(spec, N, unit_seed(seed, N, m), extra);
    const ExactPair pair = build_exact_pair(d);
    ExactContext ctx(pair, &d);
    const auto row = static_cast<Eigen::Index>(m);
    const TestFunction one = TestFunction::constant();
    v(row, 0) = evaluate_form(ctx, forms[0], one);
    v(row, 1) = evaluate_form(ctx, forms[1], one);
    for (std::size_t k = 0; k < F; ++k) {
      const auto c = static_cast<Eigen::Index>(2 + 4 * k);
      v(row, c) = evaluate_form(ctx, a_lhs, family[k]);
      v(row, c + 1) = evaluate_form(ctx, a_rhs, family[k]);
      v(row, c + 2) = evaluate_form(ctx, c_lhs, family[k]);
      v(row, c + 3) = evaluate_form(ctx, c_rhs, family[k]);
    }
  });

  Lemma1IdentityReport rep{N, M, n, p, {}};
  auto add = [&](const std::string& name, const std::string& f, Eigen::Index c) {
    IdentityCheck chk{name, f, column_estimate(v, c), column_estimate(v, c + 1)};
    chk.pass = within(chk.lhs, chk.rhs);
    rep.checks.push_back(chk);
  };
  add("b", "1", 0);
  for (std::size_t k = 0; k < F; ++k) {
    add("a", family[k].to_string(), static_cast<Eigen::Index>(2 + 4 * k));
    add("c", family[k].to_string(), static_cast<Eigen::Index>(4 + 4 * k));
  }
  return rep;
}

bool Lemma1BoundReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

nlohmann::json Lemma1BoundReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks)
    rows.push_back({{"bound", c.name}, {"f", c.f}, {"lhs", estimate_json(c.lhs)}, {"rhs", estimate_json(c.bound)}, {"pass", c.pass}});
  return {{"N", N}, {"M", M}, {"n", n}, {"p", p}, {"residuals", residuals.to_json()}, {"checks", rows}, {"all_pass", all_pass()}};
}

Lemma1BoundReport check_lemma1_bounds(const CoupledModelSpec& spec, int N, int M, int n,
                                      std::span<const TestFunction> family, int p, std::uint64_t seed, int threads) {
  if (M < 50) throw InvalidSpec("bound checks need at least 50 disorder samples");
  if (family.empty()) throw InvalidSpec("empty test-function family");
  for (const auto& f : family) check_functional_args(1, n, f, p);
  const double b1 = spec.params1.beta(p), b2 = spec.params2.beta(p), t = spec.coupling.t(p);
  const std::vector<int> degrees{p};

  Lemma1BoundReport rep{N, M, n, p, {}, {}};
  rep.residuals = estimate_gamma_delta(spec, N, M, degrees, ExactInner{}, seed, threads);

  const auto forms1 = functional_forms(1, n, p);
  const auto forms2 = functional_forms(2, n, p);
  const std::size_t F = family.size();
  std::vector<Eigen::MatrixXd> v(F, Eigen::MatrixXd(M, 8));
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const CoupledDisorder d = sample_coupled_disorder(spec, N, unit_seed(seed, N, m), degrees);
    const ExactPair pair = build_exact_pair(d);
    ExactContext ctx(pair, &d);
    for (std::size_t k = 0; k < F; ++k)
      for (int c = 0; c < 4; ++c) {
        v[k](static_cast<Eigen::Index>(m), c) = evaluate_form(ctx, forms1[static_cast<std::size_t>(c)], family[k]);
        v[k](static_cast<Eigen::Index>(m), 4 + c) = evaluate_form(ctx, forms2[static_cast<std::size_t>(c)], family[k]);
      }
  });

  const auto& r1 = rep.residuals.at(p, 1);
  const auto& r2 = rep.residuals.at(p, 2);
  const double root = std::sqrt(1.0 - t);
  auto scaled = [n](const Estimate& e) { return Estimate{e.value / n, e.se / n}; };
  for (std::size_t k = 0; k < F; ++k) {
    const std::string fs = family[k].to_string();
    auto add = [&](const std::string& name, int col0, double c_phi, double c_psi, const Estimate& bound) {
      BoundCheck chk{name, fs, functional_estimate(v[k], col0, n, c_phi, c_psi), scaled(bound)};
      const double slack = 4.0 * combined_se(chk.lhs.se, chk.bound.se);
      chk.pass = std::abs(chk.lhs.value) <= chk.bound.value + slack + 1e-12;
      rep.checks.push_back(chk);
    };
    add("psi1", 0, 0.0, b2 * root, r1.delta);
    add("psi2", 4, 0.0, b1 * root, r2.delta);
    add("phi1", 0, b1, b2 * t, r1.gamma);
    add("phi2", 4, b2, b1 * t, r2.gamma);
  }
  return rep;
}

// ---- Lemma 2 ----

nlohmann::json Lemma2Report::to_json() const {
  nlohmann::json j{{"p", p}, {"l", l}, {"lhs", estimate_json(lhs)}, {"rhs", estimate_json(rhs)}, {"pass", pass}};
  if (chain) {
    j["chain"] = estimate_json(*chain);
    j["chain_pass"] = chain_pass;
  }
  return j;
}

Lemma2Report check_lemma2_identity(const ExactPair& pair, int p, int l, const ExactBudget& budget) {
  if (l < 2) throw InvalidSpec("Lemma 2 needs l >= 2");
  if (p < 1) throw InvalidSpec("p must be >= 1");
  const int N = pair.table1.N();
  if (N > budget.max_double_sum_n) throw BudgetExceeded("conditional overlap laws exceed the double-sum budget");
  const auto& P1 = pair.table1.probabilities();
  const auto& P2 = pair.table2.probabilities();
  const std::uint64_t configs = std::uint64_t{1} << N;

  // Per-sigma law of R(sigma, rho) under G2, then sums over independent rho-replicas.
  std::vector<double> rp(static_cast<std::size_t>(N + 1)), ra(static_cast<std::size_t>(N + 1));
  for (int d = 0; d <= N; ++d) {
    const double r = static_cast<double>(N - 2 * d) / N;
    rp[static_cast<std::size_t>(d)] = ipow(r, p);
    ra[static_cast<std::size_t>(d)] = std::abs(r);
  }
  CompensatedSum lhs, chain;
  std::vector<double> q(static_cast<std::size_t>(N + 1));
  for (std::uint64_t s = 0; s < configs; ++s) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::uint64_t r = 0; r < configs; ++r) q[static_cast<std::size_t>(std::popcount(s ^ r))] += P2[static_cast<Eigen::Index>(r)];
    double a = 0.0, c = 0.0;
    for (int d = 0; d <= N; ++d)
      for (int e = 0; e <= N; ++e) {
        const double w = q[static_cast<std::size_t>(d)] * q[static_cast<std::size_t>(e)];
        const double diff = rp[static_cast<std::size_t>(d)] - rp[static_cast<std::size_t>(e)];
        a += w * diff * diff;
        c += w * ipow(std::abs(ra[static_cast<std::size_t>(d)] - ra[static_cast<std::size_t>(e)]), 2 * p);
      }
    lhs.add(P1[static_cast<Eigen::Index>(s)] * a);
    chain.add(P1[static_cast<Eigen::Index>(s)] * c);
  }

  const std::vector<OverlapPower> m2p{power(OverlapKind::Cross, 1, 1, 2 * p)};
  const std::vector<OverlapPower> mpp{power(OverlapKind::Cross, 1, 1, p), power(OverlapKind::Cross, 1, 2, p)};
  Lemma2Report rep;
  rep.p = p;
  rep.l = l;
  rep.lhs = {lhs.value(), 0.0};
  rep.rhs = {2.0 * gibbs_average(pair, m2p) - 2.0 * gibbs_average(pair, mpp), 0.0};
  rep.pass = std::abs(rep.lhs.value - rep.rhs.value) <= 1e-12 * (1.0 + std::abs(rep.lhs.value));
  if (p % 2 == 0) {
    rep.chain = Estimate{chain.value(), 0.0};
    rep.chain_pass = rep.chain->value <= rep.lhs.value + 1e-12 * (1.0 + std::abs(rep.lhs.value));
  }
  return rep;
}

Lemma2Report check_lemma2_identity(std::span<const OverlapSampleArray> data, int p, int l) {
  if (l < 2) throw InvalidSpec("Lemma 2 needs l >= 2");
  if (p < 1) throw InvalidSpec("p must be >= 1");
  std::vector<double> lhs, rhs, chain, gap;
  for (const auto& d : data) {
    require_replicas(d.n, l);
    for (Eigen::Index r = 0; r < d.samples(); ++r) {
      const double r11 = d.value(r, {OverlapKind::Cross, 1, 1});
      const double r1l = d.value(r, {OverlapKind::Cross, 1, l});
      const double r12 = d.value(r, {OverlapKind::Cross, 1, 2});
      const double a = ipow(r11, p) - ipow(r1l, p);
      lhs.push_back(a * a);
      rhs.push_back(2.0 * ipow(r11, 2 * p) - 2.0 * ipow(r11, p) * ipow(r12, p));
      chain.push_back(ipow(std::abs(std::abs(r11) - std::abs(r1l)), 2 * p));
      gap.push_back(a * a - chain.back());
    }
  }
  if (lhs.size() < 2) throw InvalidSpec("need at least two samples");
  Lemma2Report rep;
  rep.p = p;
  rep.l = l;
  rep.lhs = batch_means(lhs);
  rep.rhs = batch_means(rhs);
  rep.pass = within(rep.lhs, rep.rhs);
  if (p % 2 == 0) {
    rep.chain = batch_means(chain);
    // The pointwise inequality makes every gap term nonnegative.
    rep.chain_pass = *std::min_element(gap.begin(), gap.end()) >= -1e-12;
  }
  return rep;
}

// ---- Lemma 3 ----

std::string EventSpec::to_string() const {
  return "A=" + A.to_string() + " A1=" + A1.to_string() + " A2=" + A2.to_string() + " n=" + std::to_string(n);
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::NotApplicable:
      return "not-applicable";
  }
  return "?";
}

nlohmann::json Lemma3Report::to_json() const {
  const char* names[] = {"eq1", "eq2", "eq3"};
  return {{"form", names[static_cast<int>(form)]}, {"status", pspin::to_string(status)}, {"lhs", lhs}, {"rhs", rhs},
          {"margin", estimate_json(margin)}, {"slack", slack}, {"gg_tolerance", gg_tolerance},
          {"defects", defects}, {"reason", reason}};
}

namespace {

struct Row {
  const OverlapSampleArray* data;
  Eigen::Index r;
};

// R_{1,1} in A, |R^1_{l,l'}| in A1 for l < l' <= k1, |R^2_{l,l'}| in A2 for l < l' <= k2.
bool event(const Row& x, const EventSpec& ev, int k1, int k2) {
  const auto& d = *x.data;
  if (!ev.A.contains(d.value(x.r, {OverlapKind::Cross, 1, 1}))) return false;
  for (int a = 1; a <= k1; ++a)
    for (int b = a + 1; b <= k1; ++b)
      if (!ev.A1.contains(std::abs(d.value(x.r, {OverlapKind::Within1, a, b})))) return false;
  for (int a = 1; a <= k2; ++a)
    for (int b = a + 1; b <= k2; ++b)
      if (!ev.A2.contains(std::abs(d.value(x.r, {OverlapKind::Within2, a, b})))) return false;
  return true;
}

}  // namespace

Lemma3Report check_lemma3_inequalities(std::span<const OverlapSampleArray> data, const EventSpec& ev, Lemma3Form form,
                                       double gg_tolerance) {
  if (ev.n < 1) throw InvalidSpec("event replica count must be >= 1");
  if (!(gg_tolerance >= 0.0)) throw InvalidSpec("gg_tolerance must be >= 0");
  const int n = ev.n;
  Lemma3Report rep;
  rep.form = form;
  rep.gg_tolerance = gg_tolerance;
  if (form == Lemma3Form::Eq1 && !ev.A2.covers(0.0, 1.0)) {
    rep.reason = "the first inequality is stated for A2 = [0,1]";
    return rep;
  }
  if (form == Lemma3Form::Eq2 && !ev.A1.covers(0.0, 1.0)) {
    rep.reason = "the second inequality is stated for A1 = [0,1]";
    return rep;
  }

  // Path of (k1, k2) replica counts from B_1 to the target event, one GG step per move.
  std::vector<std::pair<int, int>> path{{1, 1}};
  if (form == Lemma3Form::Eq1)
    for (int k = 1; k <= n; ++k) path.emplace_back(k + 1, 1);
  else if (form == Lemma3Form::Eq2)
    for (int k = 1; k < n; ++k) path.emplace_back(1, k + 1);
  else
    for (int k = 1; k < n; ++k) {
      path.emplace_back(k + 1, k);
      path.emplace_back(k + 1, k + 1);
    }
  int need1 = 2, need2 = 2;
  for (const auto& [a, b] : path) {
    need1 = std::max(need1, a);
    need2 = std::max(need2, b);
  }

  std::vector<Row> rows;
  for (const auto& d : data) {
    require_replicas(d.n, std::max(need1, need2));
    for (Eigen::Index r = 0; r < d.samples(); ++r) rows.push_back({&d, r});
  }
  if (rows.size() < 2) throw InvalidSpec("need at least two samples");
  const auto R = static_cast<Eigen::Index>(rows.size());

  // Per-row indicators: column 0 = R_11 in A, 1 = |R^1_12| in A1, 2 = |R^2_12| in A2, 3 = target event,
  // then for each step: I_E, and sum_l I_E I(|R_{l,k+1}| not in A_j).
  const std::size_t S = path.size() - 1;
  Eigen::MatrixXd ind(R, static_cast<Eigen::Index>(4 + 2 * S));
  for (Eigen::Index i = 0; i < R; ++i) {
    const Row& x = rows[static_cast<std::size_t>(i)];
    const auto& d = *x.data;
    ind(i, 0) = ev.A.contains(d.value(x.r, {OverlapKind::Cross, 1, 1}));
    ind(i, 1) = ev.A1.contains(std::abs(d.value(x.r, {OverlapKind::Within1, 1, 2})));
    ind(i, 2) = ev.A2.contains(std::abs(d.value(x.r, {OverlapKind::Within2, 1, 2})));
    const auto [t1, t2] = form == Lemma3Form::Eq1 ? std::pair{n + 1, n} : std::pair{n, n};
    ind(i, 3) = event(x, ev, t1, t2);
    for (std::size_t s = 0; s < S; ++s) {
      const auto [k1, k2] = path[s];
      const bool sigma_step = path[s + 1].first > k1;
      const bool in_e = event(x, ev, k1, k2);
      double miss = 0.0;
      if (in_e) {
        const int k = sigma_step ? k1 : k2;
        for (int l = 1; l <= k; ++l) {
          const double v = sigma_step ? d.value(x.r, {OverlapKind::Within1, l, k + 1}) : d.value(x.r, {OverlapKind::Within2, l, k + 1});
          if (!(sigma_step ? ev.A1 : ev.A2).contains(std::abs(v))) miss += 1.0;
        }
      }
      ind(i, static_cast<Eigen::Index>(4 + 2 * s)) = in_e;
      ind(i, static_cast<Eigen::Index>(5 + 2 * s)) = miss;
    }
  }

  auto margin_of = [&](const std::vector<char>& keep, double* lhs, double* rhs) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(4);
    double m = 0.0;
    for (Eigen::Index i = 0; i < R; ++i)
      if (keep[static_cast<std::size_t>(i)]) {
        sums += ind.row(i).head(4).transpose();
        m += 1.0;
      }
    sums /= m;
    const double mu12 = sums[0], mu1 = sums[1], mu2 = sums[2];
    double r = mu12;
    if (form == Lemma3Form::Eq1) r *= std::pow(mu1, n);
    if (form == Lemma3Form::Eq2) r *= std::pow(mu2, n - 1);
    if (form == Lemma3Form::Eq3) r *= std::pow(mu1 * mu2, n - 1);
    if (lhs) *lhs = sums[3];
    if (rhs) *rhs = r;
    return sums[3] - r;
  };
  const std::vector<char> all(static_cast<std::size_t>(R), 1);
  margin_of(all, &rep.lhs, &rep.rhs);

  // GG step defects.
  const Eigen::RowVectorXd mean = ind.colwise().mean();
  for (std::size_t s = 0; s < S; ++s) {
    const bool sigma_step = path[s + 1].first > path[s].first;
    const double miss_rate = 1.0 - (sigma_step ? mean[1] : mean[2]);
    rep.defects.push_back(mean[static_cast<Eigen::Index>(5 + 2 * s)] - miss_rate * mean[static_cast<Eigen::Index>(4 + 2 * s)]);
  }
  const double worst = rep.defects.empty() ? 0.0 : std::abs(*std::max_element(rep.defects.begin(), rep.defects.end(),
                                                                            [](double a, double b) { return std::abs(a) < std::abs(b); }));
  rep.margin = jackknife(block_count(R), [&](const std::vector<char>& keep) {
    return margin_of(expand_blocks(keep, R), nullptr, nullptr);
  });
  rep.slack = 4.0 * rep.margin.se + static_cast<double>(S) * gg_tolerance;
  if (worst > gg_tolerance) {
    rep.reason = "GG step defect " + std::to_string(worst) + " exceeds tolerance";
    return rep;
  }
  rep.status = rep.margin.value >= -rep.slack ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

}  // namespace pspin

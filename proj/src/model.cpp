#include "pspin/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pspin/errors.hpp"

namespace pspin {

IndexSetPattern IndexSetPattern::finite(std::vector<int> degrees) {
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
  if (!degrees.empty() && degrees.front() < 1) throw InvalidSpec("index set degrees must be >= 1");
  IndexSetPattern p;
  p.kind_ = Kind::Finite;
  p.degrees_ = std::move(degrees);
  return p;
}

IndexSetPattern IndexSetPattern::evens(int start) {
  IndexSetPattern p;
  p.kind_ = Kind::Evens;
  p.start_ = std::max(2, start % 2 == 0 ? start : start + 1);
  return p;
}

IndexSetPattern IndexSetPattern::odds(int start) {
  IndexSetPattern p;
  p.kind_ = Kind::Odds;
  p.start_ = std::max(1, start % 2 != 0 ? start : start + 1);
  return p;
}

IndexSetPattern IndexSetPattern::all(int start) {
  IndexSetPattern p;
  p.kind_ = Kind::All;
  p.start_ = std::max(1, start);
  return p;
}

bool IndexSetPattern::contains(int p) const {
  switch (kind_) {
    case Kind::Finite:
      return std::binary_search(degrees_.begin(), degrees_.end(), p);
    case Kind::Evens:
      return p >= start_ && p % 2 == 0;
    case Kind::Odds:
      return p >= start_ && p % 2 != 0;
    case Kind::All:
      return p >= start_;
  }
  return false;
}

std::vector<int> IndexSetPattern::members_up_to(int horizon) const {
  std::vector<int> out;
  if (kind_ == Kind::Finite) {
    for (int p : degrees_)
      if (p <= horizon) out.push_back(p);
    return out;
  }
  const int step = kind_ == Kind::All ? 1 : 2;
  for (int p = start_; p <= horizon; p += step) out.push_back(p);
  return out;
}

std::string IndexSetPattern::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Finite: {
      os << '{';
      for (std::size_t i = 0; i < degrees_.size(); ++i) os << (i ? "," : "") << degrees_[i];
      os << '}';
      break;
    }
    case Kind::Evens:
      os << "evens>=" << start_;
      break;
    case Kind::Odds:
      os << "odds>=" << start_;
      break;
    case Kind::All:
      os << "all>=" << start_;
      break;
  }
  return os.str();
}

bool is_subset(const IndexSetPattern& a, const IndexSetPattern& b) {
  using K = IndexSetPattern::Kind;
  if (a.kind() == K::Finite)
    return std::all_of(a.degrees().begin(), a.degrees().end(), [&](int p) { return b.contains(p); });
  if (b.kind() == K::Finite) return false;
  if (b.kind() == K::All) return a.start() >= b.start();
  if (a.kind() != b.kind()) return false;
  return a.start() >= b.start();
}

bool muntz_dense(const IndexSetPattern& pattern) { return !pattern.is_finite(); }

MixedSpinParams::MixedSpinParams(const std::map<int, double>& b, std::optional<IndexSetPattern> support)
    : symbolic_support(std::move(support)) {
  for (const auto& [p, v] : b) {
    if (p < 1) throw InvalidSpec("degree must be >= 1, got " + std::to_string(p));
    if (!std::isfinite(v)) throw InvalidSpec("non-finite beta for degree " + std::to_string(p));
    if (v != 0.0) betas[p] = v;
  }
}

double MixedSpinParams::beta(int p) const {
  auto it = betas.find(p);
  return it == betas.end() ? 0.0 : it->second;
}

std::vector<int> MixedSpinParams::support() const {
  std::vector<int> out;
  out.reserve(betas.size());
  for (const auto& kv : betas) out.push_back(kv.first);
  return out;
}

MixedSpinParams MixedSpinParams::scaled(double s) const {
  MixedSpinParams out = *this;
  out.betas.clear();
  for (const auto& [p, v] : betas)
    if (v * s != 0.0) out.betas[p] = v * s;
  return out;
}

double CouplingSpec::t(int p) const {
  auto it = correlations.find(p);
  return it == correlations.end() ? default_correlation : it->second;
}

std::vector<int> CoupledModelSpec::degrees() const {
  std::vector<int> out = params1.support();
  for (int p : params2.support()) out.push_back(p);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void CoupledModelSpec::validate() const {
  for (const MixedSpinParams* params : {&params1, &params2})
    for (const auto& [p, v] : params->betas) {
      if (p < 1) throw InvalidSpec("degree must be >= 1");
      if (!std::isfinite(v)) throw InvalidSpec("non-finite beta");
    }
  auto check_t = [](double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidSpec("correlation t_p must lie in [0,1]");
  };
  check_t(coupling.default_correlation);
  for (const auto& [p, t] : coupling.correlations) {
    if (p < 1) throw InvalidSpec("correlation degree must be >= 1");
    check_t(t);
  }
}

IndexSets index_sets(const MixedSpinParams& params) {
  std::vector<int> even, odd, all;
  for (const auto& [p, v] : params.betas) {
    if (v == 0.0) continue;
    all.push_back(p);
    (p % 2 == 0 ? even : odd).push_back(p);
  }
  return {IndexSetPattern::finite(all), IndexSetPattern::finite(even), IndexSetPattern::finite(odd)};
}

ConditionReport ConditionReport::swapped() const {
  ConditionReport r = *this;
  std::swap(r.c1e, r.c2e);
  std::swap(r.c1o, r.c2o);
  return r;
}

namespace {

enum class Parity { Even, Odd };

bool has_parity(int p, Parity parity) { return (p % 2 == 0) == (parity == Parity::Even); }

const IndexSetPattern& parity_set(const IndexSets& s, Parity parity) {
  return parity == Parity::Even ? s.even : s.odd;
}

std::optional<Parity> witness_parity(const IndexSetPattern& w) {
  using K = IndexSetPattern::Kind;
  switch (w.kind()) {
    case K::Evens:
      return Parity::Even;
    case K::Odds:
      return Parity::Odd;
    case K::All:
      return std::nullopt;
    case K::Finite: {
      if (w.degrees().empty()) return std::nullopt;
      const bool even = w.degrees().front() % 2 == 0;
      for (int p : w.degrees())
        if ((p % 2 == 0) != even) return std::nullopt;
      return even ? Parity::Even : Parity::Odd;
    }
  }
  return std::nullopt;
}

bool same_ratio(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Ratio clause for one dense-subset candidate A. Returns a witness when the clause holds.
std::optional<ConditionWitness> try_dense_subset(const MixedSpinParams& own, const MixedSpinParams& other,
                                                 const IndexSetPattern& own_set, const IndexSetPattern& a) {
  if (!muntz_dense(a)) return std::nullopt;
  const std::vector<int> visible = a.members_up_to(own.horizon());
  if (visible.empty()) return std::nullopt;
  for (int p : visible)
    if (!own_set.contains(p)) return std::nullopt;
  const double tau = other.beta(visible.front()) / own.beta(visible.front());
  for (int p : visible)
    if (!same_ratio(other.beta(p) / own.beta(p), tau)) return std::nullopt;
  for (int p0 : own_set.degrees()) {
    if (a.contains(p0)) continue;
    if (!same_ratio(other.beta(p0) / own.beta(p0), tau)) {
      ConditionWitness w;
      w.holds = true;
      w.dense_subset = a;
      w.tau = tau;
      w.p0 = p0;
      return w;
    }
  }
  return std::nullopt;
}

void validate_witness(const MixedSpinParams& own, const IndexSetPattern& own_set, const IndexSetPattern& a) {
  if (a.is_finite()) {
    if (!is_subset(a, own_set)) throw InvalidWitness("witness " + a.to_string() + " is not a subset of " + own_set.to_string());
    return;
  }
  if (!own.symbolic_support || !is_subset(a, *own.symbolic_support))
    throw InvalidWitness("witness " + a.to_string() + " is not contained in the declared support");
  for (int p : a.members_up_to(own.horizon()))
    if (!own_set.contains(p))
      throw InvalidWitness("witness member " + std::to_string(p) + " has a zero coefficient");
}

ConditionWitness decide_clause(const MixedSpinParams& own, const MixedSpinParams& other, Parity parity,
                               const std::optional<IndexSetPattern>& witness) {
  const IndexSets own_sets = index_sets(own);
  const IndexSets other_sets = index_sets(other);
  const IndexSetPattern& own_set = parity_set(own_sets, parity);
  const IndexSetPattern& other_set = parity_set(other_sets, parity);

  for (int p : other_set.degrees()) {
    if (!own_set.contains(p)) {
      ConditionWitness w;
      w.holds = true;
      w.difference_degree = p;
      return w;
    }
  }

  std::vector<IndexSetPattern> candidates;
  if (witness && witness_parity(*witness) == parity) {
    validate_witness(own, own_set, *witness);
    candidates.push_back(*witness);
  }
  if (own.symbolic_support) {
    for (int s : own_set.degrees()) {
      IndexSetPattern tail = parity == Parity::Even ? IndexSetPattern::evens(s) : IndexSetPattern::odds(s);
      if (is_subset(tail, *own.symbolic_support)) candidates.push_back(tail);
    }
  }
  for (const auto& a : candidates)
    if (auto w = try_dense_subset(own, other, own_set, a)) return *w;
  return {};
}

std::optional<int> corrp_degree(const CoupledModelSpec& spec, Parity parity) {
  for (const auto& [p, v] : spec.params1.betas) {
    if (!has_parity(p, parity)) continue;
    if (spec.params2.beta(p) != 0.0 && spec.coupling.t(p) < 1.0) return p;
  }
  return std::nullopt;
}

}  // namespace

ConditionReport check_chaos_conditions(const CoupledModelSpec& spec, const std::optional<IndexSetPattern>& c0_witness_1,
                                       const std::optional<IndexSetPattern>& c0_witness_2) {
  spec.validate();
  for (const auto* w : {&c0_witness_1, &c0_witness_2})
    if (*w && !witness_parity(**w)) throw InvalidWitness("witness " + (*w)->to_string() + " mixes parities");

  ConditionReport r;
  r.corrp_even = corrp_degree(spec, Parity::Even);
  r.corrp_odd = corrp_degree(spec, Parity::Odd);
  r.c1e = decide_clause(spec.params1, spec.params2, Parity::Even, c0_witness_1);
  r.c1o = decide_clause(spec.params1, spec.params2, Parity::Odd, c0_witness_1);
  r.c2e = decide_clause(spec.params2, spec.params1, Parity::Even, c0_witness_2);
  r.c2o = decide_clause(spec.params2, spec.params1, Parity::Odd, c0_witness_2);
  r.co = r.c1o.holds && r.c2o.holds;
  r.ce = (r.c1e.holds || r.c1o.holds) && (r.c2e.holds || r.c2o.holds);
  return r;
}

}  // namespace pspin

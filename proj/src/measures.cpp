#include "pspin/measures.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "pspin/errors.hpp"
#include "pspin/overlaps.hpp"

namespace pspin {

EmpiricalMeasure::EmpiricalMeasure(Eigen::VectorXd atoms, Eigen::VectorXd weights, double lo, double hi)
    : lo_(lo), hi_(hi) {
  if (atoms.size() != weights.size()) throw DimensionMismatch("atoms and weights differ in length");
  if (atoms.size() == 0) throw InvalidSpec("a measure needs at least one atom");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(atoms.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return atoms[a] < atoms[b]; });
  std::vector<double> xs, ws;
  for (auto k : order) {
    const double x = atoms[k], w = weights[k];
    if (!std::isfinite(x) || !std::isfinite(w)) throw InvalidSpec("non-finite atom or weight");
    if (w < -1e-14) throw InvalidSpec("negative weight");
    if (x < lo - 1e-12 || x > hi + 1e-12) throw InvalidSpec("atom outside the stated interval");
    if (!xs.empty() && x == xs.back())
      ws.back() += std::max(0.0, w);
    else {
      xs.push_back(x);
      ws.push_back(std::max(0.0, w));
    }
  }
  atoms_ = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  weights_ = Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  if (std::abs(weights_.sum() - 1.0) > 1e-10) throw InvalidSpec("weights do not sum to one");
}

EmpiricalMeasure EmpiricalMeasure::dirac(double atom, double lo, double hi) {
  return EmpiricalMeasure(Eigen::VectorXd::Constant(1, atom), Eigen::VectorXd::Ones(1), lo, hi);
}

EmpiricalMeasure EmpiricalMeasure::from_samples(std::span<const double> samples, double lo, double hi) {
  if (samples.empty()) throw InvalidSpec("no samples");
  Eigen::VectorXd atoms = Eigen::Map<const Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  return EmpiricalMeasure(std::move(atoms), std::move(weights), lo, hi);
}

EmpiricalMeasure EmpiricalMeasure::absolute() const {
  return EmpiricalMeasure(atoms_.cwiseAbs(), weights_, 0.0, std::max(std::abs(lo_), std::abs(hi_)));
}

double EmpiricalMeasure::mass(double a, double b, bool closed_left, bool closed_right) const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < atoms_.size(); ++k) {
    const double x = atoms_[k];
    const bool left = closed_left ? x >= a : x > a;
    const bool right = closed_right ? x <= b : x < b;
    if (left && right) m += weights_[k];
  }
  return m;
}

double EmpiricalMeasure::cdf(double x) const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < atoms_.size() && atoms_[k] <= x; ++k) m += weights_[k];
  return m;
}

double EmpiricalMeasure::mean() const { return atoms_.dot(weights_); }

std::string EmpiricalMeasure::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "atom,weight\n";
  for (Eigen::Index k = 0; k < atoms_.size(); ++k) os << atoms_[k] << ',' << weights_[k] << '\n';
  return os.str();
}

nlohmann::json EmpiricalMeasure::to_json() const {
  return {{"lo", lo_},
          {"hi", hi_},
          {"atoms", std::vector<double>(atoms_.data(), atoms_.data() + atoms_.size())},
          {"weights", std::vector<double>(weights_.data(), weights_.data() + weights_.size())}};
}

EmpiricalMeasure EmpiricalMeasure::from_json(const nlohmann::json& j) {
  auto a = j.at("atoms").get<std::vector<double>>();
  auto w = j.at("weights").get<std::vector<double>>();
  return EmpiricalMeasure(Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())),
                          Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())), j.at("lo"), j.at("hi"));
}

EmpiricalMeasure average_measures(std::span<const EmpiricalMeasure> measures) {
  if (measures.empty()) throw InvalidSpec("no measures to average");
  Eigen::Index total = 0;
  for (const auto& m : measures) total += m.size();
  Eigen::VectorXd atoms(total), weights(total);
  Eigen::Index k = 0;
  for (const auto& m : measures) {
    atoms.segment(k, m.size()) = m.atoms();
    weights.segment(k, m.size()) = m.weights() / static_cast<double>(measures.size());
    k += m.size();
  }
  return EmpiricalMeasure(atoms, weights, measures.front().lo(), measures.front().hi());
}

namespace {

// Walks the merged atom sets of two measures in ascending order.
template <typename Fn>
void merged_walk(const EmpiricalMeasure& a, const EmpiricalMeasure& b, Fn&& fn) {
  Eigen::Index i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double xa = i < a.size() ? a.atoms()[i] : INFINITY;
    const double xb = j < b.size() ? b.atoms()[j] : INFINITY;
    const double x = std::min(xa, xb);
    const double wa = std::abs(xa - x) <= 1e-12 ? a.weights()[i++] : 0.0;
    const double wb = std::abs(xb - x) <= 1e-12 ? b.weights()[j++] : 0.0;
    fn(wa, wb);
  }
}

}  // namespace

double total_variation(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  double tv = 0.0;
  merged_walk(a, b, [&](double wa, double wb) { tv += std::abs(wa - wb); });
  return 0.5 * tv;
}

double kolmogorov_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  double fa = 0.0, fb = 0.0, d = 0.0;
  merged_walk(a, b, [&](double wa, double wb) {
    fa += wa;
    fb += wb;
    d = std::max(d, std::abs(fa - fb));
  });
  return d;
}

double kolmogorov_to_uniform(const EmpiricalMeasure& a) {
  double f = 0.0, d = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double x = std::clamp(a.atoms()[k], 0.0, 1.0);
    d = std::max(d, std::abs(f - x));
    f += a.weights()[k];
    d = std::max(d, std::abs(f - x));
  }
  return d;
}

Eigen::VectorXd moments_of(const EmpiricalMeasure& measure, std::span<const int> powers) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(powers.size()));
  for (std::size_t k = 0; k < powers.size(); ++k) {
    if (powers[k] < 1) throw InvalidSpec("moment powers must be >= 1");
    m[static_cast<Eigen::Index>(k)] = measure.weights().dot(measure.atoms().array().pow(powers[k]).matrix());
  }
  return m;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

ParisiEstimate invert_moments(std::span<const double> moments, std::span<const int> powers, const InversionOptions& options) {
  if (moments.size() != powers.size()) throw DimensionMismatch("moments and powers differ in length");
  if (powers.size() < 2) throw InvalidSpec("moment inversion needs at least two powers");
  if (options.grid < 51) throw InvalidSpec("moment inversion needs a grid of at least 51 points");

  const Eigen::Index K = options.grid;
  const auto P = static_cast<Eigen::Index>(powers.size());
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(K, 0.0, 1.0);
  Eigen::MatrixXd A(P, K);
  for (Eigen::Index r = 0; r < P; ++r) {
    if (powers[static_cast<std::size_t>(r)] < 1) throw InvalidSpec("moment powers must be >= 1");
    A.row(r) = grid.array().pow(powers[static_cast<std::size_t>(r)]).matrix().transpose();
  }
  const Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(moments.data(), P);

  struct Run {
    Eigen::VectorXd w;
    int iterations = 0;
    bool converged = false;
  };
  // FISTA with a monotone restart: a step that raises the objective resets the momentum
  // and is replaced by a plain projected-gradient step from the current iterate.
  auto fista = [&](const Eigen::MatrixXd& B, const Eigen::VectorXd& b, Eigen::VectorXd w, int budget) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B * B.transpose(), Eigen::EigenvaluesOnly);
    const double L = 2.0 * eig.eigenvalues().maxCoeff();
    auto objective = [&](const Eigen::VectorXd& v) { return (B * v - b).squaredNorm(); };
    auto gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return 2.0 * B.transpose() * (B * v - b); };
    Run run;
    Eigen::VectorXd y = w;
    double f = objective(w), t = 1.0;
    for (; run.iterations < budget; ++run.iterations) {
      Eigen::VectorXd next = project_to_simplex(y - gradient(y) / L);
      double f_next = objective(next);
      if (f_next > f) {
        t = 1.0;
        next = project_to_simplex(w - gradient(w) / L);
        f_next = objective(next);
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * (next - w);
      const double decrease = f - f_next;
      w = std::move(next);
      t = t_next;
      const double previous = f;
      f = std::min(f, f_next);
      if (f <= 1e-30 || (decrease >= 0.0 && decrease <= options.tolerance * previous && decrease <= 1e-20)) {
        run.converged = true;
        ++run.iterations;
        break;
      }
    }
    run.w = std::move(w);
    return run;
  };

  // Monomial rows are nearly collinear. A first pass on whitened rows (same solutions for
  // consistent moments) gets close quickly; the second pass minimizes the stated objective.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::Index keep = 0;
  while (keep < sv.size() && sv[keep] > 1e-10 * sv[0]) ++keep;
  const Eigen::MatrixXd T = sv.head(keep).cwiseInverse().asDiagonal() * svd.matrixU().leftCols(keep).transpose();
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  const Run first = fista(T * A, T * m, start, options.max_iterations / 2);
  const Run second = fista(A, m, first.w, options.max_iterations - first.iterations);
  auto objective = [&](const Eigen::VectorXd& v) { return (A * v - m).squaredNorm(); };
  ParisiEstimate out;
  out.converged = second.converged;
  const int it = first.iterations + second.iterations;
  const Eigen::VectorXd w = second.w;
  out.iterations = it;
  out.measure = EmpiricalMeasure(grid, w / w.sum(), 0.0, 1.0);
  out.moment_residual = std::sqrt(objective(w));
  out.powers_used.assign(powers.begin(), powers.end());
  Eigen::JacobiSVD<Eigen::MatrixXd> rank(A);
  rank.setThreshold(1e-12);
  out.null_space_dim = static_cast<int>(K - rank.rank());
  out.c = inf_support(out.measure, options.mass_tol);
  return out;
}

double inf_support(const EmpiricalMeasure& measure, double mass_tol) {
  if (!(mass_tol > 0.0 && mass_tol < 0.5)) throw InvalidSpec("mass_tol must lie in (0, 0.5)");
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < measure.size(); ++k) {
    cumulative += measure.weights()[k];
    if (cumulative > mass_tol) return measure.atoms()[k];
  }
  return measure.atoms()[measure.size() - 1];
}

namespace {

struct LawSummary {
  double abs_mean = 0.0, mean = 0.0, second = 0.0, third = 0.0;
  std::vector<double> tails;
};

ChaosStats assemble(const std::vector<LawSummary>& laws, std::span<const double> thresholds) {
  ChaosStats out;
  out.disorder_samples = static_cast<int>(laws.size());
  std::vector<double> we, wo, buf(laws.size());
  for (const auto& s : laws) {
    we.push_back(s.second - s.abs_mean * s.abs_mean);
    wo.push_back(s.second - s.mean * s.mean);
  }
  out.w_even = mean_se(we);
  out.w_odd = mean_se(wo);
  for (std::size_t c = 0; c < thresholds.size(); ++c) {
    for (std::size_t k = 0; k < laws.size(); ++k) buf[k] = laws[k].tails[c];
    out.tail[thresholds[c]] = mean_se(buf);
  }
  for (int power = 1; power <= 3; ++power) {
    for (std::size_t k = 0; k < laws.size(); ++k)
      buf[k] = power == 1 ? laws[k].mean : power == 2 ? laws[k].second : laws[k].third;
    out.moments.push_back(mean_se(buf));
  }
  return out;
}

LawSummary summarize(const EmpiricalMeasure& law, std::span<const double> thresholds) {
  LawSummary s;
  const auto& x = law.atoms().array();
  const auto& w = law.weights();
  s.abs_mean = w.dot(x.abs().matrix());
  s.mean = w.dot(x.matrix());
  s.second = w.dot(x.square().matrix());
  s.third = w.dot(x.cube().matrix());
  for (double c : thresholds) s.tails.push_back(law.mass(c, INFINITY, false, true) + law.mass(-INFINITY, -c, true, false));
  return s;
}

// Per-sample pooled cross overlaps -> running sums over a sample range.
LawSummary summarize_samples(const OverlapSampleArray& data, std::span<const double> thresholds, Eigen::Index begin,
                             Eigen::Index end, const std::vector<char>* keep_batches = nullptr, Eigen::Index batch_len = 0) {
  LawSummary s;
  s.tails.assign(thresholds.size(), 0.0);
  double count = 0.0;
  for (Eigen::Index r = begin; r < end; ++r) {
    if (keep_batches && !(*keep_batches)[static_cast<std::size_t>((r - begin) / batch_len)]) continue;
    for (Eigen::Index c = 0; c < data.cross.cols(); ++c) {
      const double x = data.cross(r, c);
      s.abs_mean += std::abs(x);
      s.mean += x;
      s.second += x * x;
      s.third += x * x * x;
      for (std::size_t t = 0; t < thresholds.size(); ++t)
        if (std::abs(x) > thresholds[t]) s.tails[t] += 1.0;
      count += 1.0;
    }
  }
  if (count == 0.0) return s;
  s.abs_mean /= count;
  s.mean /= count;
  s.second /= count;
  s.third /= count;
  for (auto& t : s.tails) t /= count;
  return s;
}

}  // namespace

ChaosStats chaos_statistics(std::span<const EmpiricalMeasure> per_disorder_laws, std::span<const double> thresholds) {
  if (per_disorder_laws.empty()) throw InvalidSpec("chaos statistics need at least one disorder sample");
  std::vector<LawSummary> laws;
  for (const auto& law : per_disorder_laws) laws.push_back(summarize(law, thresholds));
  return assemble(laws, thresholds);
}

ChaosStats chaos_statistics(std::span<const OverlapSampleArray> per_disorder_samples, std::span<const double> thresholds) {
  if (per_disorder_samples.empty()) throw InvalidSpec("chaos statistics need at least one disorder sample");
  if (per_disorder_samples.size() > 1) {
    std::vector<LawSummary> laws;
    for (const auto& d : per_disorder_samples) laws.push_back(summarize_samples(d, thresholds, 0, d.samples()));
    return assemble(laws, thresholds);
  }
  // Single disorder: jackknife over batches of the time series.
  const auto& d = per_disorder_samples.front();
  const int batches = static_cast<int>(std::min<Eigen::Index>(32, d.samples()));
  const Eigen::Index len = d.samples() / std::max(1, batches);
  const Eigen::Index used = len * batches;
  auto stat = [&](auto pick) {
    return jackknife(batches, [&](const std::vector<char>& keep) { return pick(summarize_samples(d, thresholds, 0, used, &keep, len)); });
  };
  ChaosStats out;
  out.disorder_samples = 1;
  out.w_even = stat([](const LawSummary& s) { return s.second - s.abs_mean * s.abs_mean; });
  out.w_odd = stat([](const LawSummary& s) { return s.second - s.mean * s.mean; });
  for (std::size_t c = 0; c < thresholds.size(); ++c)
    out.tail[thresholds[c]] = stat([c](const LawSummary& s) { return s.tails[c]; });
  out.moments.push_back(stat([](const LawSummary& s) { return s.mean; }));
  out.moments.push_back(stat([](const LawSummary& s) { return s.second; }));
  out.moments.push_back(stat([](const LawSummary& s) { return s.third; }));
  return out;
}

}  // namespace pspin

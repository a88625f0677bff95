#include "pspin/overlaps.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "pspin/errors.hpp"

namespace pspin {

std::string to_string(const OverlapId& id) {
  const char* name = id.kind == OverlapKind::Within1 ? "R1" : id.kind == OverlapKind::Within2 ? "R2" : "R";
  return std::string(name) + "_" + std::to_string(id.l) + "," + std::to_string(id.lp);
}

double OverlapSampleArray::value(Eigen::Index sample, const OverlapId& id) const {
  if (id.l < 1 || id.lp < 1 || id.l > n || id.lp > n)
    throw InsufficientReplicas("overlap " + to_string(id) + " needs more than " + std::to_string(n) + " replicas");
  const Eigen::Index col = (id.l - 1) * n + (id.lp - 1);
  switch (id.kind) {
    case OverlapKind::Within1:
      return within1(sample, col);
    case OverlapKind::Within2:
      return within2(sample, col);
    case OverlapKind::Cross:
      return cross(sample, col);
  }
  return 0.0;
}

Eigen::Index OverlapSampleArray::energy_column(int p, int which) const {
  for (std::size_t k = 0; k < energy_degrees.size(); ++k)
    if (energy_degrees[k] == p) return static_cast<Eigen::Index>(4 * k) + which;
  throw DimensionMismatch("no recorded energies for degree " + std::to_string(p));
}

namespace {

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

void set_row(Eigen::MatrixXd& m, Eigen::Index r, const std::vector<double>& v) {
  if (static_cast<Eigen::Index>(v.size()) != m.cols()) throw Error("malformed overlap record");
  for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[static_cast<std::size_t>(c)];
}

}  // namespace

void write_jsonl(const OverlapSampleArray& data, std::ostream& out) {
  nlohmann::json head = {{"record", "overlap_samples"},
                         {"N", data.N},
                         {"n", data.n},
                         {"seed", data.seed},
                         {"disorder_index", data.disorder_index},
                         {"samples", data.samples()},
                         {"energy_degrees", data.energy_degrees},
                         {"metadata", data.metadata}};
  out << head.dump() << '\n';
  for (Eigen::Index s = 0; s < data.samples(); ++s) {
    nlohmann::json row = {{"record", "overlap_sample"},
                          {"index", s},
                          {"R1", row_of(data.within1, s)},
                          {"R2", row_of(data.within2, s)},
                          {"R", row_of(data.cross, s)}};
    if (data.energies.rows() > 0) row["energies"] = row_of(data.energies, s);
    out << row.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
  }
}

OverlapSampleArray read_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty overlap stream");
  const auto head = nlohmann::json::parse(line);
  if (head.at("record") != "overlap_samples") throw Error("missing overlap_samples header");
  OverlapSampleArray data;
  data.N = head.at("N");
  data.n = head.at("n");
  data.seed = head.at("seed");
  data.disorder_index = head.at("disorder_index");
  data.energy_degrees = head.at("energy_degrees").get<std::vector<int>>();
  data.metadata = head.value("metadata", nlohmann::json::object());
  const Eigen::Index rows = head.at("samples");
  const Eigen::Index cols = static_cast<Eigen::Index>(data.n) * data.n;
  data.within1.resize(rows, cols);
  data.within2.resize(rows, cols);
  data.cross.resize(rows, cols);
  if (!data.energy_degrees.empty()) data.energies.resize(rows, static_cast<Eigen::Index>(4 * data.energy_degrees.size()));
  for (Eigen::Index s = 0; s < rows; ++s) {
    if (!std::getline(in, line)) throw Error("truncated overlap stream");
    const auto row = nlohmann::json::parse(line);
    set_row(data.within1, s, row.at("R1").get<std::vector<double>>());
    set_row(data.within2, s, row.at("R2").get<std::vector<double>>());
    set_row(data.cross, s, row.at("R").get<std::vector<double>>());
    if (data.energies.rows() > 0) set_row(data.energies, s, row.at("energies").get<std::vector<double>>());
  }
  return data;
}

}  // namespace pspin

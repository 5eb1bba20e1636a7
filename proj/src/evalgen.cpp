#include "dibc/evalgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "dibc/distributions.hpp"
#include "dibc/error.hpp"

namespace dibc {
namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

SyntheticSpec SyntheticSpec::standard() {
  SyntheticSpec spec;
  spec.means.resize(2, 8);
  spec.means << 6, 4, 8, 22.5, 20, 22, 22, 6.5,  //
      1.5, 6, 6, 1.5, 8, 31, 31, 29;
  spec.covariances = {mat2(4.84, 0, 0, 2.89),     mat2(3.61, 5.05, 5.05, 14.44),
                      mat2(3.61, -5.05, -5.05, 14.44), mat2(12.25, 0, 0, 3.24),
                      mat2(3.24, 0, 0, 12.25),    mat2(14.44, 0, 0, 2.25),
                      mat2(2.25, 0, 0, 17.64),    mat2(2.25, 4.20, 4.20, 16.00)};
  spec.cluster_weights = Vector::Constant(4, 0.25);
  spec.subcomponent_weights = {Vector::Constant(3, 1.0 / 3.0), Vector::Constant(2, 0.5),
                               Vector::Constant(2, 0.5), Vector::Constant(1, 1.0)};
  spec.component_cluster = {1, 1, 1, 2, 2, 3, 3, 4};
  return spec;
}

LabeledPoints generate_synthetic(int n, std::uint64_t seed, const SyntheticSpec& spec) {
  if (n < 1) throw ParameterError("synthetic sample size must be positive");
  // Components of each cluster, in order.
  std::vector<std::vector<int>> members(spec.cluster_weights.size());
  for (int j = 0; j < static_cast<int>(spec.component_cluster.size()); ++j) {
    members[spec.component_cluster[j] - 1].push_back(j);
  }
  std::vector<Matrix> factors;
  for (const auto& cov : spec.covariances) factors.push_back(cholesky_lower(cov, "synthetic covariance"));

  auto pick = [](const Vector& w, Rng& rng) {
    double u = rng.uniform() * w.sum();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (u < w[i]) return static_cast<int>(i);
      u -= w[i];
    }
    return static_cast<int>(w.size() - 1);
  };

  Rng rng(seed);
  LabeledPoints out;
  out.points.resize(spec.means.rows(), n);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int cluster = pick(spec.cluster_weights, rng);
    const int component = members[cluster][pick(spec.subcomponent_weights[cluster], rng)];
    out.points.col(i) = stats::sample_mvn_cholesky(spec.means.col(component), factors[component], rng);
    out.labels[i] = cluster + 1;
  }
  return out;
}

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterError("labelings differ in length");
  Contingency t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++t.joint[{a[i], b[i]}];
    ++t.rows[a[i]];
    ++t.cols[b[i]];
  }
  t.n = static_cast<std::int64_t>(a.size());
  return t;
}

PairCounts pair_counts(std::span<const int> truth, std::span<const int> pred) {
  const auto t = contingency(truth, pred);
  std::int64_t together_both = 0, together_truth = 0, together_pred = 0;
  for (const auto& [key, v] : t.joint) together_both += choose2(v);
  for (const auto& [key, v] : t.rows) together_truth += choose2(v);
  for (const auto& [key, v] : t.cols) together_pred += choose2(v);
  PairCounts p;
  p.tp = together_both;
  p.fp = together_pred - together_both;
  p.fn = together_truth - together_both;
  p.tn = choose2(t.n) - p.tp - p.fp - p.fn;
  return p;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const int rows = static_cast<int>(weight.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(weight.front().size());
  if (rows > cols) {
    std::vector<std::vector<double>> transposed(cols, std::vector<double>(rows));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) transposed[j][i] = weight[i][j];
    const auto col_to_row = max_weight_assignment(transposed);
    std::vector<int> out(rows, -1);
    for (int j = 0; j < cols; ++j) {
      if (col_to_row[j] >= 0) out[col_to_row[j]] = j;
    }
    return out;
  }
  // Hungarian method with potentials on costs = max - weight, rows <= cols.
  double hi = 0.0;
  for (const auto& r : weight)
    for (double w : r) hi = std::max(hi, w);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = (hi - weight[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

LabelMap optimal_label_map(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ParameterError("labelings differ in length");
  if (truth.empty()) throw ParameterError("label map needs at least one observation");
  const auto t = contingency(pred, truth);
  std::vector<int> pred_labels, truth_labels;
  for (const auto& [k, v] : t.rows) pred_labels.push_back(k);
  for (const auto& [k, v] : t.cols) truth_labels.push_back(k);
  std::vector<std::vector<double>> weight(pred_labels.size(), std::vector<double>(truth_labels.size(), 0.0));
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    for (std::size_t j = 0; j < truth_labels.size(); ++j) {
      const auto it = t.joint.find({pred_labels[i], truth_labels[j]});
      if (it != t.joint.end()) weight[i][j] = static_cast<double>(it->second);
    }
  }
  const auto assignment = max_weight_assignment(weight);
  LabelMap map;
  std::map<int, int> code;
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    if (assignment[i] >= 0) {
      map.pred_to_truth[pred_labels[i]] = truth_labels[assignment[i]];
      code[pred_labels[i]] = truth_labels[assignment[i]];
    } else {
      map.unknown.push_back(pred_labels[i]);
      code[pred_labels[i]] = -static_cast<int>(map.unknown.size());
    }
  }
  map.mapped.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    map.mapped[i] = code[pred[i]];
    if (map.mapped[i] == truth[i]) ++map.matches;
  }
  return map;
}

std::string mapped_label_name(int mapped) {
  return mapped < 0 ? "unknown" + std::to_string(-mapped) : std::to_string(mapped);
}

MetricsReport compute_metrics(std::span<const int> truth_in, std::span<const int> pred_in) {
  if (truth_in.size() != pred_in.size()) throw ParameterError("labelings differ in length");
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < truth_in.size(); ++i) {
    if (truth_in[i] == kUnlabeled) continue;
    truth.push_back(truth_in[i]);
    pred.push_back(pred_in[i]);
  }
  if (truth.empty()) throw ParameterError("no labeled observations to evaluate");

  MetricsReport r;
  r.label_map = optimal_label_map(truth, pred);
  r.accuracy = static_cast<double>(r.label_map.matches) / static_cast<double>(truth.size());

  r.pairs = pair_counts(truth, pred);
  const auto& p = r.pairs;
  r.precision = (p.tp + p.fp) > 0 ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 1.0;
  r.recall = (p.tp + p.fn) > 0 ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 1.0;
  r.f_measure = (r.precision + r.recall) > 0.0
                    ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                    : 0.0;

  const double index = static_cast<double>(p.tp);
  const double sum_truth = static_cast<double>(p.tp + p.fn);
  const double sum_pred = static_cast<double>(p.tp + p.fp);
  const double total = static_cast<double>(p.tp + p.fp + p.fn + p.tn);
  const double expected = total > 0.0 ? sum_truth * sum_pred / total : 0.0;
  const double maximum = 0.5 * (sum_truth + sum_pred);
  r.ari = maximum == expected ? 1.0 : (index - expected) / (maximum - expected);
  return r;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\"");
    const auto e = f.find_last_not_of(" \t\"");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

LabeledPoints load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto header = split_csv_line(line);
  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError(path + ": no column named '" + name + "'");
    return static_cast<int>(it - header.begin());
  };

  std::vector<int> data_cols;
  if (schema.columns.empty()) {
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (header[j] != schema.label_column) data_cols.push_back(j);
    }
  } else {
    for (const auto& c : schema.columns) data_cols.push_back(column_of(c));
  }
  if (data_cols.empty()) throw IoError(path + ": no data columns");
  const int label_col = schema.label_column.empty() ? -1 : column_of(schema.label_column);
  std::vector<char> log_flag(header.size(), 0);
  for (const auto& c : schema.log_columns) log_flag[column_of(c)] = 1;

  std::vector<double> values;
  LabeledPoints out;
  std::unordered_map<std::string, int> label_codes;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    for (int j : data_cols) {
      double v;
      if (!parse_double(fields[j], v)) {
        throw IoError(path + ":" + std::to_string(line_no) + ": column '" + header[j] +
                      "' is not numeric: '" + fields[j] + "'");
      }
      if (log_flag[j]) {
        if (v <= 0.0) {
          throw IoError(path + ":" + std::to_string(line_no) + ": column '" + header[j] +
                        "' must be positive for the log transform, got " + fields[j]);
        }
        v = std::log(v);
      }
      values.push_back(v);
    }
    if (label_col >= 0) {
      const auto& f = fields[label_col];
      int label = kUnlabeled;
      if (!f.empty() && f != "NA" && f != "nan") {
        int parsed = 0;
        const auto res = std::from_chars(f.data(), f.data() + f.size(), parsed);
        if (res.ec == std::errc() && res.ptr == f.data() + f.size()) {
          label = parsed;
        } else {
          const auto [it, fresh] = label_codes.emplace(f, static_cast<int>(label_codes.size()) + 1);
          label = it->second;
        }
      }
      out.labels.push_back(label);
    }
  }
  const auto d = static_cast<Eigen::Index>(data_cols.size());
  const auto n = static_cast<Eigen::Index>(values.size()) / d;
  if (n == 0) throw IoError(path + ": no data rows");
  out.points = Eigen::Map<const Matrix>(values.data(), d, n);
  return out;
}

void write_points_csv(const std::string& path, const Matrix& points, std::span<const int> labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < points.rows(); ++j) out << (j ? "," : "") << "x" << j + 1;
  if (!labels.empty()) out << ",label";
  out << '\n';
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (Eigen::Index j = 0; j < points.rows(); ++j) out << (j ? "," : "") << points(j, i);
    if (!labels.empty()) {
      out << ',';
      if (labels[static_cast<std::size_t>(i)] != kUnlabeled) out << labels[static_cast<std::size_t>(i)];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace dibc

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dibc/linalg.hpp"
#include "dibc/rng.hpp"

namespace dibc {

/// Label value marking a row without a ground-truth label.
inline constexpr int kUnlabeled = std::numeric_limits<int>::min();

/// Four-cluster benchmark in R^2 built from eight Gaussian components
/// (triangle, L, cross and ellipse shapes).
struct SyntheticSpec {
  Matrix means;                      ///< 2 x 8
  std::vector<Matrix> covariances;   ///< 8 of 2 x 2
  Vector cluster_weights;            ///< 4
  std::vector<Vector> subcomponent_weights;  ///< per cluster
  std::vector<int> component_cluster;        ///< component -> cluster id (1-based)

  static SyntheticSpec standard();
};

struct LabeledPoints {
  Matrix points;            ///< d x n
  std::vector<int> labels;  ///< 1-based cluster ids, or kUnlabeled
};

LabeledPoints generate_synthetic(int n, std::uint64_t seed,
                                 const SyntheticSpec& spec = SyntheticSpec::standard());

/// Sparse contingency table between two labelings.
struct Contingency {
  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> rows;  ///< first argument marginals
  std::map<int, std::int64_t> cols;  ///< second argument marginals
  std::int64_t n = 0;
};
Contingency contingency(std::span<const int> a, std::span<const int> b);

struct PairCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};
/// Pair counts from the contingency table: tp = pairs together in both,
/// fp = together only in `pred`, fn = together only in `truth`.
PairCounts pair_counts(std::span<const int> truth, std::span<const int> pred);

/// Mapping of predicted clusters onto truth classes maximizing matches.
/// Predicted clusters left without a class become unknown1, unknown2, ...
/// in order of their label; in `mapped` they are encoded as -1, -2, ...
struct LabelMap {
  std::map<int, int> pred_to_truth;
  std::vector<int> unknown;  ///< predicted labels coded as unknown, in order
  std::vector<int> mapped;   ///< pred relabeled through the map
  std::int64_t matches = 0;
};
LabelMap optimal_label_map(std::span<const int> truth, std::span<const int> pred);

/// Text form of a mapped label: the class id, or "unknownN".
std::string mapped_label_name(int mapped);

struct MetricsReport {
  double accuracy = 0.0;
  double ari = 0.0;
  double f_measure = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  PairCounts pairs;
  LabelMap label_map;
};

/// Accuracy on optimally mapped labels, pair-counting precision, recall and
/// F-measure, and the Hubert-Arabie adjusted Rand index. Rows whose truth is
/// kUnlabeled are dropped first.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> pred);

/// Rectangular assignment maximizing total weight; returns for every row the
/// assigned column or -1. Rows <= cols or rows > cols both allowed.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

struct CsvSchema {
  std::vector<std::string> columns;  ///< data columns by header name; empty = all but label
  std::string label_column;          ///< empty when the file has no labels
  std::vector<std::string> log_columns;  ///< columns to log-transform
};

LabeledPoints load_csv(const std::string& path, const CsvSchema& schema);

/// Writes a header "x1,...,xd[,label]" and one row per point.
void write_points_csv(const std::string& path, const Matrix& points, std::span<const int> labels);

}  // namespace dibc

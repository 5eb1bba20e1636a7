#pragma once

#include <vector>

#include "dibc/linalg.hpp"
#include "dibc/rng.hpp"

namespace dibc {

struct KMeansResult {
  Matrix centers;           ///< d x k
  std::vector<int> labels;  ///< zero-based
};

/// k-means++ seeding followed by at most `max_iters` Lloyd steps. Points are
/// columns. If there are fewer distinct points than k, surplus centers are
/// duplicates and stay empty.
KMeansResult kmeans(const Matrix& points, int k, int max_iters, Rng& rng);

/// k-means++ seed indices only.
std::vector<int> kmeanspp_seeds(const Matrix& points, int k, Rng& rng);

}  // namespace dibc

#include "dibc/kmeans.hpp"

#include <limits>

#include "dibc/error.hpp"

namespace dibc {

std::vector<int> kmeanspp_seeds(const Matrix& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.cols());
  if (n == 0 || k < 1) throw ParameterError("k-means++ needs points and k >= 1");
  std::vector<int> seeds{static_cast<int>(rng.below(static_cast<std::uint64_t>(n)))};
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) dist[i] = (points.col(i) - points.col(seeds[0])).squaredNorm();
  while (static_cast<int>(seeds.size()) < k) {
    double total = 0.0;
    for (double v : dist) total += v;
    int next = seeds.back();
    if (total > 0.0) {
      double u = rng.uniform() * total;
      next = n - 1;
      for (int i = 0; i < n; ++i) {
        if (u < dist[i]) {
          next = i;
          break;
        }
        u -= dist[i];
      }
    }
    seeds.push_back(next);
    for (int i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (points.col(i) - points.col(next)).squaredNorm());
    }
  }
  return seeds;
}

KMeansResult kmeans(const Matrix& points, int k, int max_iters, Rng& rng) {
  const auto seeds = kmeanspp_seeds(points, k, rng);
  const int n = static_cast<int>(points.cols());
  const auto d = points.rows();
  KMeansResult out;
  out.centers.resize(d, k);
  for (int j = 0; j < k; ++j) out.centers.col(j) = points.col(seeds[j]);
  out.labels.assign(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double dd = (points.col(i) - out.centers.col(j)).squaredNorm();
        if (dd < best_dist) {
          best_dist = dd;
          best = j;
        }
      }
      if (out.labels[i] != best) {
        out.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(d, k);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.col(out.labels[i]) += points.col(i);
      ++counts[out.labels[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) out.centers.col(j) = sums.col(j) / counts[j];
    }
  }
  return out;
}

}  // namespace dibc

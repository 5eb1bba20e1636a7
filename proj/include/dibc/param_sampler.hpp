#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dibc/model.hpp"
#include "dibc/rng.hpp"

namespace dibc {

/// Per-(k, l) counts, sums and sums of outer products under a fixed
/// allocation. Every (k, l) is present, empty ones as zeros.
struct FixedSuffStats {
  int K = 0, L = 0, d = 0;
  std::vector<std::int64_t> count;  ///< K*L, index k*L + l
  std::vector<Vector> sum;
  std::vector<Matrix> outer;

  static FixedSuffStats zeros(int K, int L, int d);
  [[nodiscard]] std::size_t index(int k, int l) const { return static_cast<std::size_t>(k) * L + l; }
  [[nodiscard]] std::int64_t cluster_count(int k) const;
  [[nodiscard]] std::int64_t total() const;
  /// Adds another table of the same shape.
  void add(const FixedSuffStats& other);
};

FixedSuffStats local_suff_stats(const Shard& shard, const AllocationState& alloc, int K, int L);

/// Keeps only nonempty clusters, in label order. `kept` receives the
/// original (zero-based) label of each retained cluster.
FixedSuffStats drop_empty_clusters(const FixedSuffStats& stats, std::vector<int>& kept);

/// Moment-based parameter values for the given statistics; empty clusters
/// get a prior-drawn center.
ModelParams moment_params(const FixedSuffStats& stats, const Hyperparams& hp, Rng& rng);

struct PosteriorDraws {
  std::vector<ModelParams> draws;
  /// Original cluster label (zero-based) of each retained cluster.
  std::vector<int> cluster_ids;
  std::uint64_t seed = 0;
};

struct ParamChainConfig {
  int iters = 2000;
  int burn_in = 1000;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Gibbs sampler over the parameters given fixed statistics. Empty
/// clusters are dropped first; draws after burn-in are stored.
PosteriorDraws run_param_chain(const FixedSuffStats& stats, const Hyperparams& hp, const ParamChainConfig& cfg);

struct PredictiveSample {
  Matrix points;          ///< d x m
  std::vector<int> tags;  ///< zero-based cluster of each point
};

/// Each point: a stored draw uniformly, (k, l) with probability
/// eta_k * omega_kl, then a Gaussian draw.
PredictiveSample posterior_predictive_sample(const PosteriorDraws& draws, int m, Rng& rng);

struct Classification {
  int label = 0;  ///< zero-based, argmax with ties to the smaller index
  Vector probs;
};

/// Cluster probabilities averaged over the stored draws.
Classification classify(const Vector& y, const PosteriorDraws& draws);

/// Writes `<stem>.bin` and `<stem>.json`; returns the manifest path.
std::string save_draws(const PosteriorDraws& draws, const std::string& stem);
/// Reads draws back through the manifest written by save_draws.
PosteriorDraws load_draws(const std::string& manifest_path);

}  // namespace dibc

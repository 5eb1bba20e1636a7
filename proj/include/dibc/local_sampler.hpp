#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dibc/error.hpp"
#include "dibc/model.hpp"
#include "dibc/rng.hpp"

namespace dibc {

struct LocalChainConfig {
  int K = 10;
  int L = 3;
  int n_iters = 1000;
  int burn_in = 500;
  /// Stride of the per-iteration occupied-cluster trace.
  int thin = 1;
  /// Stride between stored allocation samples after burn-in; 0 picks the
  /// stride that keeps 100 evenly spaced samples.
  int record_allocations_every = 0;
  /// Start-up: pilot_runs chains of pilot_sweeps each on a random subset of
  /// pilot_size points; the pilot with the fewest occupied clusters (then
  /// the highest shard log-likelihood) supplies the parameters from which
  /// the full shard is allocated. pilot_sweeps = 0 starts from
  /// initialize_chain on the whole shard.
  int pilot_size = 300;
  int pilot_sweeps = 500;
  int pilot_runs = 4;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  /// record_allocations_every with the 0 default resolved.
  [[nodiscard]] int allocation_stride() const;
};

struct AllocationSample {
  int iteration = 0;  ///< 1-based sweep index
  AllocationState alloc;
};

struct LocalTrace {
  std::vector<AllocationSample> samples;
  ModelParams last_params;
  /// Number of occupied clusters after every `thin`-th sweep.
  std::vector<int> occupied_clusters;
};

/// A chain stopped by a sweep failure; carries what had been sampled so far.
class ChainAborted : public NumericalError {
 public:
  ChainAborted(const std::string& what, int iteration, std::shared_ptr<LocalTrace> partial)
      : NumericalError(what), iteration_(iteration), partial_(std::move(partial)) {}
  [[nodiscard]] int iteration() const { return iteration_; }
  [[nodiscard]] const LocalTrace& partial() const { return *partial_; }

 private:
  int iteration_;
  std::shared_ptr<LocalTrace> partial_;
};

/// Normalized allocation probabilities for one point: P(c = k) and, for each
/// k, P(s = l | c = k).
struct AllocationProbabilities {
  Vector cluster;      ///< size K
  Matrix subcomponent;  ///< K x L, rows sum to 1
};
AllocationProbabilities allocation_probabilities(const Vector& y, const ModelParams& params);

/// One sweep in the fixed order: eta, cluster labels, then per cluster the
/// subcomponent labels, weights, precisions and means, then lambda, C0k and
/// the cluster center.
void gibbs_sweep(const Shard& shard, ModelParams& params, AllocationState& alloc,
                 const Hyperparams& hp, Rng& rng);

/// Starting state: k-means++ seeded Lloyd clustering into K groups, then
/// k-means++ seeds for L subcomponents inside each group with every point
/// sent to its nearest seed; parameters are moment estimates of that split.
std::pair<ModelParams, AllocationState> initialize_chain(const Shard& shard, const Hyperparams& hp,
                                                         int K, int L, Rng& rng);

/// Starting state from a pilot run on a subsample (see LocalChainConfig).
std::pair<ModelParams, AllocationState> pilot_initialize(const Shard& shard, const Hyperparams& hp,
                                                         const LocalChainConfig& cfg, Rng& rng);

LocalTrace run_local_chain(const Shard& shard, const Hyperparams& hp, const LocalChainConfig& cfg);

int count_occupied(std::span<const int> labels, int K);

}  // namespace dibc

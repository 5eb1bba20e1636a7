#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dibc/linalg.hpp"
#include "dibc/model.hpp"
#include "dibc/rng.hpp"

namespace dibc {

/// Summary of one nonempty subcomponent ("item") of a worker's sample.
/// Items are addressed by (worker, within_index) with
/// within_index = L*k + l + 1 for zero-based cluster k and subcomponent l.
struct ItemStats {
  int worker = 0;
  int within_index = 0;
  std::int64_t size = 0;
  Vector mean;
  Matrix second_moment;  ///< sum of y y^T divided by size
  /// Local point indices of the members; only populated on the owning worker.
  std::vector<int> member_indices;
};

struct RefinementPrior {
  double alpha0 = 1.0;
  double nu0 = 0.0;
  Matrix S0;

  /// alpha0 = 1, nu0 = d + 2, S0 = data covariance.
  static RefinementPrior defaults(const Matrix& data_cov);
  /// Throws ParameterError.
  void validate() const;
};

struct GroupState {
  std::vector<int> z;  ///< group of each item, 1..H, in item order
  int H = 0;
  int reference = 0;   ///< worker id of the reference subset
  /// within_index of the reference item mapped to group h (entry h - 1).
  std::vector<int> ref_items;
};

/// Statistics of a group with one item held out: N_{h\b}, mean and second
/// moment of the remaining members.
struct GroupSuffStats {
  double n = 0.0;
  Vector mean;
  Matrix second_moment;
};

/// Posterior predictive Student-t of the normal-inverse-Wishart group model.
struct GroupPredictive {
  Vector loc;
  Matrix scale;
  double df = 0.0;
};
GroupPredictive group_predictive(const GroupSuffStats& q, const RefinementPrior& prior);

/// One item per nonempty (k, l) of the allocation, in within_index order.
std::vector<ItemStats> extract_items(const AllocationState& alloc, const Shard& shard, int K, int L);

/// Nearest reference item by Euclidean distance of means; ties go to the
/// smaller within_index. Reference items map to groups 1..H in
/// within_index order. Throws ParameterError if the reference has no items.
GroupState init_groups(std::span<const ItemStats> items, int reference);

/// log of the Dirichlet-multinomial prior ratio for putting an item of size
/// n_b into a group holding n_rest other observations.
double group_prior_logprob(double n_b, double n_rest, int H, double alpha0, double N);

/// Sum over the item's rows of the group predictive log density.
double group_marginal_loglik(std::span<const int> rows, const Matrix& points, const GroupSuffStats& q,
                             const RefinementPrior& prior);

/// Worker-side evaluation of item likelihoods; the master never sees rows.
class ItemLikelihoodSource {
 public:
  virtual ~ItemLikelihoodSource() = default;
  /// log p(y_b | Y_{h\b}) for every entry of `groups`.
  virtual std::vector<double> item_logliks(int worker, int within_index,
                                           std::span<const GroupSuffStats> groups,
                                           const RefinementPrior& prior) = 0;
};

/// Source backed by in-memory shards and their items.
class LocalLikelihoodSource : public ItemLikelihoodSource {
 public:
  /// `shards` and `items` must outlive the source; items carry member indices.
  LocalLikelihoodSource(std::span<const Shard> shards, std::span<const std::vector<ItemStats>> items);
  std::vector<double> item_logliks(int worker, int within_index, std::span<const GroupSuffStats> groups,
                                   const RefinementPrior& prior) override;

 private:
  std::span<const Shard> shards_;
  std::span<const std::vector<ItemStats>> items_;
};

/// Running per-group totals supporting hold-one-out statistics.
class GroupTotals {
 public:
  GroupTotals(int H, int d);
  void add(const ItemStats& item, int h);
  void remove(const ItemStats& item, int h);
  /// Statistics of group h (1-based).
  [[nodiscard]] GroupSuffStats stats(int h) const;
  /// Statistics of group h with `item` removed when it is a member.
  [[nodiscard]] GroupSuffStats without(int h, const ItemStats& item, bool member) const;

 private:
  std::vector<double> n_;
  std::vector<Vector> sum_;
  std::vector<Matrix> outer_;
};

struct RefinementResult {
  GroupState state;
  std::vector<int> z_tilde;  ///< within_index of the chosen reference item, per item
};

/// One collapsed Gibbs pass over all items. Items are visited reference
/// first, then by (worker, within_index); the master side uses only sizes,
/// means and second moments.
RefinementResult refine_sweep(std::span<const ItemStats> items, GroupState state, const RefinementPrior& prior,
                              ItemLikelihoodSource& source, Rng& rng);

/// Relabels a shard's points: cluster (z~ - 1) / L, subcomponent (z~ - 1) % L.
/// `items` and `z_tilde` are the shard's own items and their labels.
AllocationState apply_labels(std::span<const int> z_tilde, std::span<const ItemStats> items, int L, int n);

}  // namespace dibc

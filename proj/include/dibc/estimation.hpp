#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "dibc/rng.hpp"

namespace dibc {

/// Variation of information between two labelings, H(a) + H(b) - 2 I(a, b).
double vi_distance(std::span<const int> a, std::span<const int> b);

/// Sparse table keyed by (label in sample t, label in candidate).
using PairTable = std::map<std::pair<int, int>, std::int64_t>;

/// Joint counts of one candidate against every sample of the set T.
struct CandidateCounts {
  std::map<int, std::int64_t> marginal;  ///< N_{+j}
  std::vector<PairTable> joint;          ///< N_ij, one table per sample t

  /// Number of count entries (marginal plus all joint cells).
  [[nodiscard]] std::size_t entries() const;
  /// Sum of the marginal counts.
  [[nodiscard]] std::int64_t total() const;
};

/// Counts of `samples[candidate]` against every entry of `samples`, for the
/// rows held locally.
CandidateCounts local_counts(std::span<const std::vector<int>> samples, std::size_t candidate);

/// Adds `part` into `into`; tables are matched by sample position.
void merge_counts(CandidateCounts& into, const CandidateCounts& part);

/// Estimated expected VI, up to an additive constant independent of the
/// candidate: sum_j p_j log p_j - (2/|T|) sum_t sum_ij (N_ij/N) log(N_ij/N).
double estimate_expected_vi(const CandidateCounts& counts, std::int64_t N);

/// Posterior expected Binder loss from the same counts, as the average
/// fraction of discordant pairs.
double estimate_expected_binder(const CandidateCounts& counts, std::int64_t N);

using CountLoss = std::function<double(const CandidateCounts&, std::int64_t)>;

/// `m` of `t` sample positions drawn uniformly without replacement, sorted.
std::vector<std::size_t> choose_candidates(std::size_t t, std::size_t m, Rng& rng);

/// Index of the smallest score; ties go to the earlier entry.
std::size_t argmin_score(std::span<const double> scores);

}  // namespace dibc

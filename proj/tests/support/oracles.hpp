#pragma once

// Checks shared by the unit tests and the acceptance binary. Every check
// recomputes its reference values with code written separately from the
// library routine under test.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dibc/evalgen.hpp"
#include "dibc/pipeline.hpp"
#include "dibc/refinement.hpp"

namespace dibc::check {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- refinement ----

/// Items of a d = 1 toy problem: worker 0 holds `ref_items` items, worker 1
/// holds `other_items`; each item is a small clump of points.
struct RefinementScenario {
  std::vector<Shard> shards;
  std::vector<std::vector<ItemStats>> per_worker;
  std::vector<ItemStats> items;  ///< worker 0 then worker 1
  RefinementPrior prior;
};
RefinementScenario refinement_scenario(int ref_items, int other_items, std::uint64_t seed);

/// Distribution of the group vector after one sequential sweep from
/// `start`, by enumerating every path of single-item updates.
std::map<std::vector<int>, double> exact_sweep_distribution(const RefinementScenario& sc, const GroupState& start);

/// Sampled per-item group frequencies over `sweeps` sweeps against the exact
/// marginals; every cell within 3 Monte Carlo standard errors.
Outcome refinement_equivalence(int ref_items, int other_items, int sweeps, std::uint64_t seed);

/// Cluster count of worker 1 changes through refinement in both directions.
Outcome merge_and_split(std::uint64_t seed);

// ---- predictive density ----

/// log predictive density of one point under the normal-NIW model, by
/// quadrature over the variance (d = 1).
double predictive_by_quadrature(double y, const std::vector<double>& group, double nu0, double s0);
Outcome predictive_density(std::uint64_t seed);

// ---- conjugate updates ----

Outcome conjugate_updates(std::uint64_t seed);

// ---- metrics ----

struct BrutePairs {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};
BrutePairs brute_pairs(const std::vector<int>& truth, const std::vector<int>& pred);
/// Largest number of matches over one-to-one maps of predicted onto true labels.
std::int64_t brute_best_matches(const std::vector<int>& truth, const std::vector<int>& pred);
Outcome metric_agreement(int pairs, int n, std::uint64_t seed);

// ---- runtime ----

/// Candidate scores and merged joint counts of a pipeline run compared with
/// a serial recomputation from the workers' refined samples.
Outcome distributed_serial_identity(int N, int R, int T, int M, std::uint64_t seed);

struct FitSummary {
  int clusters = 0;
  double ari = 0.0;
  double seconds = 0.0;
};
PipelineConfig recovery_config(int R, std::uint64_t seed);
FitSummary summarize_fit(const PipelineResult& result, const std::vector<int>& truth, double seconds);

/// Eight tight blobs paired into four well separated clusters.
Matrix blob_data(int n, std::uint64_t seed);

/// Master-bound refinement and estimation bytes for two data sizes.
struct TrafficComparison {
  std::uint64_t small_bytes = 0, large_bytes = 0;
  int small_items = 0, large_items = 0;
  double relative_change = 0.0;
};
TrafficComparison communication_scaling(int n_small, int n_large, std::uint64_t seed);

/// ARI of k-means (k = 4) on posterior predictive points against their tags.
double predictive_mode_ari(const PosteriorDraws& draws, int m, std::uint64_t seed);

}  // namespace dibc::check

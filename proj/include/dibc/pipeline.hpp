#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dibc/local_sampler.hpp"
#include "dibc/model.hpp"
#include "dibc/param_sampler.hpp"
#include "dibc/refinement.hpp"
#include "dibc/transport.hpp"

namespace dibc {

/// Balanced random split: shard sizes differ by at most one. Labels, when
/// given, travel with their rows.
std::vector<Shard> partition_data(const Matrix& data, int R, std::uint64_t seed,
                                  const std::vector<int>* labels = nullptr);

enum class TransportKind { kInProcess, kTcp };
enum class LossKind { kVariationOfInformation, kBinder };

struct PipelineConfig {
  int R = 1;
  int K = 10;
  int L = 3;
  LocalChainConfig chain;  ///< K, L and seed are overridden per worker
  int refine_samples = 100;  ///< |T|
  int candidates = 20;       ///< |M|
  double phi_B = 0.5;
  double phi_W = 0.1;
  /// Defaults from the data covariance when unset.
  std::optional<RefinementPrior> refinement_prior;
  ParamChainConfig param_chain;  ///< seed is derived from `seed`
  bool sample_parameters = true;
  LossKind loss = LossKind::kVariationOfInformation;
  TransportKind transport = TransportKind::kInProcess;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

struct StepReport {
  std::string name;
  double seconds = 0.0;
  bool skipped = false;
  std::uint64_t bytes_to_workers = 0;
  std::uint64_t bytes_to_master = 0;
};

struct PipelineDiagnostics {
  std::vector<StepReport> steps;
  std::vector<int> candidate_tags;
  std::vector<double> candidate_scores;  ///< loss score (offset for VI)
  int chosen_tag = -1;
  std::vector<int> dropped_samples;
  std::vector<std::string> warnings;
  std::vector<std::vector<int>> occupied_traces;  ///< per worker
  std::vector<int> references;  ///< reference worker per refined sample
  TrafficMeter traffic;
  std::uint64_t count_entries = 0;  ///< entries received in CountsUpload
};

struct PipelineResult {
  std::vector<int> c_star;  ///< zero-based cluster label per input row
  std::vector<int> s_star;  ///< zero-based subcomponent label per input row
  PosteriorDraws draws;
  Hyperparams hyperparams;
  PipelineDiagnostics diagnostics;
};

/// Runs the five steps with the transport chosen in `cfg`.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Matrix& data);
/// Runs the five steps over an existing transport with cfg.R workers.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Matrix& data, Transport& transport);

/// Seed streams derived from the master seed.
std::uint64_t worker_chain_seed(std::uint64_t master, int r);

}  // namespace dibc

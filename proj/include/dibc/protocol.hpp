#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dibc/error.hpp"
#include "dibc/estimation.hpp"
#include "dibc/local_sampler.hpp"
#include "dibc/model.hpp"
#include "dibc/param_sampler.hpp"
#include "dibc/refinement.hpp"
#include "dibc/wire.hpp"

/// Payload encodings, one pair of functions per message body.
namespace dibc::wire {

void put(ByteWriter& w, const Hyperparams& hp);
Hyperparams get_hyperparams(ByteReader& r);

void put(ByteWriter& w, const LocalChainConfig& cfg);
LocalChainConfig get_chain_config(ByteReader& r);

void put(ByteWriter& w, const RefinementPrior& prior);
RefinementPrior get_refinement_prior(ByteReader& r);

/// Items without member indices; these never leave the worker.
void put(ByteWriter& w, const std::vector<ItemStats>& items);
std::vector<ItemStats> get_items(ByteReader& r);

void put(ByteWriter& w, const std::vector<GroupSuffStats>& groups);
std::vector<GroupSuffStats> get_groups(ByteReader& r);

void put(ByteWriter& w, const CandidateCounts& counts);
CandidateCounts get_counts(ByteReader& r);

void put(ByteWriter& w, const FixedSuffStats& stats);
FixedSuffStats get_suff_stats(ByteReader& r);

/// Shard rows, ids and worker id; the only message carrying raw data.
void put(ByteWriter& w, const Shard& shard);
Shard get_shard(ByteReader& r);

std::vector<std::uint8_t> error_payload(ErrorCategory category, const std::string& what);
/// Throws the error a WorkerError frame describes.
[[noreturn]] void raise_worker_error(const Frame& frame, int worker);

}  // namespace dibc::wire

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dibc/local_sampler.hpp"
#include "dibc/model.hpp"
#include "dibc/refinement.hpp"
#include "dibc/wire.hpp"

namespace dibc {

/// Worker-side state machine: owns one shard and its local samples and
/// answers master requests with statistics only.
class Worker {
 public:
  /// Answers one request. Failures become a WorkerError reply.
  wire::Frame handle(const wire::Frame& request);
  [[nodiscard]] bool stopped() const { return stopped_; }
  [[nodiscard]] const Shard& shard() const { return shard_; }
  /// Local allocation samples, replaced in place by refinement.
  [[nodiscard]] const std::vector<AllocationState>& samples() const { return samples_; }

 private:
  wire::Frame dispatch(const wire::Frame& request);

  Shard shard_;
  bool has_shard_ = false;
  int K_ = 0, L_ = 0;
  std::vector<AllocationState> samples_;
  std::map<int, std::vector<ItemStats>> items_;
  std::optional<int> estimate_;
  bool stopped_ = false;
};

}  // namespace dibc

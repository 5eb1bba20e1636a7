#include "dibc/worker.hpp"

#include "dibc/error.hpp"
#include "dibc/estimation.hpp"
#include "dibc/param_sampler.hpp"
#include "dibc/protocol.hpp"

namespace dibc {

using wire::ByteReader;
using wire::ByteWriter;
using wire::Frame;
using wire::MessageKind;

wire::Frame Worker::handle(const Frame& request) {
  try {
    return dispatch(request);
  } catch (const std::exception& e) {
    return Frame{MessageKind::kWorkerError, request.correlation, wire::error_payload(categorize(e), e.what())};
  }
}

Frame Worker::dispatch(const Frame& request) {
  ByteReader in(request.payload);
  ByteWriter out;
  Frame reply{request.kind, request.correlation, {}};
  auto sample = [this](int t) -> AllocationState& {
    if (t < 0 || t >= static_cast<int>(samples_.size())) throw ParameterError("unknown sample " + std::to_string(t));
    return samples_[t];
  };
  if (request.kind != MessageKind::kShardAssign && request.kind != MessageKind::kShutdown && !has_shard_) {
    throw TransportError(std::string(wire::kind_name(request.kind)) + " before ShardAssign");
  }

  switch (request.kind) {
    case MessageKind::kShardAssign: {
      if (has_shard_) throw TransportError("shard already assigned");
      shard_ = wire::get_shard(in);
      in.finish();
      has_shard_ = true;
      break;
    }
    case MessageKind::kRunLocalChain: {
      const auto hp = wire::get_hyperparams(in);
      const auto cfg = wire::get_chain_config(in);
      const int keep = in.i32();
      in.finish();
      hp.validate();
      K_ = cfg.K;
      L_ = cfg.L;
      auto trace = run_local_chain(shard_, hp, cfg);
      if (static_cast<int>(trace.samples.size()) < keep) throw ConfigError("chain stored fewer samples than requested");
      samples_.clear();
      for (int t = 0; t < keep; ++t) samples_.push_back(std::move(trace.samples[t].alloc));
      out.i32(keep);
      out.ints(trace.occupied_clusters);
      break;
    }
    case MessageKind::kItemStatsUpload: {
      const int t = in.i32();
      in.finish();
      auto items = extract_items(sample(t), shard_, K_, L_);
      wire::put(out, items);
      items_[t] = std::move(items);
      break;
    }
    case MessageKind::kGroupStatsBroadcast: {
      const int t = in.i32();
      const int within = in.i32();
      const auto prior = wire::get_refinement_prior(in);
      const auto groups = wire::get_groups(in);
      in.finish();
      const auto it = items_.find(t);
      if (it == items_.end()) throw ParameterError("no items extracted for sample " + std::to_string(t));
      const ItemStats* item = nullptr;
      for (const auto& candidate : it->second) {
        if (candidate.within_index == within) item = &candidate;
      }
      if (!item) throw ParameterError("unknown item " + std::to_string(within));
      std::vector<double> logliks;
      logliks.reserve(groups.size());
      for (const auto& q : groups) logliks.push_back(group_marginal_loglik(item->member_indices, shard_.points, q, prior));
      out.f64s(logliks);
      reply.kind = MessageKind::kLoglikReply;
      break;
    }
    case MessageKind::kLabelAssign: {
      const int t = in.i32();
      const auto z_tilde = in.ints();
      in.finish();
      const auto it = items_.find(t);
      if (it == items_.end()) throw ParameterError("no items extracted for sample " + std::to_string(t));
      sample(t) = apply_labels(z_tilde, it->second, L_, shard_.size());
      items_.erase(it);
      break;
    }
    case MessageKind::kCandidateAnnounce: {
      const auto tags = in.ints();
      const int candidate = in.i32();
      in.finish();
      std::vector<std::vector<int>> labels;
      std::size_t position = tags.size();
      for (std::size_t i = 0; i < tags.size(); ++i) {
        labels.push_back(sample(tags[i]).c);
        if (tags[i] == candidate) position = i;
      }
      if (position == tags.size()) throw ParameterError("candidate is not among the announced samples");
      wire::put(out, local_counts(labels, position));
      reply.kind = MessageKind::kCountsUpload;
      break;
    }
    case MessageKind::kGlobalEstimateBroadcast: {
      const int t = in.i32();
      in.finish();
      sample(t);
      estimate_ = t;
      break;
    }
    case MessageKind::kSuffStatsUpload: {
      in.finish();
      if (!estimate_) throw TransportError("statistics requested before the global estimate");
      wire::put(out, local_suff_stats(shard_, sample(*estimate_), K_, L_));
      break;
    }
    case MessageKind::kPartitionUpload: {
      in.finish();
      if (!estimate_) throw TransportError("partition requested before the global estimate");
      const auto& a = sample(*estimate_);
      out.i64s(shard_.row_ids);
      out.ints(a.c);
      out.ints(a.s);
      break;
    }
    case MessageKind::kShutdown:
      stopped_ = true;
      break;
    default:
      throw TransportError(std::string("unexpected request ") + wire::kind_name(request.kind));
  }
  reply.payload = out.take();
  return reply;
}

}  // namespace dibc

#include "dibc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "dibc/error.hpp"
#include "dibc/estimation.hpp"
#include "dibc/protocol.hpp"

namespace dibc {

using wire::ByteReader;
using wire::ByteWriter;
using wire::Frame;
using wire::MessageKind;

namespace {

// Independent streams of the master seed.
enum Stream : std::uint64_t { kChains = 1, kPartition = 2, kRefine = 3, kCandidates = 4, kParams = 5 };

Frame make(MessageKind kind, ByteWriter& w, std::uint64_t correlation = 0) {
  return Frame{kind, correlation, w.take()};
}

Frame make(MessageKind kind) { return Frame{kind, 0, {}}; }

/// Item likelihoods evaluated by the owning worker over the transport.
class RemoteLikelihoodSource : public ItemLikelihoodSource {
 public:
  RemoteLikelihoodSource(Transport& transport, int tag) : transport_(transport), tag_(tag) {}

  std::vector<double> item_logliks(int worker, int within_index, std::span<const GroupSuffStats> groups,
                                   const RefinementPrior& prior) override {
    ByteWriter w;
    w.i32(tag_);
    w.i32(within_index);
    wire::put(w, prior);
    wire::put(w, std::vector<GroupSuffStats>(groups.begin(), groups.end()));
    const auto correlation = (static_cast<std::uint64_t>(tag_) << 32) | static_cast<std::uint32_t>(within_index);
    const auto reply = transport_.request(worker, make(MessageKind::kGroupStatsBroadcast, w, correlation));
    if (reply.kind != MessageKind::kLoglikReply) throw TransportError("expected LoglikReply");
    ByteReader r(reply.payload);
    auto out = r.f64s();
    r.finish();
    return out;
  }

 private:
  Transport& transport_;
  int tag_;
};

class Master {
 public:
  Master(const PipelineConfig& cfg, const Matrix& data, Transport& transport)
      : cfg_(cfg), data_(data), transport_(transport), R_(cfg.R) {}

  PipelineResult run() {
    step("partition", [&] { partition(); });
    step("local_chains", [&] { local_chains(); });
    if (R_ == 1) {
      result_.diagnostics.steps.push_back({"refinement", 0.0, true, 0, 0});
    } else {
      step("refinement", [&] { refinement(); });
    }
    step("estimation", [&] { estimation(); });
    if (cfg_.sample_parameters) {
      step("parameter_sampling", [&] { parameter_sampling(); });
    } else {
      result_.diagnostics.steps.push_back({"parameter_sampling", 0.0, true, 0, 0});
    }
    step("collect", [&] { collect(); });
    result_.diagnostics.traffic = transport_.meter();
    return std::move(result_);
  }

 private:
  template <class F>
  void step(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    const auto to_workers = transport_.meter().total_to_workers();
    const auto to_master = transport_.meter().total_to_master();
    try {
      body();
    } catch (const std::exception& e) {
      throw PipelineError(name, categorize(e), e.what());
    }
    StepReport rep;
    rep.name = name;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rep.bytes_to_workers = transport_.meter().total_to_workers() - to_workers;
    rep.bytes_to_master = transport_.meter().total_to_master() - to_master;
    result_.diagnostics.steps.push_back(rep);
  }

  void partition() {
    if (transport_.num_workers() != R_) throw ConfigError("transport has a different number of workers than R");
    const auto [mean, cov] = data_moments(data_);
    result_.hyperparams = elicit_priors(mean, cov, cfg_.phi_B, cfg_.phi_W, cfg_.K, cfg_.L);
    prior_ = cfg_.refinement_prior ? *cfg_.refinement_prior : RefinementPrior::defaults(cov);
    prior_.validate();
    if (!sparsity_condition_holds(result_.hyperparams, cfg_.L)) {
      result_.diagnostics.warnings.push_back("e0 violates the sparse-weights condition");
    }
    N_ = data_.cols();
    const auto shards = partition_data(data_, R_, Rng(cfg_.seed, kPartition)());
    for (int r = 0; r < R_; ++r) {
      ByteWriter w;
      wire::put(w, shards[r]);
      transport_.request(r, make(MessageKind::kShardAssign, w));
      if (shards[r].size() < cfg_.K) {
        result_.diagnostics.warnings.push_back("worker " + std::to_string(r) + " holds fewer rows than K");
      }
    }
  }

  void local_chains() {
    for (int r = 0; r < R_; ++r) {
      LocalChainConfig chain = cfg_.chain;
      chain.K = cfg_.K;
      chain.L = cfg_.L;
      chain.seed = worker_chain_seed(cfg_.seed, r);
      if (chain.record_allocations_every == 0) {
        chain.record_allocations_every = std::max(1, (chain.n_iters - chain.burn_in) / cfg_.refine_samples);
      }
      ByteWriter w;
      wire::put(w, result_.hyperparams);
      wire::put(w, chain);
      w.i32(cfg_.refine_samples);
      transport_.send(r, make(MessageKind::kRunLocalChain, w));
    }
    // Chains run concurrently on remote workers; replies are gathered after.
    std::vector<Frame> replies;
    for (int r = 0; r < R_; ++r) replies.push_back(transport_.receive(r));
    for (int r = 0; r < R_; ++r) {
      Transport::check(replies[r], r);
      ByteReader in(replies[r].payload);
      in.i32();
      result_.diagnostics.occupied_traces.push_back(in.ints());
      in.finish();
    }
  }

  void refinement() {
    Rng rng(cfg_.seed, kRefine);
    for (int t = 0; t < cfg_.refine_samples; ++t) {
      const int reference = static_cast<int>(rng.below(static_cast<std::uint64_t>(R_)));
      try {
        refine_one(t, reference, rng);
        result_.diagnostics.references.push_back(reference);
      } catch (const TransportError& e) {
        result_.diagnostics.dropped_samples.push_back(t);
        result_.diagnostics.warnings.push_back("refinement of sample " + std::to_string(t) +
                                               " dropped: " + e.what());
      }
    }
    if (static_cast<int>(result_.diagnostics.dropped_samples.size()) == cfg_.refine_samples) {
      throw TransportError("every refinement sample was dropped");
    }
  }

  void refine_one(int t, int reference, Rng& rng) {
    std::vector<ItemStats> items;
    std::vector<std::size_t> first(R_ + 1, 0);
    for (int r = 0; r < R_; ++r) {
      ByteWriter w;
      w.i32(t);
      const auto reply = transport_.request(r, make(MessageKind::kItemStatsUpload, w, static_cast<std::uint64_t>(t) << 32));
      ByteReader in(reply.payload);
      auto part = wire::get_items(in);
      in.finish();
      for (auto& it : part) {
        if (it.worker != r) throw TransportError("item reported by the wrong worker");
        items.push_back(std::move(it));
      }
      first[r + 1] = items.size();
    }
    auto state = init_groups(items, reference);
    RemoteLikelihoodSource source(transport_, t);
    const auto result = refine_sweep(items, std::move(state), prior_, source, rng);
    for (int r = 0; r < R_; ++r) {
      ByteWriter w;
      w.i32(t);
      w.ints(std::span<const int>(result.z_tilde).subspan(first[r], first[r + 1] - first[r]));
      transport_.request(r, make(MessageKind::kLabelAssign, w, static_cast<std::uint64_t>(t) << 32));
    }
  }

  void estimation() {
    std::vector<int> tags;
    const auto& dropped = result_.diagnostics.dropped_samples;
    for (int t = 0; t < cfg_.refine_samples; ++t) {
      if (std::find(dropped.begin(), dropped.end(), t) == dropped.end()) tags.push_back(t);
    }
    std::size_t m = static_cast<std::size_t>(cfg_.candidates);
    if (m > tags.size()) {
      result_.diagnostics.warnings.push_back("fewer refined samples than candidates; using all of them");
      m = tags.size();
    }
    Rng rng(cfg_.seed, kCandidates);
    const auto positions = choose_candidates(tags.size(), m, rng);
    auto& diag = result_.diagnostics;
    for (auto p : positions) {
      const int candidate = tags[p];
      CandidateCounts counts;
      for (int r = 0; r < R_; ++r) {
        ByteWriter w;
        w.ints(tags);
        w.i32(candidate);
        transport_.send(r, make(MessageKind::kCandidateAnnounce, w, static_cast<std::uint64_t>(candidate) << 32));
      }
      for (int r = 0; r < R_; ++r) {
        const auto reply = transport_.receive(r);
        Transport::check(reply, r);
        if (reply.kind != MessageKind::kCountsUpload) throw TransportError("expected CountsUpload");
        ByteReader in(reply.payload);
        const auto part = wire::get_counts(in);
        in.finish();
        diag.count_entries += part.entries();
        merge_counts(counts, part);
      }
      if (counts.total() != N_) throw TransportError("joint counts do not cover every row");
      const double score = cfg_.loss == LossKind::kBinder ? estimate_expected_binder(counts, N_)
                                                          : estimate_expected_vi(counts, N_);
      diag.candidate_tags.push_back(candidate);
      diag.candidate_scores.push_back(score);
    }
    diag.chosen_tag = diag.candidate_tags[argmin_score(diag.candidate_scores)];
    for (int r = 0; r < R_; ++r) {
      ByteWriter w;
      w.i32(diag.chosen_tag);
      transport_.request(r, make(MessageKind::kGlobalEstimateBroadcast, w));
    }
  }

  void parameter_sampling() {
    std::optional<FixedSuffStats> total;
    for (int r = 0; r < R_; ++r) {
      const auto reply = transport_.request(r, make(MessageKind::kSuffStatsUpload));
      ByteReader in(reply.payload);
      auto part = wire::get_suff_stats(in);
      in.finish();
      if (total) {
        total->add(part);
      } else {
        total = std::move(part);
      }
    }
    ParamChainConfig pc = cfg_.param_chain;
    pc.seed = Rng(cfg_.seed, kParams)();
    result_.draws = run_param_chain(*total, result_.hyperparams, pc);
  }

  void collect() {
    result_.c_star.assign(static_cast<std::size_t>(N_), -1);
    result_.s_star.assign(static_cast<std::size_t>(N_), -1);
    for (int r = 0; r < R_; ++r) {
      const auto reply = transport_.request(r, make(MessageKind::kPartitionUpload));
      ByteReader in(reply.payload);
      const auto rows = in.i64s();
      const auto c = in.ints();
      const auto s = in.ints();
      in.finish();
      if (rows.size() != c.size() || rows.size() != s.size()) throw TransportError("partition upload is inconsistent");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= N_) throw TransportError("row id out of range");
        result_.c_star[rows[i]] = c[i];
        result_.s_star[rows[i]] = s[i];
      }
    }
    if (std::find(result_.c_star.begin(), result_.c_star.end(), -1) != result_.c_star.end()) {
      throw TransportError("partition upload missed rows");
    }
    for (int r = 0; r < R_; ++r) transport_.request(r, make(MessageKind::kShutdown));
  }

  const PipelineConfig& cfg_;
  const Matrix& data_;
  Transport& transport_;
  int R_;
  std::int64_t N_ = 0;
  RefinementPrior prior_;
  PipelineResult result_;
};

}  // namespace

std::vector<Shard> partition_data(const Matrix& data, int R, std::uint64_t seed, const std::vector<int>* labels) {
  const auto N = static_cast<std::int64_t>(data.cols());
  if (R < 1) throw ConfigError("R must be positive");
  if (N < R) throw ConfigError("fewer rows than workers");
  if (labels && static_cast<std::int64_t>(labels->size()) != N) throw ParameterError("one label per row required");
  std::vector<std::int64_t> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::int64_t i = N - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[i], order[j]);
  }
  std::vector<Shard> shards(R);
  std::int64_t pos = 0;
  for (int r = 0; r < R; ++r) {
    const std::int64_t size = N / R + (r < N % R ? 1 : 0);
    std::vector<std::int64_t> rows(order.begin() + pos, order.begin() + pos + size);
    pos += size;
    std::sort(rows.begin(), rows.end());
    auto& s = shards[r];
    s.worker_id = r;
    s.row_ids = rows;
    s.points.resize(data.rows(), size);
    if (labels) s.true_labels.emplace();
    for (std::int64_t i = 0; i < size; ++i) {
      s.points.col(i) = data.col(rows[i]);
      if (labels) s.true_labels->push_back((*labels)[rows[i]]);
    }
  }
  return shards;
}

std::uint64_t worker_chain_seed(std::uint64_t master, int r) {
  return Rng(master, kChains).split(static_cast<std::uint64_t>(r))();
}

void PipelineConfig::validate() const {
  if (R < 1) throw ConfigError("R must be positive");
  if (K < 1 || L < 1) throw ConfigError("K and L must be positive");
  LocalChainConfig c = chain;
  c.K = K;
  c.L = L;
  c.validate();
  const int eligible = chain.n_iters - chain.burn_in;
  if (refine_samples < 1 || refine_samples > eligible) {
    throw ConfigError("refine_samples must lie in [1, " + std::to_string(eligible) + "]");
  }
  if (chain.record_allocations_every > 0 && eligible / chain.record_allocations_every < refine_samples) {
    throw ConfigError("allocation stride keeps fewer samples than refine_samples");
  }
  if (candidates < 1 || candidates > refine_samples) {
    throw ConfigError("candidates must lie in [1, refine_samples]");
  }
  if (!(phi_B > 0.0 && phi_B < 1.0) || !(phi_W > 0.0 && phi_W < 1.0)) throw ConfigError("phi_B and phi_W must lie in (0, 1)");
  if (sample_parameters) param_chain.validate();
  if (refinement_prior) refinement_prior->validate();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Matrix& data, Transport& transport) {
  cfg.validate();
  return Master(cfg, data, transport).run();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Matrix& data) {
  cfg.validate();
  if (cfg.transport == TransportKind::kTcp) {
    LoopbackWorkers workers(cfg.R);
    TcpTransport transport(workers.endpoints());
    return run_pipeline(cfg, data, transport);
  }
  InProcessTransport transport(cfg.R);
  return run_pipeline(cfg, data, transport);
}

}  // namespace dibc

#include "dibc/protocol.hpp"

namespace dibc::wire {

void put(ByteWriter& w, const Hyperparams& hp) {
  w.f64(hp.e0);
  w.f64(hp.d0);
  w.f64(hp.c0);
  w.f64(hp.g0);
  w.mat(hp.G0);
  w.mat(hp.B0);
  w.vec(hp.m0);
  w.mat(hp.M0);
  w.f64(hp.nu);
}

Hyperparams get_hyperparams(ByteReader& r) {
  Hyperparams hp;
  hp.e0 = r.f64();
  hp.d0 = r.f64();
  hp.c0 = r.f64();
  hp.g0 = r.f64();
  hp.G0 = r.mat();
  hp.B0 = r.mat();
  hp.m0 = r.vec();
  hp.M0 = r.mat();
  hp.nu = r.f64();
  return hp;
}

void put(ByteWriter& w, const LocalChainConfig& cfg) {
  w.i32(cfg.K);
  w.i32(cfg.L);
  w.i32(cfg.n_iters);
  w.i32(cfg.burn_in);
  w.i32(cfg.thin);
  w.i32(cfg.record_allocations_every);
  w.i32(cfg.pilot_size);
  w.i32(cfg.pilot_sweeps);
  w.i32(cfg.pilot_runs);
  w.u64(cfg.seed);
}

LocalChainConfig get_chain_config(ByteReader& r) {
  LocalChainConfig cfg;
  cfg.K = r.i32();
  cfg.L = r.i32();
  cfg.n_iters = r.i32();
  cfg.burn_in = r.i32();
  cfg.thin = r.i32();
  cfg.record_allocations_every = r.i32();
  cfg.pilot_size = r.i32();
  cfg.pilot_sweeps = r.i32();
  cfg.pilot_runs = r.i32();
  cfg.seed = r.u64();
  return cfg;
}

void put(ByteWriter& w, const RefinementPrior& prior) {
  w.f64(prior.alpha0);
  w.f64(prior.nu0);
  w.mat(prior.S0);
}

RefinementPrior get_refinement_prior(ByteReader& r) {
  RefinementPrior p;
  p.alpha0 = r.f64();
  p.nu0 = r.f64();
  p.S0 = r.mat();
  return p;
}

void put(ByteWriter& w, const std::vector<ItemStats>& items) {
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& it : items) {
    w.i32(it.worker);
    w.i32(it.within_index);
    w.i64(it.size);
    w.vec(it.mean);
    w.mat(it.second_moment);
  }
}

std::vector<ItemStats> get_items(ByteReader& r) {
  std::vector<ItemStats> items(r.u32());
  for (auto& it : items) {
    it.worker = r.i32();
    it.within_index = r.i32();
    it.size = r.i64();
    it.mean = r.vec();
    it.second_moment = r.mat();
  }
  return items;
}

void put(ByteWriter& w, const std::vector<GroupSuffStats>& groups) {
  w.u32(static_cast<std::uint32_t>(groups.size()));
  for (const auto& g : groups) {
    w.f64(g.n);
    w.vec(g.mean);
    w.mat(g.second_moment);
  }
}

std::vector<GroupSuffStats> get_groups(ByteReader& r) {
  std::vector<GroupSuffStats> groups(r.u32());
  for (auto& g : groups) {
    g.n = r.f64();
    g.mean = r.vec();
    g.second_moment = r.mat();
  }
  return groups;
}

void put(ByteWriter& w, const CandidateCounts& counts) {
  w.u32(static_cast<std::uint32_t>(counts.marginal.size()));
  for (const auto& [k, v] : counts.marginal) {
    w.i32(k);
    w.i64(v);
  }
  w.u32(static_cast<std::uint32_t>(counts.joint.size()));
  for (const auto& table : counts.joint) {
    w.u32(static_cast<std::uint32_t>(table.size()));
    for (const auto& [k, v] : table) {
      w.i32(k.first);
      w.i32(k.second);
      w.i64(v);
    }
  }
}

CandidateCounts get_counts(ByteReader& r) {
  CandidateCounts c;
  for (auto n = r.u32(); n > 0; --n) {
    const int k = r.i32();
    c.marginal[k] = r.i64();
  }
  c.joint.resize(r.u32());
  for (auto& table : c.joint) {
    for (auto n = r.u32(); n > 0; --n) {
      const int a = r.i32();
      const int b = r.i32();
      table[{a, b}] = r.i64();
    }
  }
  return c;
}

void put(ByteWriter& w, const FixedSuffStats& stats) {
  w.i32(stats.K);
  w.i32(stats.L);
  w.i32(stats.d);
  w.i64s(stats.count);
  for (std::size_t i = 0; i < stats.count.size(); ++i) {
    w.vec(stats.sum[i]);
    w.mat(stats.outer[i]);
  }
}

FixedSuffStats get_suff_stats(ByteReader& r) {
  const int K = r.i32(), L = r.i32(), d = r.i32();
  auto s = FixedSuffStats::zeros(K, L, d);
  s.count = r.i64s();
  if (s.count.size() != static_cast<std::size_t>(K) * L) throw TransportError("statistics table has the wrong size");
  for (std::size_t i = 0; i < s.count.size(); ++i) {
    s.sum[i] = r.vec();
    s.outer[i] = r.mat();
  }
  return s;
}

void put(ByteWriter& w, const Shard& shard) {
  w.i32(shard.worker_id);
  w.mat(shard.points);
  w.i64s(shard.row_ids);
}

Shard get_shard(ByteReader& r) {
  Shard s;
  s.worker_id = r.i32();
  s.points = r.mat();
  s.row_ids = r.i64s();
  if (static_cast<Eigen::Index>(s.row_ids.size()) != s.points.cols()) throw TransportError("shard row ids do not match rows");
  return s;
}

std::vector<std::uint8_t> error_payload(ErrorCategory category, const std::string& what) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(category));
  w.str(what);
  return w.take();
}

void raise_worker_error(const Frame& frame, int worker) {
  ByteReader r(frame.payload);
  const auto category = static_cast<ErrorCategory>(r.u8());
  const auto what = r.str();
  throw_categorized(category, "worker " + std::to_string(worker) + ": " + what);
}

}  // namespace dibc::wire

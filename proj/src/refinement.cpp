#include "dibc/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dibc/distributions.hpp"
#include "dibc/error.hpp"

namespace dibc {

RefinementPrior RefinementPrior::defaults(const Matrix& data_cov) {
  RefinementPrior p;
  p.alpha0 = 1.0;
  p.nu0 = static_cast<double>(data_cov.rows()) + 2.0;
  p.S0 = data_cov;
  return p;
}

void RefinementPrior::validate() const {
  const double d = static_cast<double>(S0.rows());
  if (!(alpha0 > 0.0)) throw ParameterError("alpha0 must be positive");
  if (!(nu0 > d - 1.0)) throw ParameterError("nu0 must exceed d - 1");
  require_spd(S0, "S0");
}

GroupPredictive group_predictive(const GroupSuffStats& q, const RefinementPrior& prior) {
  const auto d = prior.S0.rows();
  const double kappa = 1.0 + q.n;
  const double nu = prior.nu0 + q.n;
  GroupPredictive out;
  Matrix S = prior.S0;
  if (q.n > 0.0) {
    out.loc = q.n * q.mean / kappa;
    // S0 + N*second - kappa*m*m^T, written through the centered scatter.
    S += q.n * (q.second_moment - q.mean * q.mean.transpose()) + (q.n / kappa) * q.mean * q.mean.transpose();
  } else {
    out.loc = Vector::Zero(d);
  }
  out.df = nu - static_cast<double>(d) + 1.0;
  if (!(out.df > 0.0)) throw NumericalError("group predictive has non-positive degrees of freedom");
  out.scale = symmetrize((kappa + 1.0) / (kappa * out.df) * S);
  return out;
}

std::vector<ItemStats> extract_items(const AllocationState& alloc, const Shard& shard, int K, int L) {
  const int n = shard.size();
  const int d = shard.dim();
  if (static_cast<int>(alloc.c.size()) != n || static_cast<int>(alloc.s.size()) != n) {
    throw ParameterError("allocation length does not match the shard");
  }
  std::vector<ItemStats> slots(static_cast<std::size_t>(K) * L);
  for (int i = 0; i < n; ++i) {
    const int k = alloc.c[i], l = alloc.s[i];
    if (k < 0 || k >= K || l < 0 || l >= L) throw ParameterError("allocation label out of range");
    auto& it = slots[static_cast<std::size_t>(k) * L + l];
    if (it.size == 0) {
      it.mean = Vector::Zero(d);
      it.second_moment = Matrix::Zero(d, d);
    }
    const auto y = shard.points.col(i);
    ++it.size;
    it.mean += y;
    it.second_moment.noalias() += y * y.transpose();
    it.member_indices.push_back(i);
  }
  std::vector<ItemStats> items;
  for (int idx = 0; idx < K * L; ++idx) {
    auto& it = slots[idx];
    if (it.size == 0) continue;
    it.worker = shard.worker_id;
    it.within_index = idx + 1;
    it.mean /= static_cast<double>(it.size);
    it.second_moment /= static_cast<double>(it.size);
    items.push_back(std::move(it));
  }
  return items;
}

GroupState init_groups(std::span<const ItemStats> items, int reference) {
  GroupState st;
  st.reference = reference;
  std::vector<const ItemStats*> refs;
  for (const auto& it : items) {
    if (it.worker == reference) refs.push_back(&it);
  }
  if (refs.empty()) throw ParameterError("reference worker " + std::to_string(reference) + " has no items");
  std::sort(refs.begin(), refs.end(),
            [](const ItemStats* a, const ItemStats* b) { return a->within_index < b->within_index; });
  st.H = static_cast<int>(refs.size());
  for (const auto* r : refs) st.ref_items.push_back(r->within_index);
  st.z.reserve(items.size());
  for (const auto& it : items) {
    int best = 0;
    double best_dist = (it.mean - refs[0]->mean).squaredNorm();
    for (int h = 1; h < st.H; ++h) {
      const double dist = (it.mean - refs[h]->mean).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = h;
      }
    }
    st.z.push_back(best + 1);
  }
  return st;
}

double group_prior_logprob(double n_b, double n_rest, int H, double alpha0, double N) {
  const double Ha = static_cast<double>(H) * alpha0;
  return std::lgamma(N + Ha - n_b) + std::lgamma(n_rest + n_b + alpha0) - std::lgamma(N + Ha) -
         std::lgamma(n_rest + alpha0);
}

double group_marginal_loglik(std::span<const int> rows, const Matrix& points, const GroupSuffStats& q,
                             const RefinementPrior& prior) {
  const auto pred = group_predictive(q, prior);
  const stats::MvtDensity density(pred.loc, pred.scale, pred.df);
  double total = 0.0;
  for (int i : rows) total += density(points.col(i));
  return total;
}

LocalLikelihoodSource::LocalLikelihoodSource(std::span<const Shard> shards,
                                             std::span<const std::vector<ItemStats>> items)
    : shards_(shards), items_(items) {
  if (shards.size() != items.size()) throw ParameterError("one item list per shard required");
}

std::vector<double> LocalLikelihoodSource::item_logliks(int worker, int within_index,
                                                        std::span<const GroupSuffStats> groups,
                                                        const RefinementPrior& prior) {
  for (std::size_t r = 0; r < shards_.size(); ++r) {
    if (shards_[r].worker_id != worker) continue;
    for (const auto& it : items_[r]) {
      if (it.within_index != within_index) continue;
      std::vector<double> out;
      out.reserve(groups.size());
      for (const auto& q : groups) out.push_back(group_marginal_loglik(it.member_indices, shards_[r].points, q, prior));
      return out;
    }
  }
  throw ParameterError("unknown item (" + std::to_string(worker) + ", " + std::to_string(within_index) + ")");
}

GroupTotals::GroupTotals(int H, int d)
    : n_(H, 0.0), sum_(H, Vector::Zero(d)), outer_(H, Matrix::Zero(d, d)) {}

void GroupTotals::add(const ItemStats& item, int h) {
  const double n = static_cast<double>(item.size);
  n_[h - 1] += n;
  sum_[h - 1] += n * item.mean;
  outer_[h - 1] += n * item.second_moment;
}

void GroupTotals::remove(const ItemStats& item, int h) {
  const double n = static_cast<double>(item.size);
  n_[h - 1] -= n;
  sum_[h - 1] -= n * item.mean;
  outer_[h - 1] -= n * item.second_moment;
}

GroupSuffStats GroupTotals::stats(int h) const {
  GroupSuffStats q;
  q.n = n_[h - 1];
  if (q.n > 0.0) {
    q.mean = sum_[h - 1] / q.n;
    q.second_moment = outer_[h - 1] / q.n;
  } else {
    q.n = 0.0;
    q.mean = Vector::Zero(sum_[h - 1].size());
    q.second_moment = Matrix::Zero(outer_[h - 1].rows(), outer_[h - 1].cols());
  }
  return q;
}

GroupSuffStats GroupTotals::without(int h, const ItemStats& item, bool member) const {
  if (!member) return stats(h);
  GroupTotals copy(1, static_cast<int>(item.mean.size()));
  copy.n_[0] = n_[h - 1];
  copy.sum_[0] = sum_[h - 1];
  copy.outer_[0] = outer_[h - 1];
  copy.remove(item, 1);
  return copy.stats(1);
}

RefinementResult refine_sweep(std::span<const ItemStats> items, GroupState state, const RefinementPrior& prior,
                              ItemLikelihoodSource& source, Rng& rng) {
  if (state.z.size() != items.size()) throw ParameterError("group state does not match the items");
  if (items.empty()) return {std::move(state), {}};
  const int H = state.H;
  const int d = static_cast<int>(items.front().mean.size());
  double N = 0.0;
  GroupTotals totals(H, d);
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (state.z[b] < 1 || state.z[b] > H) throw ParameterError("group label out of range");
    N += static_cast<double>(items[b].size);
    totals.add(items[b], state.z[b]);
  }

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool ra = items[a].worker == state.reference, rb = items[b].worker == state.reference;
    if (ra != rb) return ra;
    if (items[a].worker != items[b].worker) return items[a].worker < items[b].worker;
    return items[a].within_index < items[b].within_index;
  });

  std::vector<GroupSuffStats> q(H);
  std::vector<double> logp(H);
  for (std::size_t b : order) {
    const auto& item = items[b];
    for (int h = 1; h <= H; ++h) q[h - 1] = totals.without(h, item, state.z[b] == h);
    const auto loglik = source.item_logliks(item.worker, item.within_index, q, prior);
    if (static_cast<int>(loglik.size()) != H) throw ParameterError("likelihood reply has the wrong length");
    for (int h = 0; h < H; ++h) {
      logp[h] = group_prior_logprob(static_cast<double>(item.size), q[h].n, H, prior.alpha0, N) + loglik[h];
    }
    const int next = static_cast<int>(stats::log_categorical_sample(logp, rng)) + 1;
    if (next != state.z[b]) {
      totals.remove(item, state.z[b]);
      totals.add(item, next);
      state.z[b] = next;
    }
  }

  RefinementResult out;
  out.z_tilde.reserve(items.size());
  for (int z : state.z) out.z_tilde.push_back(state.ref_items[z - 1]);
  out.state = std::move(state);
  return out;
}

AllocationState apply_labels(std::span<const int> z_tilde, std::span<const ItemStats> items, int L, int n) {
  if (z_tilde.size() != items.size()) throw ParameterError("one refined label per item required");
  AllocationState alloc{std::vector<int>(n, -1), std::vector<int>(n, -1)};
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (z_tilde[b] < 1) throw ParameterError("refined label must be positive");
    const int c = (z_tilde[b] - 1) / L, s = (z_tilde[b] - 1) % L;
    for (int i : items[b].member_indices) {
      alloc.c[i] = c;
      alloc.s[i] = s;
    }
  }
  if (std::find(alloc.c.begin(), alloc.c.end(), -1) != alloc.c.end()) {
    throw ParameterError("refined labels do not cover every point");
  }
  return alloc;
}

}  // namespace dibc

#include "dibc/local_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dibc/conditionals.hpp"
#include "dibc/distributions.hpp"
#include "dibc/kmeans.hpp"
#include "dibc/param_sampler.hpp"

namespace dibc {

void LocalChainConfig::validate() const {
  if (K < 1 || L < 1) throw ConfigError("K and L must be positive");
  if (n_iters < 1) throw ConfigError("n_iters must be positive");
  if (burn_in < 0 || burn_in >= n_iters) throw ConfigError("burn_in must lie in [0, n_iters)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (record_allocations_every < 0) throw ConfigError("record_allocations_every must be >= 0");
  if (pilot_size < 1 || pilot_sweeps < 0 || pilot_runs < 1) {
    throw ConfigError("pilot_size and pilot_runs must be positive and pilot_sweeps >= 0");
  }
}

int LocalChainConfig::allocation_stride() const {
  if (record_allocations_every > 0) return record_allocations_every;
  return std::max(1, (n_iters - burn_in) / 100);
}

int count_occupied(std::span<const int> labels, int K) {
  std::vector<char> seen(K, 0);
  int occupied = 0;
  for (int c : labels) {
    if (!seen[c]) {
      seen[c] = 1;
      ++occupied;
    }
  }
  return occupied;
}

AllocationProbabilities allocation_probabilities(const Vector& y, const ModelParams& params) {
  const int K = params.num_clusters();
  const int L = params.num_subcomponents();
  const KernelTable table(params);
  std::vector<double> logw(static_cast<std::size_t>(K) * L);
  table.evaluate(y.data(), logw);
  AllocationProbabilities out{Vector(K), Matrix(K, L)};
  std::vector<double> cluster_log(K);
  for (int k = 0; k < K; ++k) {
    std::span<const double> row(&logw[static_cast<std::size_t>(k) * L], static_cast<std::size_t>(L));
    cluster_log[k] = stats::log_sum_exp(row);
    for (int l = 0; l < L; ++l) {
      out.subcomponent(k, l) = std::isfinite(cluster_log[k]) ? std::exp(row[l] - cluster_log[k]) : 1.0 / L;
    }
  }
  const double total = stats::log_sum_exp(cluster_log);
  for (int k = 0; k < K; ++k) out.cluster[k] = std::exp(cluster_log[k] - total);
  return out;
}

namespace {

void sample_allocations(const Shard& shard, const ModelParams& params, AllocationState& alloc, Rng& rng) {
  const int K = params.num_clusters();
  const int L = params.num_subcomponents();
  const KernelTable table(params);
  std::vector<double> logw(static_cast<std::size_t>(K) * L);
  std::vector<double> cluster_log(K);
  for (int i = 0; i < shard.size(); ++i) {
    table.evaluate(shard.points.col(i).data(), logw);
    for (int k = 0; k < K; ++k) {
      cluster_log[k] = stats::log_sum_exp(
          std::span<const double>(&logw[static_cast<std::size_t>(k) * L], static_cast<std::size_t>(L)));
    }
    const int k = static_cast<int>(stats::log_categorical_sample(cluster_log, rng));
    alloc.c[i] = k;
    alloc.s[i] = static_cast<int>(stats::log_categorical_sample(
        std::span<const double>(&logw[static_cast<std::size_t>(k) * L], static_cast<std::size_t>(L)), rng));
  }
}

}  // namespace

void gibbs_sweep(const Shard& shard, ModelParams& params, AllocationState& alloc,
                 const Hyperparams& hp, Rng& rng) {
  const int K = params.num_clusters();
  const int L = params.num_subcomponents();
  const int d = shard.dim();
  const int n = shard.size();

  // A.1 cluster weights
  std::vector<double> cluster_counts(K, 0.0);
  for (int i = 0; i < n; ++i) cluster_counts[alloc.c[i]] += 1.0;
  params.eta = stats::sample_dirichlet(conditional::weight_concentration(cluster_counts, hp.e0), rng);

  // A.2 cluster labels; B.1 subcomponent labels from the same table, which is
  // valid because cluster k's parameters are untouched until its B.2 step.
  sample_allocations(shard, params, alloc, rng);

  // B.2 and C: sums and scatter about the current subcomponent means.
  std::vector<conditional::SubcomponentSums> sums(static_cast<std::size_t>(K) * L);
  for (auto& s : sums) {
    s.sum = Vector::Zero(d);
    s.scatter = Matrix::Zero(d, d);
  }
  for (int i = 0; i < n; ++i) {
    const int k = alloc.c[i];
    const int l = alloc.s[i];
    auto& s = sums[static_cast<std::size_t>(k) * L + l];
    const auto y = shard.points.col(i);
    const Vector diff = y - params.clusters[k].mu[l];
    s.n += 1.0;
    s.sum += y;
    s.scatter.noalias() += diff * diff.transpose();
  }
  for (int k = 0; k < K; ++k) {
    try {
      conditional::update_cluster(
          params.clusters[k],
          std::span<const conditional::SubcomponentSums>(&sums[static_cast<std::size_t>(k) * L],
                                                         static_cast<std::size_t>(L)),
          hp, conditional::LambdaMeans::kCurrent, rng);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [cluster " + std::to_string(k + 1) + "]");
    }
  }
}

std::pair<ModelParams, AllocationState> initialize_chain(const Shard& shard, const Hyperparams& hp,
                                                         int K, int L, Rng& rng) {
  const int n = shard.size();
  const int d = shard.dim();
  AllocationState alloc{std::vector<int>(n, 0), std::vector<int>(n, 0)};
  const auto top = kmeans(shard.points, std::min(K, n), 20, rng);
  alloc.c = top.labels;

  for (int k = 0; k < K; ++k) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (alloc.c[i] == k) members.push_back(i);
    }
    if (members.empty()) continue;
    Matrix sub(d, static_cast<Eigen::Index>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m) sub.col(static_cast<Eigen::Index>(m)) = shard.points.col(members[m]);
    const auto seeds = kmeanspp_seeds(sub, std::min<int>(L, static_cast<int>(members.size())), rng);
    for (std::size_t m = 0; m < members.size(); ++m) {
      int best = 0;
      double best_dist = (sub.col(static_cast<Eigen::Index>(m)) - sub.col(seeds[0])).squaredNorm();
      for (int l = 1; l < static_cast<int>(seeds.size()); ++l) {
        const double dd = (sub.col(static_cast<Eigen::Index>(m)) - sub.col(seeds[l])).squaredNorm();
        if (dd < best_dist) {
          best_dist = dd;
          best = l;
        }
      }
      alloc.s[members[m]] = best;
    }
  }

  ModelParams params = moment_params(local_suff_stats(shard, alloc, K, L), hp, rng);
  return {std::move(params), std::move(alloc)};
}

std::pair<ModelParams, AllocationState> pilot_initialize(const Shard& shard, const Hyperparams& hp,
                                                         const LocalChainConfig& cfg, Rng& rng) {
  const int n = shard.size();
  if (cfg.pilot_sweeps == 0) return initialize_chain(shard, hp, cfg.K, cfg.L, rng);
  const int m = std::min(n, cfg.pilot_size);
  std::vector<int> index(n);
  for (int i = 0; i < n; ++i) index[i] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(index[i], index[j]);
  }
  index.resize(m);
  std::sort(index.begin(), index.end());
  Shard pilot;
  pilot.worker_id = shard.worker_id;
  pilot.points.resize(shard.dim(), m);
  for (int i = 0; i < m; ++i) pilot.points.col(i) = shard.points.col(index[i]);

  // Independent pilots; keep the sparsest, then the best fit to the shard.
  ModelParams best;
  int best_occupied = cfg.K + 1;
  double best_loglik = -std::numeric_limits<double>::infinity();
  for (int run = 0; run < cfg.pilot_runs; ++run) {
    auto [params, pilot_alloc] = initialize_chain(pilot, hp, cfg.K, cfg.L, rng);
    for (int sweep = 0; sweep < cfg.pilot_sweeps; ++sweep) gibbs_sweep(pilot, params, pilot_alloc, hp, rng);
    const int occupied = count_occupied(pilot_alloc.c, cfg.K);
    if (occupied > best_occupied) continue;
    double loglik = 0.0;
    const KernelTable table(params);
    std::vector<double> logw(static_cast<std::size_t>(cfg.K) * cfg.L);
    for (int i = 0; i < n; ++i) {
      table.evaluate(shard.points.col(i).data(), logw);
      loglik += stats::log_sum_exp(logw);
    }
    if (occupied < best_occupied || loglik > best_loglik) {
      best_occupied = occupied;
      best_loglik = loglik;
      best = std::move(params);
    }
  }
  const ModelParams& params = best;
  AllocationState alloc{std::vector<int>(n, 0), std::vector<int>(n, 0)};
  sample_allocations(shard, params, alloc, rng);
  return {params, std::move(alloc)};
}

LocalTrace run_local_chain(const Shard& shard, const Hyperparams& hp, const LocalChainConfig& cfg) {
  cfg.validate();
  if (shard.size() < 1) throw ParameterError("local chain needs a nonempty shard");
  Rng rng(cfg.seed);
  auto [params, alloc] = pilot_initialize(shard, hp, cfg, rng);
  auto trace = std::make_shared<LocalTrace>();
  const int stride = cfg.allocation_stride();
  for (int iter = 1; iter <= cfg.n_iters; ++iter) {
    try {
      ModelParams next_params = params;
      AllocationState next_alloc = alloc;
      gibbs_sweep(shard, next_params, next_alloc, hp, rng);
      params = std::move(next_params);
      alloc = std::move(next_alloc);
    } catch (const NumericalError& e) {
      trace->last_params = params;
      throw ChainAborted("local chain on worker " + std::to_string(shard.worker_id) +
                             " failed at sweep " + std::to_string(iter) + ": " + e.what(),
                         iter, trace);
    }
    if (iter % cfg.thin == 0) trace->occupied_clusters.push_back(count_occupied(alloc.c, cfg.K));
    if (iter > cfg.burn_in && (iter - cfg.burn_in) % stride == 0) {
      trace->samples.push_back({iter, alloc});
    }
  }
  trace->last_params = std::move(params);
  return std::move(*trace);
}

}  // namespace dibc

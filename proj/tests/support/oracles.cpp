#include "support/oracles.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "dibc/conditionals.hpp"
#include "dibc/estimation.hpp"
#include "dibc/kmeans.hpp"
#include "dibc/model.hpp"
#include "dibc/param_sampler.hpp"
#include "dibc/protocol.hpp"
#include "dibc/transport.hpp"

namespace dibc::check {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Normal-NIW posterior quantities of a 1-d group (prior mean 0, kappa0 = 1),
// straight from the raw values.
struct Niw1 {
  double kappa, nu, m, S;
};

Niw1 niw_from_values(const std::vector<double>& ys, double nu0, double s0) {
  const double n = static_cast<double>(ys.size());
  double mean = 0.0;
  for (double y : ys) mean += y;
  if (n > 0) mean /= n;
  double centered = 0.0;
  for (double y : ys) centered += (y - mean) * (y - mean);
  return {1.0 + n, nu0 + n, n * mean / (1.0 + n), s0 + centered + n / (1.0 + n) * mean * mean};
}

double log_t1(double y, double loc, double scale, double df) {
  const double z = (y - loc) * (y - loc) / (df * scale);
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * kPi * scale) -
         0.5 * (df + 1.0) * std::log1p(z);
}

double log_predictive_1d(double y, const std::vector<double>& group, double nu0, double s0) {
  const auto p = niw_from_values(group, nu0, s0);
  const double df = p.nu;  // nu - d + 1 with d = 1
  return log_t1(y, p.m, (p.kappa + 1.0) / (p.kappa * df) * p.S, df);
}

Shard make_shard(int worker, const std::vector<double>& values, std::int64_t first_row) {
  Shard sh;
  sh.worker_id = worker;
  sh.points.resize(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    sh.points(0, static_cast<Eigen::Index>(i)) = values[i];
    sh.row_ids.push_back(first_row + static_cast<std::int64_t>(i));
  }
  return sh;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double rel_err(const Matrix& got, const Matrix& want) {
  if (got.rows() != want.rows() || got.cols() != want.cols()) return INFINITY;
  return max_abs(got - want) / std::max(max_abs(want), 1e-300);
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

Matrix lu_inverse(const Matrix& a) { return a.fullPivLu().inverse(); }

}  // namespace

// ---- refinement ----

RefinementScenario refinement_scenario(int ref_items, int other_items, std::uint64_t seed) {
  Rng rng(seed, 11);
  RefinementScenario sc;
  const int counts[2] = {ref_items, other_items};
  std::int64_t row = 0;
  for (int w = 0; w < 2; ++w) {
    std::vector<double> values;
    AllocationState alloc;
    for (int b = 0; b < counts[w]; ++b) {
      const double center = 0.6 * b + 0.3 * w;
      const int size = 2 + static_cast<int>(rng.below(2));
      for (int i = 0; i < size; ++i) {
        values.push_back(center + 0.7 * rng.normal());
        alloc.c.push_back(b);
        alloc.s.push_back(0);
      }
    }
    sc.shards.push_back(make_shard(w, values, row));
    row += static_cast<std::int64_t>(values.size());
    sc.per_worker.push_back(extract_items(alloc, sc.shards.back(), counts[w], 1));
  }
  for (const auto& list : sc.per_worker) sc.items.insert(sc.items.end(), list.begin(), list.end());
  sc.prior.alpha0 = 1.0;
  sc.prior.nu0 = 3.0;
  sc.prior.S0 = Matrix::Constant(1, 1, 0.8);
  return sc;
}

std::map<std::vector<int>, double> exact_sweep_distribution(const RefinementScenario& sc, const GroupState& start) {
  const int B = static_cast<int>(sc.items.size());
  const int H = start.H;
  const double alpha = sc.prior.alpha0;
  const double nu0 = sc.prior.nu0, s0 = sc.prior.S0(0, 0);

  std::vector<std::vector<double>> values(B);
  double N = 0.0;
  for (int b = 0; b < B; ++b) {
    const auto& it = sc.items[b];
    for (int i : it.member_indices) values[b].push_back(sc.shards[it.worker].points(0, i));
    N += static_cast<double>(values[b].size());
  }
  std::vector<int> order;
  for (int w : {start.reference, 1 - start.reference}) {
    std::vector<int> part;
    for (int b = 0; b < B; ++b) {
      if (sc.items[b].worker == w) part.push_back(b);
    }
    std::sort(part.begin(), part.end(),
              [&](int a, int b) { return sc.items[a].within_index < sc.items[b].within_index; });
    order.insert(order.end(), part.begin(), part.end());
  }

  auto conditional = [&](const std::vector<int>& z, int b) {
    std::vector<double> logp(H);
    const double nb = static_cast<double>(values[b].size());
    for (int h = 1; h <= H; ++h) {
      std::vector<double> pooled;
      for (int o = 0; o < B; ++o) {
        if (o != b && z[o] == h) pooled.insert(pooled.end(), values[o].begin(), values[o].end());
      }
      const double rest = static_cast<double>(pooled.size());
      double lp = std::lgamma(N + H * alpha - nb) + std::lgamma(rest + nb + alpha) - std::lgamma(N + H * alpha) -
                  std::lgamma(rest + alpha);
      for (double y : values[b]) lp += log_predictive_1d(y, pooled, nu0, s0);
      logp[h - 1] = lp;
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    for (auto& v : logp) total += (v = std::exp(v - top));
    for (auto& v : logp) v /= total;
    return logp;
  };

  std::map<std::vector<int>, double> out;
  std::function<void(std::vector<int>&, std::size_t, double)> walk = [&](std::vector<int>& z, std::size_t pos,
                                                                         double prob) {
    if (pos == order.size()) {
      out[z] += prob;
      return;
    }
    const int b = order[pos];
    const auto p = conditional(z, b);
    const int keep = z[b];
    for (int h = 1; h <= H; ++h) {
      z[b] = h;
      walk(z, pos + 1, prob * p[h - 1]);
    }
    z[b] = keep;
  };
  auto z = start.z;
  walk(z, 0, 1.0);
  return out;
}

Outcome refinement_equivalence(int ref_items, int other_items, int sweeps, std::uint64_t seed) {
  const auto sc = refinement_scenario(ref_items, other_items, seed);
  const auto start = init_groups(sc.items, 0);
  const int B = static_cast<int>(sc.items.size()), H = start.H;

  std::vector<double> exact(static_cast<std::size_t>(B * H), 0.0);
  for (const auto& [z, p] : exact_sweep_distribution(sc, start)) {
    for (int b = 0; b < B; ++b) exact[b * H + z[b] - 1] += p;
  }

  LocalLikelihoodSource source(sc.shards, sc.per_worker);
  Rng rng(seed, 12);
  std::vector<double> hits(exact.size(), 0.0);
  for (int s = 0; s < sweeps; ++s) {
    const auto res = refine_sweep(sc.items, start, sc.prior, source, rng);
    for (int b = 0; b < B; ++b) hits[b * H + res.state.z[b] - 1] += 1.0;
  }

  double worst = 0.0;
  bool ok = true;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double f = hits[i] / sweeps, p = exact[i];
    const double se = std::sqrt(p * (1.0 - p) / sweeps);
    if (se == 0.0) {
      ok = ok && f == p;
      continue;
    }
    worst = std::max(worst, std::abs(f - p) / se);
  }
  ok = ok && worst <= 3.0;
  return {ok, "B=" + std::to_string(B) + " H=" + std::to_string(H) + " cells=" + std::to_string(exact.size()) +
                  " max |f-p|/se=" + fmt(worst)};
}

Outcome merge_and_split(std::uint64_t seed) {
  Rng rng(seed, 13);
  const int K = 3, L = 2;
  auto clump = [&](double center, int n, std::vector<double>& v, AllocationState& a, int c, int s) {
    for (int i = 0; i < n; ++i) {
      v.push_back(center + rng.normal());
      a.c.push_back(c);
      a.s.push_back(s);
    }
  };
  auto run = [&](bool merge) {
    std::vector<double> v0, v1;
    AllocationState a0, a1;
    clump(0.0, 40, v0, a0, 0, 0);
    clump(20.0, 40, v0, a0, 1, 0);
    if (merge) {
      clump(0.0, 20, v1, a1, 0, 0);
      clump(0.0, 20, v1, a1, 1, 0);
      clump(20.0, 40, v1, a1, 2, 0);
    } else {
      clump(0.0, 40, v1, a1, 0, 0);
      clump(20.0, 40, v1, a1, 0, 1);
    }
    std::vector<Shard> shards{make_shard(0, v0, 0), make_shard(1, v1, static_cast<std::int64_t>(v0.size()))};
    std::vector<std::vector<ItemStats>> per{extract_items(a0, shards[0], K, L), extract_items(a1, shards[1], K, L)};
    std::vector<ItemStats> items(per[0]);
    items.insert(items.end(), per[1].begin(), per[1].end());
    std::vector<double> all(v0);
    all.insert(all.end(), v1.begin(), v1.end());
    double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size()), var = 0.0;
    for (double y : all) var += (y - mean) * (y - mean) / static_cast<double>(all.size() - 1);
    const auto prior = RefinementPrior::defaults(Matrix::Constant(1, 1, var));

    LocalLikelihoodSource source(shards, per);
    auto state = init_groups(items, 0);
    RefinementResult res;
    for (int s = 0; s < 5; ++s) {
      res = refine_sweep(items, state, prior, source, rng);
      state = res.state;
    }
    const std::vector<int> tail(res.z_tilde.begin() + static_cast<std::ptrdiff_t>(per[0].size()), res.z_tilde.end());
    const auto refined = apply_labels(tail, per[1], L, shards[1].size());
    const auto before = std::set<int>(a1.c.begin(), a1.c.end()).size();
    const auto after = std::set<int>(refined.c.begin(), refined.c.end()).size();
    return std::pair<std::size_t, std::size_t>(before, after);
  };
  const auto [mb, ma] = run(true);
  const auto [sb, sa] = run(false);
  const bool ok = ma < mb && sa > sb;
  return {ok, "merge " + std::to_string(mb) + "->" + std::to_string(ma) + ", split " + std::to_string(sb) + "->" +
                  std::to_string(sa) + " clusters"};
}

// ---- predictive density ----

double predictive_by_quadrature(double y, const std::vector<double>& group, double nu0, double s0) {
  // sigma^2 ~ InvGamma(nu/2, S/2), mu | sigma^2 ~ N(m, sigma^2/kappa), y | mu, sigma^2 ~ N(mu, sigma^2).
  // The mean integrates out in closed form; the variance is integrated on a log grid.
  const auto p = niw_from_values(group, nu0, s0);
  const double a = 0.5 * p.nu, b = 0.5 * p.S;
  const double inflate = 1.0 + 1.0 / p.kappa;
  auto log_f = [&](double u) {
    const double v = std::exp(u);
    const double var = v * inflate;
    const double log_normal = -0.5 * std::log(2.0 * kPi * var) - 0.5 * (y - p.m) * (y - p.m) / var;
    const double log_ig = a * std::log(b) - std::lgamma(a) - (a + 1.0) * u - b / v;
    return log_normal + log_ig + u;
  };
  const double centre = std::log(b / a);
  const double lo = centre - 40.0, hi = centre + 40.0 + 200.0 / a;
  const int n = 200000;  // even
  const double h = (hi - lo) / n;
  std::vector<double> logs(n + 1);
  for (int i = 0; i <= n; ++i) logs[i] = log_f(lo + h * i);
  const double top = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * std::exp(logs[i] - top);
  }
  return top + std::log(sum * h / 3.0);
}

Outcome predictive_density(std::uint64_t seed) {
  Rng rng(seed, 14);
  double worst = 0.0;
  int cases = 0;
  for (int g = 0; g < 6; ++g) {
    std::vector<double> group;
    const int n = g == 0 ? 0 : 1 + static_cast<int>(rng.below(12));
    const double shift = 3.0 * rng.normal();
    for (int i = 0; i < n; ++i) group.push_back(shift + 1.5 * rng.normal());
    const double nu0 = 3.0 + g, s0 = 0.5 + g;
    GroupSuffStats q;
    q.n = n;
    q.mean = Vector::Zero(1);
    q.second_moment = Matrix::Zero(1, 1);
    for (double v : group) {
      q.mean[0] += v / n;
      q.second_moment(0, 0) += v * v / n;
    }
    RefinementPrior prior;
    prior.alpha0 = 1.0;
    prior.nu0 = nu0;
    prior.S0 = Matrix::Constant(1, 1, s0);
    for (double y : {-4.0, -0.3, 0.0, 1.7, 6.0}) {
      const Matrix pts = Matrix::Constant(1, 1, y);
      const std::vector<int> rows{0};
      const double lib = group_marginal_loglik(rows, pts, q, prior);
      worst = std::max(worst, std::abs(lib - predictive_by_quadrature(y, group, nu0, s0)));
      ++cases;
    }
  }
  return {worst <= 1e-6, std::to_string(cases) + " cases, max |diff| = " + fmt(worst)};
}

// ---- conjugate updates ----

Outcome conjugate_updates(std::uint64_t seed) {
  Rng rng(seed, 15);
  const int K = 2, L = 3, d = 2, n = 10;
  Shard shard;
  shard.points.resize(d, n);
  for (int i = 0; i < n; ++i) {
    shard.points(0, i) = (i < 5 ? 0.0 : 4.0) + rng.normal();
    shard.points(1, i) = (i < 5 ? 1.0 : -2.0) + 0.5 * rng.normal();
    shard.row_ids.push_back(i);
  }
  // Subcomponent (1, 2) is left empty on purpose.
  const AllocationState alloc{{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, {0, 0, 1, 1, 2, 0, 0, 0, 1, 1}};
  const auto [mean, cov] = data_moments(shard.points);
  const auto hp = elicit_priors(mean, cov, 0.5, 0.1, K, L);
  const auto params = sample_prior(hp, K, L, rng);
  const auto stats = local_suff_stats(shard, alloc, K, L);

  double worst = 0.0;
  auto track = [&](double e) { worst = std::max(worst, e); };

  // eta
  {
    std::vector<double> counts(K);
    for (int k = 0; k < K; ++k) counts[k] = static_cast<double>(stats.cluster_count(k));
    const Vector got = conditional::weight_concentration(counts, hp.e0);
    Vector want = Vector::Constant(K, hp.e0);
    for (int c : alloc.c) want[c] += 1.0;
    track(rel_err(got, want));
  }

  for (int k = 0; k < K; ++k) {
    const auto& cl = params.clusters[k];

    // omega_k
    std::vector<double> counts(L);
    for (int l = 0; l < L; ++l) counts[l] = static_cast<double>(stats.count[stats.index(k, l)]);
    Vector want_w = Vector::Constant(L, hp.d0);
    for (int i = 0; i < n; ++i) {
      if (alloc.c[i] == k) want_w[alloc.s[i]] += 1.0;
    }
    track(rel_err(conditional::weight_concentration(counts, hp.d0), want_w));

    Matrix b_tilde(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) b_tilde(i, j) = std::sqrt(cl.lambda[i] * cl.lambda[j]) * hp.B0(i, j);
    }
    track(rel_err(conditional::mean_prior_cov(hp.B0, cl.lambda), b_tilde));
    const Matrix b_tilde_inv = lu_inverse(b_tilde);

    for (int l = 0; l < L; ++l) {
      const auto idx = stats.index(k, l);
      const double nkl = static_cast<double>(stats.count[idx]);

      // Sigma^{-1}_kl
      Matrix scatter = Matrix::Zero(d, d);
      Vector sum = Vector::Zero(d);
      for (int i = 0; i < n; ++i) {
        if (alloc.c[i] != k || alloc.s[i] != l) continue;
        const Vector diff = shard.points.col(i) - cl.mu[l];
        scatter += diff * diff.transpose();
        sum += shard.points.col(i);
      }
      const auto wp = conditional::precision_posterior(
          hp.c0, cl.C0, nkl, conditional::scatter_about(stats.outer[idx], stats.sum[idx], nkl, cl.mu[l]));
      track(rel_err(wp.df, hp.c0 + nkl));
      track(rel_err(wp.inverse_scale, cl.C0 + scatter));

      // mu_kl
      const Matrix B = lu_inverse(b_tilde_inv + nkl * cl.precision[l]);
      const Vector b = B * (b_tilde_inv * cl.b0 + cl.precision[l] * sum);
      const auto np = conditional::mean_posterior(cl.b0, conditional::mean_prior_cov(hp.B0, cl.lambda),
                                                  cl.precision[l], nkl, stats.sum[idx]);
      track(rel_err(np.cov, B));
      track(rel_err(np.mean, b));
    }

    // lambda_kj
    for (int j = 0; j < d; ++j) {
      double bkj = 0.0;
      for (int l = 0; l < L; ++l) bkj += std::pow(cl.mu[l][j] - cl.b0[j], 2) / hp.B0(j, j);
      const auto gp = conditional::lambda_posterior(j, hp.nu, cl.mu, cl.b0, hp.B0);
      track(rel_err(gp.p, hp.nu - L / 2.0));
      track(rel_err(gp.a, 2.0 * hp.nu));
      track(rel_err(gp.b, bkj));
    }

    // C0k
    Matrix scale = hp.G0;
    for (int l = 0; l < L; ++l) scale += lu_inverse(cl.sigma[l]);
    const auto cp = conditional::cluster_scale_posterior(hp.g0, hp.c0, hp.G0, cl.precision);
    track(rel_err(cp.df, hp.g0 + L * hp.c0));
    track(rel_err(cp.inverse_scale, scale));

    // b0k
    const Matrix M0_inv = lu_inverse(hp.M0);
    const Matrix Mk = lu_inverse(M0_inv + L * b_tilde_inv);
    Vector mu_sum = Vector::Zero(d);
    for (const auto& mu : cl.mu) mu_sum += mu;
    const Vector mk = Mk * (M0_inv * hp.m0 + b_tilde_inv * mu_sum);
    const auto bp = conditional::center_posterior(hp.m0, hp.M0, conditional::mean_prior_cov(hp.B0, cl.lambda), cl.mu);
    track(rel_err(bp.cov, Mk));
    track(rel_err(bp.mean, mk));
  }
  return {worst <= 1e-10, "max relative error " + fmt(worst)};
}

// ---- metrics ----

BrutePairs brute_pairs(const std::vector<int>& truth, const std::vector<int>& pred) {
  BrutePairs p;
  const std::size_t n = truth.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool t = truth[i] == truth[j], q = pred[i] == pred[j];
      if (t && q) ++p.tp;
      else if (q) ++p.fp;
      else if (t) ++p.fn;
      else ++p.tn;
    }
  }
  return p;
}

std::int64_t brute_best_matches(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::vector<int> tl(truth), pl(pred);
  std::sort(tl.begin(), tl.end());
  tl.erase(std::unique(tl.begin(), tl.end()), tl.end());
  std::sort(pl.begin(), pl.end());
  pl.erase(std::unique(pl.begin(), pl.end()), pl.end());
  std::vector<std::vector<std::int64_t>> hits(pl.size(), std::vector<std::int64_t>(tl.size(), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto a = std::find(pl.begin(), pl.end(), pred[i]) - pl.begin();
    const auto b = std::find(tl.begin(), tl.end(), truth[i]) - tl.begin();
    ++hits[a][b];
  }
  std::vector<char> used(tl.size(), 0);
  std::function<std::int64_t(std::size_t)> best = [&](std::size_t a) -> std::int64_t {
    if (a == pl.size()) return 0;
    std::int64_t top = best(a + 1);  // left without a class
    for (std::size_t b = 0; b < tl.size(); ++b) {
      if (used[b]) continue;
      used[b] = 1;
      top = std::max(top, hits[a][b] + best(a + 1));
      used[b] = 0;
    }
    return top;
  };
  return best(0);
}

Outcome metric_agreement(int pairs, int n, std::uint64_t seed) {
  Rng rng(seed, 16);
  bool counts_ok = true;
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const int kt = 1 + static_cast<int>(rng.below(6)), kp = 1 + static_cast<int>(rng.below(6));
    std::vector<int> truth(n), pred(n);
    for (auto& t : truth) t = 1 + static_cast<int>(rng.below(kt));
    const bool related = p % 2 == 0;
    for (int i = 0; i < n; ++i) {
      if (related && rng.uniform() < 0.8) {
        pred[i] = 10 + (truth[i] * 7) % 6;
      } else {
        pred[i] = 10 + static_cast<int>(rng.below(kp));
      }
    }
    const auto m = compute_metrics(truth, pred);
    const auto bp = brute_pairs(truth, pred);
    counts_ok = counts_ok && m.pairs.tp == bp.tp && m.pairs.fp == bp.fp && m.pairs.fn == bp.fn && m.pairs.tn == bp.tn;
    const double tp = bp.tp, fp = bp.fp, fn = bp.fn, tn = bp.tn;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 1.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 1.0;
    const double f = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    const double denom = (tp + fn) * (fn + tn) + (tp + fp) * (fp + tn);
    const double ari = denom == 0.0 ? 1.0 : 2.0 * (tp * tn - fn * fp) / denom;
    const double acc = static_cast<double>(brute_best_matches(truth, pred)) / n;
    worst = std::max({worst, std::abs(m.f_measure - f), std::abs(m.ari - ari), std::abs(m.accuracy - acc)});
  }
  return {counts_ok && worst <= 1e-12, std::to_string(pairs) + " pairs, n=" + std::to_string(n) +
                                           ", pair counts " + (counts_ok ? "exact" : "MISMATCH") +
                                           ", max metric diff " + fmt(worst)};
}

// ---- runtime ----

namespace {

class RecordingTransport : public InProcessTransport {
 public:
  using InProcessTransport::InProcessTransport;
  std::vector<wire::Frame> replies;

 protected:
  std::vector<std::uint8_t> receive_bytes(int r) override {
    auto bytes = InProcessTransport::receive_bytes(r);
    replies.push_back(wire::decode_frame(bytes));
    return bytes;
  }
};

double entropy(const std::map<int, std::int64_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

}  // namespace

Outcome distributed_serial_identity(int N, int R, int T, int M, std::uint64_t seed) {
  const auto data = generate_synthetic(N, seed);
  PipelineConfig cfg;
  cfg.R = R;
  cfg.chain.n_iters = 200;
  cfg.chain.burn_in = 100;
  cfg.chain.pilot_sweeps = 100;
  cfg.refine_samples = T;
  cfg.candidates = M;
  cfg.sample_parameters = false;
  cfg.seed = seed;
  RecordingTransport transport(R);
  const auto result = run_pipeline(cfg, data.points, transport);
  const auto& diag = result.diagnostics;
  if (!diag.dropped_samples.empty()) return {false, "samples were dropped"};

  std::vector<std::vector<int>> full(T, std::vector<int>(N, -1));
  for (int r = 0; r < R; ++r) {
    const auto& w = transport.worker(r);
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < w.shard().size(); ++i) full[t][w.shard().row_ids[i]] = w.samples()[t].c[i];
    }
  }

  std::map<int, CandidateCounts> distributed;
  for (const auto& f : transport.replies) {
    if (f.kind != wire::MessageKind::kCountsUpload) continue;
    wire::ByteReader in(f.payload);
    const auto part = wire::get_counts(in);
    auto& into = distributed[static_cast<int>(f.correlation >> 32)];
    into.joint.resize(part.joint.size());
    for (const auto& [k, v] : part.marginal) into.marginal[k] += v;
    for (std::size_t t = 0; t < part.joint.size(); ++t) {
      for (const auto& [k, v] : part.joint[t]) into.joint[t][k] += v;
    }
  }

  bool counts_ok = static_cast<int>(distributed.size()) == M;
  double worst = 0.0;
  const double n = N;
  std::vector<double> h_t(T);
  for (int t = 0; t < T; ++t) {
    std::map<int, std::int64_t> c;
    for (int v : full[t]) ++c[v];
    h_t[t] = entropy(c, n);
  }
  for (std::size_t i = 0; i < diag.candidate_tags.size(); ++i) {
    const int cand = diag.candidate_tags[i];
    std::map<int, std::int64_t> marginal;
    for (int v : full[cand]) ++marginal[v];
    const double h_cand = entropy(marginal, n);
    double mean_vi = 0.0, mean_h = 0.0;
    const auto it = distributed.find(cand);
    if (it == distributed.end() || it->second.marginal != marginal) counts_ok = false;
    for (int t = 0; t < T; ++t) {
      PairTable joint;
      for (int r = 0; r < N; ++r) ++joint[{full[t][r], full[cand][r]}];
      if (it != distributed.end() && (static_cast<int>(it->second.joint.size()) != T || it->second.joint[t] != joint)) {
        counts_ok = false;
      }
      double h_joint = 0.0;
      for (const auto& [k, v] : joint) h_joint -= v / n * std::log(v / n);
      mean_vi += (2.0 * h_joint - h_t[t] - h_cand) / T;
      mean_h += h_t[t] / T;
    }
    // The reported score omits the candidate-independent mean entropy.
    worst = std::max(worst, std::abs(diag.candidate_scores[i] - (mean_vi + mean_h)));
  }
  return {counts_ok && worst <= 1e-12,
          std::to_string(diag.candidate_tags.size()) + " candidates, joint counts " +
              (counts_ok ? "identical" : "DIFFER") + ", max score diff " + fmt(worst)};
}

PipelineConfig recovery_config(int R, std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.R = R;
  cfg.K = 10;
  cfg.L = 3;
  cfg.chain.n_iters = 1000;
  cfg.chain.burn_in = 500;
  cfg.refine_samples = 100;
  cfg.candidates = 20;
  cfg.seed = seed;
  return cfg;
}

FitSummary summarize_fit(const PipelineResult& result, const std::vector<int>& truth, double seconds) {
  FitSummary s;
  s.clusters = static_cast<int>(std::set<int>(result.c_star.begin(), result.c_star.end()).size());
  s.ari = compute_metrics(truth, result.c_star).ari;
  s.seconds = seconds;
  return s;
}

Matrix blob_data(int n, std::uint64_t seed) {
  // Four clusters of two tight blobs each, far apart, so that a K = 4, L = 2
  // fit occupies every subcomponent at any n.
  Rng rng(seed, 18);
  Matrix pts(2, n);
  for (int i = 0; i < n; ++i) {
    const int blob = static_cast<int>(rng.below(8));
    const double cx = (blob / 2 % 2) * 60.0, cy = (blob / 4) * 60.0;
    const double off = blob % 2 == 0 ? -4.0 : 4.0;
    pts(0, i) = cx + off + rng.normal();
    pts(1, i) = cy + rng.normal();
  }
  return pts;
}

TrafficComparison communication_scaling(int n_small, int n_large, std::uint64_t seed) {
  auto run = [&](int n) {
    PipelineConfig cfg;
    cfg.R = 4;
    cfg.K = 4;
    cfg.L = 2;
    cfg.chain.n_iters = 300;
    cfg.chain.burn_in = 200;
    cfg.refine_samples = 20;
    cfg.candidates = 5;
    cfg.sample_parameters = false;
    cfg.seed = seed;
    const auto res = run_pipeline(cfg, blob_data(n, seed));
    std::uint64_t bytes = 0;
    for (const auto& s : res.diagnostics.steps) {
      if (s.name == "refinement" || s.name == "estimation") bytes += s.bytes_to_master;
    }
    const auto replies = res.diagnostics.traffic.messages_to_master[static_cast<int>(wire::MessageKind::kLoglikReply)];
    return std::pair<std::uint64_t, int>(bytes, static_cast<int>(replies));
  };
  TrafficComparison out;
  std::tie(out.small_bytes, out.small_items) = run(n_small);
  std::tie(out.large_bytes, out.large_items) = run(n_large);
  out.relative_change = std::abs(static_cast<double>(out.large_bytes) - static_cast<double>(out.small_bytes)) /
                        static_cast<double>(out.small_bytes);
  return out;
}

double predictive_mode_ari(const PosteriorDraws& draws, int m, std::uint64_t seed) {
  Rng rng(seed, 17);
  const auto sample = posterior_predictive_sample(draws, m, rng);
  const auto km = kmeans(sample.points, 4, 200, rng);
  return compute_metrics(sample.tags, km.labels).ari;
}

}  // namespace dibc::check

#include "dibc/param_sampler.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "dibc/conditionals.hpp"
#include "dibc/distributions.hpp"
#include "dibc/error.hpp"

namespace dibc {

FixedSuffStats FixedSuffStats::zeros(int K, int L, int d) {
  FixedSuffStats s;
  s.K = K;
  s.L = L;
  s.d = d;
  const auto n = static_cast<std::size_t>(K) * L;
  s.count.assign(n, 0);
  s.sum.assign(n, Vector::Zero(d));
  s.outer.assign(n, Matrix::Zero(d, d));
  return s;
}

std::int64_t FixedSuffStats::cluster_count(int k) const {
  std::int64_t n = 0;
  for (int l = 0; l < L; ++l) n += count[index(k, l)];
  return n;
}

std::int64_t FixedSuffStats::total() const {
  std::int64_t n = 0;
  for (auto c : count) n += c;
  return n;
}

void FixedSuffStats::add(const FixedSuffStats& other) {
  if (other.K != K || other.L != L || other.d != d) throw ParameterError("statistics tables differ in shape");
  for (std::size_t i = 0; i < count.size(); ++i) {
    count[i] += other.count[i];
    sum[i] += other.sum[i];
    outer[i] += other.outer[i];
  }
}

FixedSuffStats local_suff_stats(const Shard& shard, const AllocationState& alloc, int K, int L) {
  auto s = FixedSuffStats::zeros(K, L, shard.dim());
  if (static_cast<int>(alloc.c.size()) != shard.size()) throw ParameterError("allocation length does not match the shard");
  for (int i = 0; i < shard.size(); ++i) {
    const int k = alloc.c[i], l = alloc.s[i];
    if (k < 0 || k >= K || l < 0 || l >= L) throw ParameterError("allocation label out of range");
    const auto idx = s.index(k, l);
    const auto y = shard.points.col(i);
    ++s.count[idx];
    s.sum[idx] += y;
    s.outer[idx].noalias() += y * y.transpose();
  }
  return s;
}

FixedSuffStats drop_empty_clusters(const FixedSuffStats& stats, std::vector<int>& kept) {
  kept.clear();
  for (int k = 0; k < stats.K; ++k) {
    if (stats.cluster_count(k) > 0) kept.push_back(k);
  }
  auto out = FixedSuffStats::zeros(static_cast<int>(kept.size()), stats.L, stats.d);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (int l = 0; l < stats.L; ++l) {
      const auto from = stats.index(kept[j], l), to = out.index(static_cast<int>(j), l);
      out.count[to] = stats.count[from];
      out.sum[to] = stats.sum[from];
      out.outer[to] = stats.outer[from];
    }
  }
  return out;
}

ModelParams moment_params(const FixedSuffStats& stats, const Hyperparams& hp, Rng& rng) {
  const int K = stats.K, L = stats.L, d = stats.d;
  const Matrix C0_mean = hp.g0 * spd_inverse(hp.G0, "G0");
  ModelParams params;
  params.clusters.resize(K);
  Vector eta(K);
  for (int k = 0; k < K; ++k) {
    auto& cl = params.clusters[k];
    const double nk = static_cast<double>(stats.cluster_count(k));
    Vector sum_k = Vector::Zero(d);
    for (int l = 0; l < L; ++l) sum_k += stats.sum[stats.index(k, l)];
    eta[k] = nk + hp.e0;
    cl.b0 = nk > 0 ? Vector(sum_k / nk) : stats::sample_mvn(hp.m0, hp.M0, rng);
    cl.lambda = Vector::Ones(d);
    cl.C0 = C0_mean;
    cl.omega.resize(L);
    for (int l = 0; l < L; ++l) {
      const auto idx = stats.index(k, l);
      const double n = static_cast<double>(stats.count[idx]);
      cl.omega[l] = n + hp.d0;
      const Vector mu = n > 0 ? Vector(stats.sum[idx] / n) : cl.b0;
      const Matrix scatter = conditional::scatter_about(stats.outer[idx], stats.sum[idx], n, mu);
      const Matrix sigma = symmetrize((cl.C0 + scatter) / (hp.c0 + n - d - 1.0 + 1e-12));
      cl.mu.push_back(mu);
      cl.sigma.push_back(sigma);
      cl.precision.push_back(spd_inverse(sigma, "initial covariance"));
    }
    cl.omega /= cl.omega.sum();
  }
  params.eta = eta / eta.sum();
  return params;
}

void ParamChainConfig::validate() const {
  if (iters < 1) throw ConfigError("parameter chain needs at least one iteration");
  if (burn_in < 0 || burn_in >= iters) throw ConfigError("parameter chain burn_in must lie in [0, iters)");
}

PosteriorDraws run_param_chain(const FixedSuffStats& all_stats, const Hyperparams& hp, const ParamChainConfig& cfg) {
  cfg.validate();
  hp.validate();
  PosteriorDraws out;
  out.seed = cfg.seed;
  const auto stats = drop_empty_clusters(all_stats, out.cluster_ids);
  if (stats.K == 0) throw ParameterError("no occupied clusters to sample");
  const int K = stats.K, L = stats.L;
  Rng rng(cfg.seed);
  ModelParams params = moment_params(stats, hp, rng);
  std::vector<double> counts(K);
  for (int k = 0; k < K; ++k) counts[k] = static_cast<double>(stats.cluster_count(k));
  std::vector<conditional::SubcomponentSums> sums(L);
  out.draws.reserve(static_cast<std::size_t>(cfg.iters - cfg.burn_in));
  for (int iter = 1; iter <= cfg.iters; ++iter) {
    try {
      params.eta = stats::sample_dirichlet(conditional::weight_concentration(counts, hp.e0), rng);
      for (int k = 0; k < K; ++k) {
        auto& cl = params.clusters[k];
        for (int l = 0; l < L; ++l) {
          const auto idx = stats.index(k, l);
          const double n = static_cast<double>(stats.count[idx]);
          sums[l].n = n;
          sums[l].sum = stats.sum[idx];
          sums[l].scatter = conditional::scatter_about(stats.outer[idx], stats.sum[idx], n, cl.mu[l]);
        }
        try {
          conditional::update_cluster(cl, sums, hp, conditional::LambdaMeans::kPrevious, rng);
        } catch (const NumericalError& e) {
          throw NumericalError(std::string(e.what()) + " [cluster " + std::to_string(k + 1) + "]");
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("parameter chain failed at iteration " + std::to_string(iter) + ": " + e.what());
    }
    if (iter > cfg.burn_in) out.draws.push_back(params);
  }
  return out;
}

PredictiveSample posterior_predictive_sample(const PosteriorDraws& draws, int m, Rng& rng) {
  if (m < 0) throw ParameterError("predictive sample size must be nonnegative");
  PredictiveSample out;
  if (m == 0) return out;
  if (draws.draws.empty()) throw ParameterError("no stored draws");
  const int d = draws.draws.front().dim();
  out.points.resize(d, m);
  out.tags.resize(m);
  auto pick = [&rng](const Vector& w) {
    double u = rng.uniform() * w.sum();
    for (Eigen::Index i = 0; i + 1 < w.size(); ++i) {
      if (u < w[i]) return static_cast<int>(i);
      u -= w[i];
    }
    return static_cast<int>(w.size() - 1);
  };
  for (int i = 0; i < m; ++i) {
    const auto& p = draws.draws[rng.below(draws.draws.size())];
    const int k = pick(p.eta);
    const int l = pick(p.clusters[k].omega);
    out.points.col(i) = stats::sample_mvn(p.clusters[k].mu[l], p.clusters[k].sigma[l], rng);
    out.tags[i] = k;
  }
  return out;
}

Classification classify(const Vector& y, const PosteriorDraws& draws) {
  if (draws.draws.empty()) throw ParameterError("no stored draws");
  const int K = draws.draws.front().num_clusters();
  const int L = draws.draws.front().num_subcomponents();
  // Average of per-draw joint densities, kept in log space per draw.
  std::vector<std::vector<double>> logs(K);
  std::vector<double> logw(static_cast<std::size_t>(K) * L);
  for (const auto& p : draws.draws) {
    const KernelTable table(p);
    table.evaluate(y.data(), logw);
    for (int k = 0; k < K; ++k) {
      logs[k].push_back(stats::log_sum_exp(
          std::span<const double>(&logw[static_cast<std::size_t>(k) * L], static_cast<std::size_t>(L))));
    }
  }
  std::vector<double> cluster_log(K);
  for (int k = 0; k < K; ++k) cluster_log[k] = stats::log_sum_exp(logs[k]);
  const double total = stats::log_sum_exp(cluster_log);
  Classification out;
  out.probs.resize(K);
  if (!std::isfinite(total)) {
    out.probs.setConstant(1.0 / K);
  } else {
    for (int k = 0; k < K; ++k) out.probs[k] = std::exp(cluster_log[k] - total);
    out.probs /= out.probs.sum();
  }
  out.probs.maxCoeff(&out.label);
  return out;
}

namespace {

constexpr char kDrawsMagic[8] = {'D', 'I', 'B', 'C', 'D', 'R', 'W', '1'};
constexpr int kDrawsVersion = 1;

void put(std::ostream& out, const double* v, std::size_t n) {
  out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
}

void get(std::istream& in, double* v, std::size_t n) {
  in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("draws file is truncated");
}

}  // namespace

std::string save_draws(const PosteriorDraws& draws, const std::string& stem) {
  if (draws.draws.empty()) throw ParameterError("no draws to save");
  const auto& first = draws.draws.front();
  const int K = first.num_clusters(), L = first.num_subcomponents(), d = first.dim();
  const std::string bin_path = stem + ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path);
  bin.write(kDrawsMagic, sizeof(kDrawsMagic));
  for (const auto& p : draws.draws) {
    put(bin, p.eta.data(), K);
    for (const auto& cl : p.clusters) {
      put(bin, cl.omega.data(), L);
      for (int l = 0; l < L; ++l) put(bin, cl.mu[l].data(), d);
      for (int l = 0; l < L; ++l) put(bin, cl.sigma[l].data(), static_cast<std::size_t>(d) * d);
      put(bin, cl.b0.data(), d);
      put(bin, cl.C0.data(), static_cast<std::size_t>(d) * d);
      put(bin, cl.lambda.data(), d);
    }
  }
  if (!bin) throw IoError("failed writing " + bin_path);

  nlohmann::json manifest = {
      {"format", "dibc-draws"},
      {"version", kDrawsVersion},
      {"binary", bin_path.substr(bin_path.find_last_of('/') + 1)},
      {"draws", draws.draws.size()},
      {"clusters", K},
      {"subcomponents", L},
      {"dim", d},
      {"seed", draws.seed},
      {"cluster_ids", draws.cluster_ids},
      {"byte_order", "little"},
  };
  const std::string json_path = stem + ".json";
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path);
  js << manifest.dump(2) << '\n';
  return json_path;
}

PosteriorDraws load_draws(const std::string& manifest_path) {
  std::ifstream js(manifest_path);
  if (!js) throw IoError("cannot open " + manifest_path);
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path + ": " + e.what());
  }
  if (manifest.value("format", "") != "dibc-draws") throw IoError(manifest_path + ": not a draws manifest");
  if (manifest.value("version", 0) != kDrawsVersion) throw IoError(manifest_path + ": unsupported draws version");
  const auto slash = manifest_path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "" : manifest_path.substr(0, slash + 1);
  const std::string bin_path = dir + manifest.at("binary").get<std::string>();
  const auto count = manifest.at("draws").get<std::size_t>();
  const int K = manifest.at("clusters").get<int>();
  const int L = manifest.at("subcomponents").get<int>();
  const int d = manifest.at("dim").get<int>();

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path);
  char magic[sizeof(kDrawsMagic)];
  bin.read(magic, sizeof(magic));
  if (!bin || std::memcmp(magic, kDrawsMagic, sizeof(magic)) != 0) throw IoError(bin_path + ": bad magic");
  PosteriorDraws out;
  out.seed = manifest.at("seed").get<std::uint64_t>();
  out.cluster_ids = manifest.at("cluster_ids").get<std::vector<int>>();
  out.draws.resize(count);
  for (auto& p : out.draws) {
    p.eta.resize(K);
    get(bin, p.eta.data(), K);
    p.clusters.resize(K);
    for (auto& cl : p.clusters) {
      cl.omega.resize(L);
      get(bin, cl.omega.data(), L);
      cl.mu.assign(L, Vector(d));
      for (auto& m : cl.mu) get(bin, m.data(), d);
      cl.sigma.assign(L, Matrix(d, d));
      for (auto& s : cl.sigma) get(bin, s.data(), static_cast<std::size_t>(d) * d);
      cl.precision.clear();
      for (const auto& s : cl.sigma) cl.precision.push_back(spd_inverse(s, "stored covariance"));
      cl.b0.resize(d);
      get(bin, cl.b0.data(), d);
      cl.C0.resize(d, d);
      get(bin, cl.C0.data(), static_cast<std::size_t>(d) * d);
      cl.lambda.resize(d);
      get(bin, cl.lambda.data(), d);
    }
  }
  return out;
}

}  // namespace dibc

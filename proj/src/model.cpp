#include "dibc/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dibc/distributions.hpp"
#include "dibc/error.hpp"

namespace dibc {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void require_simplex(const Vector& w, const char* what) {
  if (w.size() == 0 || !w.allFinite() || (w.array() < 0.0).any() ||
      std::abs(w.sum() - 1.0) > 1e-12 * static_cast<double>(w.size())) {
    throw ParameterError(std::string(what) + " is not a valid simplex");
  }
}

}  // namespace

void Hyperparams::validate() const {
  const int d = dim();
  if (d < 1) throw ParameterError("hyperparameters need a positive dimension");
  if (!(e0 > 0.0)) throw ParameterError("e0 must be positive");
  if (!(d0 > 0.0)) throw ParameterError("d0 must be positive");
  if (!(nu > 0.0)) throw ParameterError("nu must be positive");
  if (!(c0 > d - 1.0)) throw ParameterError("c0 must exceed d - 1");
  if (!(g0 > d - 1.0)) throw ParameterError("g0 must exceed d - 1");
  if (G0.rows() != d || B0.rows() != d || M0.rows() != d) {
    throw ParameterError("hyperparameter matrices must be d x d");
  }
  require_spd(G0, "G0");
  require_spd(B0, "B0");
  require_spd(M0, "M0");
}

int cluster_parameter_dimension(int d, int L) { return L * (d + d * (d + 1) / 2) + (L - 1); }

bool sparsity_condition_holds(const Hyperparams& hp, int L, SparsityDimension which) {
  const int dim = which == SparsityDimension::kData ? hp.dim()
                                                    : cluster_parameter_dimension(hp.dim(), L);
  return hp.e0 < 0.5 * dim;
}

void ModelParams::validate() const {
  const int K = num_clusters();
  if (K < 1 || eta.size() != K) throw ParameterError("eta must have one weight per cluster");
  require_simplex(eta, "eta");
  const int L = num_subcomponents();
  const int d = dim();
  for (const auto& cl : clusters) {
    if (cl.omega.size() != L || static_cast<int>(cl.mu.size()) != L ||
        static_cast<int>(cl.sigma.size()) != L || static_cast<int>(cl.precision.size()) != L ||
        cl.b0.size() != d || cl.lambda.size() != d || cl.C0.rows() != d) {
      throw ParameterError("cluster parameters have inconsistent shapes");
    }
    require_simplex(cl.omega, "omega");
    if (!(cl.lambda.array() > 0.0).all()) throw ParameterError("lambda must be positive");
    for (int l = 0; l < L; ++l) {
      if (cl.mu[l].size() != d || !cl.mu[l].allFinite()) throw ParameterError("bad subcomponent mean");
      require_spd(cl.sigma[l], "Sigma_kl");
    }
  }
}

Hyperparams elicit_priors(const Vector& data_mean, const Matrix& data_cov, double phi_B,
                          double phi_W, int K, int L) {
  if (!(phi_B > 0.0 && phi_B < 1.0)) throw ParameterError("phi_B must lie in (0, 1)");
  if (!(phi_W > 0.0 && phi_W < 1.0)) throw ParameterError("phi_W must lie in (0, 1)");
  if (K < 1 || L < 1) throw ParameterError("K and L must be positive");
  if (data_mean.size() != data_cov.rows()) throw ParameterError("moment dimensions disagree");
  require_spd(data_cov, "data covariance");

  const int d = static_cast<int>(data_mean.size());
  Hyperparams hp;
  hp.m0 = data_mean;
  hp.M0 = 10.0 * data_cov;
  hp.B0 = phi_W * (1.0 - phi_B) * data_cov;
  hp.c0 = d + 2.0;
  hp.g0 = d + 2.0;
  // E[Sigma | C0k] = C0k / (c0 - d - 1) and E[C0k] = g0 * G0^-1, so this G0
  // centers the within-subcomponent covariance on its variance share.
  const Matrix within = (1.0 - phi_W) * (1.0 - phi_B) * data_cov;
  hp.G0 = symmetrize(hp.g0 / (hp.c0 - d - 1.0) * spd_inverse(within, "within covariance"));
  hp.e0 = 0.01;
  hp.d0 = 4.0;
  hp.nu = 10.0;
  hp.validate();
  return hp;
}

std::pair<Vector, Matrix> data_moments(const Matrix& points) {
  const double n = static_cast<double>(points.cols());
  if (n < 1) throw ParameterError("moments need at least one point");
  const Vector mean = points.rowwise().mean();
  const Matrix centered = points.colwise() - mean;
  return {mean, symmetrize(centered * centered.transpose() / n)};
}

KernelTable::KernelTable(const ModelParams& params)
    : K_(params.num_clusters()), L_(params.num_subcomponents()), d_(params.dim()) {
  const std::size_t kl = static_cast<std::size_t>(K_) * L_;
  offset_.resize(kl);
  mean_.resize(kl * d_);
  factor_.assign(kl * d_ * d_, 0.0);
  for (int k = 0; k < K_; ++k) {
    const auto& cl = params.clusters[k];
    for (int l = 0; l < L_; ++l) {
      const std::size_t idx = static_cast<std::size_t>(k) * L_ + l;
      const Matrix lower = cholesky_lower(cl.precision[l], "subcomponent precision");
      const double log_weight = std::log(params.eta[k]) + std::log(cl.omega[l]);
      // log det Sigma = -log det precision
      offset_[idx] = log_weight + 0.5 * log_det_from_cholesky(lower) - 0.5 * d_ * kLogTwoPi;
      for (int i = 0; i < d_; ++i) {
        mean_[idx * d_ + i] = cl.mu[l][i];
        // U = lower^T stored row-major: U(i, j) = lower(j, i) for j >= i
        for (int j = i; j < d_; ++j) factor_[(idx * d_ + i) * d_ + j] = lower(j, i);
      }
    }
  }
}

void KernelTable::evaluate(const double* y, std::span<double> out) const {
  const std::size_t kl = static_cast<std::size_t>(K_) * L_;
  double diff[16];
  std::vector<double> heap;
  double* dv = diff;
  if (d_ > 16) {
    heap.resize(d_);
    dv = heap.data();
  }
  for (std::size_t idx = 0; idx < kl; ++idx) {
    if (!std::isfinite(offset_[idx])) {
      out[idx] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double* m = &mean_[idx * d_];
    for (int i = 0; i < d_; ++i) dv[i] = y[i] - m[i];
    double q = 0.0;
    const double* u = &factor_[idx * d_ * d_];
    for (int i = 0; i < d_; ++i) {
      double z = 0.0;
      for (int j = i; j < d_; ++j) z += u[i * d_ + j] * dv[j];
      q += z * z;
    }
    out[idx] = offset_[idx] - 0.5 * q;
  }
}

double mixture_logdensity(const Vector& y, const ModelParams& params) {
  const KernelTable table(params);
  std::vector<double> values(static_cast<std::size_t>(params.num_clusters()) *
                             params.num_subcomponents());
  table.evaluate(y.data(), values);
  return stats::log_sum_exp(values);
}

ModelParams sample_prior(const Hyperparams& hp, int K, int L, Rng& rng) {
  const int d = hp.dim();
  ModelParams params;
  params.eta = stats::sample_dirichlet(Vector::Constant(K, hp.e0), rng);
  params.clusters.resize(K);
  for (auto& cl : params.clusters) {
    cl.C0 = stats::sample_wishart_inverse_scale(hp.g0, hp.G0, rng);
    cl.b0 = stats::sample_mvn(hp.m0, hp.M0, rng);
    cl.lambda.resize(d);
    for (int j = 0; j < d; ++j) cl.lambda[j] = stats::sample_gamma(hp.nu, hp.nu, rng);
    cl.omega = stats::sample_dirichlet(Vector::Constant(L, hp.d0), rng);
    const Vector root = cl.lambda.array().sqrt().matrix();
    const Matrix b0_tilde = root.asDiagonal() * hp.B0 * root.asDiagonal();
    for (int l = 0; l < L; ++l) {
      cl.mu.push_back(stats::sample_mvn(cl.b0, b0_tilde, rng));
      Matrix precision = stats::sample_wishart_inverse_scale(hp.c0, cl.C0, rng);
      cl.sigma.push_back(spd_inverse(precision, "prior precision"));
      cl.precision.push_back(std::move(precision));
    }
  }
  return params;
}

}  // namespace dibc

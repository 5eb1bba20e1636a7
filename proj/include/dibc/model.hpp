#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dibc/linalg.hpp"
#include "dibc/rng.hpp"

namespace dibc {

/// Fixed prior constants of the mixture of Gaussian mixtures.
///
/// Wishart conventions follow the conjugate updates: `W_d(df, C)` denotes a
/// Wishart with df degrees of freedom and scale C^-1, so E[X] = df * C^-1.
/// Thus Sigma_kl^-1 ~ W_d(c0, C0k) and C0k ~ W_d(g0, G0).
struct Hyperparams {
  double e0 = 0.01;  ///< cluster-weight Dirichlet concentration
  double d0 = 4.0;   ///< subcomponent-weight Dirichlet concentration
  double c0 = 4.0;   ///< Wishart df for subcomponent precisions
  double g0 = 4.0;   ///< Wishart df for the cluster-level C0k
  Matrix G0;
  Matrix B0;  ///< spread of subcomponent means around the cluster center
  Vector m0;  ///< overall data center
  Matrix M0;  ///< spread of cluster centers around m0
  double nu = 10.0;  ///< Gamma(nu, nu) prior on the lambda scalings

  [[nodiscard]] int dim() const { return static_cast<int>(m0.size()); }

  /// Throws ParameterError when a hard invariant fails.
  void validate() const;
};

/// Which dimension bounds e0 in the sparse-weights condition e0 < dim / 2.
enum class SparsityDimension {
  kClusterParameters,  ///< full dimension of theta_k (default)
  kData,               ///< data dimension d
};

/// Dimension of the cluster-specific parameter theta_k: L means, L
/// covariances and L - 1 free subcomponent weights.
int cluster_parameter_dimension(int d, int L);

/// True when e0 satisfies the overfitting condition. Violations are reported
/// as warnings by callers, never as errors.
bool sparsity_condition_holds(const Hyperparams& hp, int L,
                              SparsityDimension which = SparsityDimension::kClusterParameters);

struct ClusterParams {
  Vector omega;                   ///< subcomponent weights (simplex, size L)
  std::vector<Vector> mu;         ///< subcomponent means
  std::vector<Matrix> sigma;      ///< subcomponent covariances
  std::vector<Matrix> precision;  ///< inverses of sigma, kept in sync
  Vector b0;                      ///< cluster center
  Matrix C0;                      ///< cluster-level Wishart matrix
  Vector lambda;                  ///< positive per-coordinate scalings
};

struct ModelParams {
  Vector eta;  ///< cluster weights (simplex, size K)
  std::vector<ClusterParams> clusters;

  [[nodiscard]] int num_clusters() const { return static_cast<int>(clusters.size()); }
  [[nodiscard]] int num_subcomponents() const {
    return clusters.empty() ? 0 : static_cast<int>(clusters.front().omega.size());
  }
  [[nodiscard]] int dim() const {
    return clusters.empty() ? 0 : static_cast<int>(clusters.front().b0.size());
  }

  /// Throws ParameterError on shape mismatch, non-simplex weights, non-SPD
  /// covariances or non-positive lambda.
  void validate() const;
};

/// A worker's data subset. Points are stored one per column.
struct Shard {
  int worker_id = 0;
  Matrix points;                         ///< d x n_r
  std::vector<std::int64_t> row_ids;     ///< original row index of each point
  std::optional<std::vector<int>> true_labels;

  [[nodiscard]] int size() const { return static_cast<int>(points.cols()); }
  [[nodiscard]] int dim() const { return static_cast<int>(points.rows()); }
};

/// Per-point cluster and subcomponent labels, zero-based
/// (c in [0, K), s in [0, L)).
struct AllocationState {
  std::vector<int> c;
  std::vector<int> s;
};

/// Prior elicitation from data moments by variance decomposition: a share
/// phi_B of the variance is between clusters, phi_W of the remainder between
/// subcomponents of a cluster, and the rest within subcomponents.
Hyperparams elicit_priors(const Vector& data_mean, const Matrix& data_cov, double phi_B,
                          double phi_W, int K, int L);

/// Sample mean and (1/n-normalized) covariance of the columns of `points`.
std::pair<Vector, Matrix> data_moments(const Matrix& points);

/// log sum_k sum_l eta_k omega_kl N(y | mu_kl, Sigma_kl).
double mixture_logdensity(const Vector& y, const ModelParams& params);

/// Draw of all parameters from the hierarchical prior.
ModelParams sample_prior(const Hyperparams& hp, int K, int L, Rng& rng);

/// Table of log(eta_k omega_kl) + log N(. | mu_kl, Sigma_kl) for all (k, l),
/// with factorizations cached for repeated evaluation.
class KernelTable {
 public:
  explicit KernelTable(const ModelParams& params);

  [[nodiscard]] int num_clusters() const { return K_; }
  [[nodiscard]] int num_subcomponents() const { return L_; }

  /// Writes K*L entries, index k*L + l, for the point y (length d).
  void evaluate(const double* y, std::span<double> out) const;

 private:
  int K_, L_, d_;
  std::vector<double> offset_;  // log weight - logdet/2 - d/2 log 2pi
  std::vector<double> mean_;    // K*L*d
  std::vector<double> factor_;  // K*L*d*d, upper factor U with precision = U^T U
};

}  // namespace dibc

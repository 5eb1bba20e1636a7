#pragma once

#include <span>
#include <vector>

#include "dibc/linalg.hpp"
#include "dibc/model.hpp"
#include "dibc/rng.hpp"

// Full conditionals of the mixture-of-mixtures Gibbs scheme. The posterior
// parameter functions are exposed separately from the draws so the local
// sampler and the fixed-statistics parameter sampler share one definition.
namespace dibc::conditional {

/// W_d(df, C): Wishart with scale C^-1.
struct WishartPosterior {
  double df;
  Matrix inverse_scale;
};

struct NormalPosterior {
  Vector mean;
  Matrix cov;
};

struct GigPosterior {
  double p, a, b;
};

/// prior + count, elementwise (e0 + n_k for eta, d0 + n_kl for omega).
Vector weight_concentration(std::span<const double> counts, double prior);

/// sqrt(Lambda_k) B0 sqrt(Lambda_k).
Matrix mean_prior_cov(const Matrix& B0, const Vector& lambda);

/// Sigma_kl^-1 | ... ~ W_d(c0 + n, C0k + scatter), scatter taken about mu_kl.
WishartPosterior precision_posterior(double c0, const Matrix& C0k, double n, const Matrix& scatter);

/// mu_kl | ... ~ N(b_kl, B_kl) with B_kl = (B~^-1 + n P)^-1 and
/// b_kl = B_kl (B~^-1 b0k + P sum).
NormalPosterior mean_posterior(const Vector& b0k, const Matrix& b0_tilde, const Matrix& precision,
                               double n, const Vector& sum);

/// lambda_kj | ... ~ GIG(nu - L/2, 2 nu, sum_l (mu_kl,j - b0k,j)^2 / B0_jj).
GigPosterior lambda_posterior(int j, double nu, std::span<const Vector> means, const Vector& b0k,
                              const Matrix& B0);

/// C0k | ... ~ W_d(g0 + L c0, G0 + sum_l Sigma_kl^-1).
WishartPosterior cluster_scale_posterior(double g0, double c0, const Matrix& G0,
                                         std::span<const Matrix> precisions);

/// b0k | ... ~ N(m~, M~) with M~ = (M0^-1 + L B~^-1)^-1 and
/// m~ = M~ (M0^-1 m0 + B~^-1 sum_l mu_kl).
NormalPosterior center_posterior(const Vector& m0, const Matrix& M0, const Matrix& b0_tilde,
                                 std::span<const Vector> means);

/// sum_i (y_i - mu)(y_i - mu)^T recovered from n, sum y and sum y y^T.
Matrix scatter_about(const Matrix& sum_outer, const Vector& sum, double n, const Vector& mu);

/// Which subcomponent means feed the lambda update: the ones drawn in this
/// sweep (local sampler) or the previous iteration's (parameter sampler).
enum class LambdaMeans { kCurrent, kPrevious };

struct SubcomponentSums {
  double n = 0.0;
  Vector sum;      ///< sum of member points
  Matrix scatter;  ///< scatter about the cluster's current mu_kl
};

/// Omega, precision and mean draws for every subcomponent of one cluster,
/// followed by lambda, C0k and b0k.
void update_cluster(ClusterParams& cl, std::span<const SubcomponentSums> sums,
                    const Hyperparams& hp, LambdaMeans lambda_means, Rng& rng);

}  // namespace dibc::conditional

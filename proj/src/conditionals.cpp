#include "dibc/conditionals.hpp"

#include <string>

#include "dibc/distributions.hpp"
#include "dibc/error.hpp"

namespace dibc::conditional {

Vector weight_concentration(std::span<const double> counts, double prior) {
  Vector alpha(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) alpha[static_cast<Eigen::Index>(i)] = prior + counts[i];
  return alpha;
}

Matrix mean_prior_cov(const Matrix& B0, const Vector& lambda) {
  const Vector root = lambda.array().sqrt().matrix();
  return symmetrize(root.asDiagonal() * B0 * root.asDiagonal());
}

WishartPosterior precision_posterior(double c0, const Matrix& C0k, double n, const Matrix& scatter) {
  return {c0 + n, symmetrize(C0k + scatter)};
}

NormalPosterior mean_posterior(const Vector& b0k, const Matrix& b0_tilde, const Matrix& precision,
                               double n, const Vector& sum) {
  const Matrix prior_precision = spd_inverse(b0_tilde, "mean prior covariance");
  const Matrix cov = spd_inverse(symmetrize(prior_precision + n * precision), "mean posterior");
  return {cov * (prior_precision * b0k + precision * sum), cov};
}

GigPosterior lambda_posterior(int j, double nu, std::span<const Vector> means, const Vector& b0k,
                              const Matrix& B0) {
  double b = 0.0;
  for (const auto& mu : means) {
    const double diff = mu[j] - b0k[j];
    b += diff * diff;
  }
  return {nu - 0.5 * static_cast<double>(means.size()), 2.0 * nu, b / B0(j, j)};
}

WishartPosterior cluster_scale_posterior(double g0, double c0, const Matrix& G0,
                                         std::span<const Matrix> precisions) {
  Matrix sum = G0;
  for (const auto& p : precisions) sum += p;
  return {g0 + static_cast<double>(precisions.size()) * c0, symmetrize(sum)};
}

NormalPosterior center_posterior(const Vector& m0, const Matrix& M0, const Matrix& b0_tilde,
                                 std::span<const Vector> means) {
  const Matrix M0_inv = spd_inverse(M0, "M0");
  const Matrix tilde_inv = spd_inverse(b0_tilde, "mean prior covariance");
  Vector mu_sum = Vector::Zero(m0.size());
  for (const auto& mu : means) mu_sum += mu;
  const double L = static_cast<double>(means.size());
  const Matrix cov = spd_inverse(symmetrize(M0_inv + L * tilde_inv), "center posterior");
  return {cov * (M0_inv * m0 + tilde_inv * mu_sum), cov};
}

Matrix scatter_about(const Matrix& sum_outer, const Vector& sum, double n, const Vector& mu) {
  return symmetrize(sum_outer - mu * sum.transpose() - sum * mu.transpose() + n * mu * mu.transpose());
}

void update_cluster(ClusterParams& cl, std::span<const SubcomponentSums> sums,
                    const Hyperparams& hp, LambdaMeans lambda_means, Rng& rng) {
  const int L = static_cast<int>(cl.omega.size());
  const int d = static_cast<int>(cl.b0.size());
  if (static_cast<int>(sums.size()) != L) throw ParameterError("one sum per subcomponent required");

  const std::vector<Vector> previous_means = cl.mu;

  std::vector<double> counts(L);
  for (int l = 0; l < L; ++l) counts[l] = sums[l].n;
  cl.omega = stats::sample_dirichlet(weight_concentration(counts, hp.d0), rng);

  const Matrix b0_tilde = mean_prior_cov(hp.B0, cl.lambda);
  for (int l = 0; l < L; ++l) {
    try {
      const auto wp = precision_posterior(hp.c0, cl.C0, sums[l].n, sums[l].scatter);
      cl.precision[l] = stats::sample_wishart_inverse_scale(wp.df, wp.inverse_scale, rng);
      cl.sigma[l] = spd_inverse(cl.precision[l], "subcomponent precision");
      const auto np = mean_posterior(cl.b0, b0_tilde, cl.precision[l], sums[l].n, sums[l].sum);
      cl.mu[l] = stats::sample_mvn(np.mean, np.cov, rng);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [subcomponent " + std::to_string(l + 1) + "]");
    }
  }

  const auto& lambda_input = lambda_means == LambdaMeans::kCurrent ? cl.mu : previous_means;
  for (int j = 0; j < d; ++j) {
    const auto gp = lambda_posterior(j, hp.nu, lambda_input, cl.b0, hp.B0);
    cl.lambda[j] = stats::sample_gig(gp.p, gp.a, gp.b, rng);
  }

  const auto sp = cluster_scale_posterior(hp.g0, hp.c0, hp.G0, cl.precision);
  cl.C0 = stats::sample_wishart_inverse_scale(sp.df, sp.inverse_scale, rng);

  const auto cp = center_posterior(hp.m0, hp.M0, mean_prior_cov(hp.B0, cl.lambda), cl.mu);
  cl.b0 = stats::sample_mvn(cp.mean, cp.cov, rng);
}

}  // namespace dibc::conditional

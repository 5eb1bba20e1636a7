#pragma once

#include <cstddef>
#include <span>

#include "dibc/linalg.hpp"
#include "dibc/rng.hpp"

// Samplers and log densities shared by every sampler in the library. All
// functions are pure apart from the generator they are handed.
namespace dibc::stats {

/// Gamma(shape, rate) variate (Marsaglia-Tsang, boosted for shape < 1).
double sample_gamma(double shape, double rate, Rng& rng);

/// log of a Gamma(shape, 1) variate; stays finite for tiny shapes where the
/// variate itself underflows.
double sample_log_gamma(double shape, Rng& rng);

double sample_chi_square(double df, Rng& rng);

/// Dirichlet(alpha). Normalized in log space, so components whose gamma draw
/// underflows come back as exact zeros instead of NaN.
Vector sample_dirichlet(std::span<const double> alpha, Rng& rng);
Vector sample_dirichlet(const Vector& alpha, Rng& rng);

/// Wishart(df, scale) with E[W] = df * scale, via the Bartlett decomposition.
Matrix sample_wishart(double df, const Matrix& scale, Rng& rng);

/// Wishart draw whose scale is the inverse of `inverse_scale`; this is the
/// W_d(df, C) convention of the mixture model, where posterior updates add
/// scatter matrices to C.
Matrix sample_wishart_inverse_scale(double df, const Matrix& inverse_scale, Rng& rng);

Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng);
Vector sample_mvn_cholesky(const Vector& mean, const Matrix& lower, Rng& rng);

/// Generalized inverse Gaussian with density proportional to
/// x^(p-1) exp(-(a x + b / x) / 2). Requires a > 0 and b >= 0, with b = 0
/// only for p > 0 (the Gamma(p, a/2) limit).
double sample_gig(double p, double a, double b, Rng& rng);

double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov);

/// Multivariate Student-t log density with location, scale matrix and df.
double mvt_logpdf(const Vector& x, const Vector& loc, const Matrix& scale, double df);

/// Student-t density with its factorization cached, for evaluating many
/// points against the same parameters.
class MvtDensity {
 public:
  MvtDensity(const Vector& loc, const Matrix& scale, double df);
  double operator()(const Eigen::Ref<const Vector>& x) const;

 private:
  Vector loc_;
  Matrix lower_;
  double df_;
  double norm_;
};

double log_sum_exp(std::span<const double> values);

/// Index i drawn with probability exp(w_i - logsumexp(w)).
/// Throws ParameterError if no entry is finite.
std::size_t log_categorical_sample(std::span<const double> log_weights, Rng& rng);

}  // namespace dibc::stats

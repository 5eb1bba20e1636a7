#include "dibc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "dibc/error.hpp"

namespace dibc::stats {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double gamma_unit_large_shape(double shape, Rng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// GIG mode for the (lambda, omega) parameterization, lambda >= 0.
double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) {
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  }
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift (Hormann & Leydold).
double gig_rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio-of-uniforms with mode shift, for lambda > 2 or omega > 3.
double gig_rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Minimal bounding rectangle from the roots of a cubic.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection from a three-piece hat; covers lambda < 1 with small omega where
// the density is not T-concave.
double gig_small_omega(double lambda, double omega, Rng& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  double k1, k2;
  area[0] = k0 * x0;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0
                  ? k1 * std::log(2.0 / (omega * omega))
                  : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x, hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw ParameterError("gamma shape must be positive and finite, got " + std::to_string(shape));
  }
  if (shape >= 1.0) return std::log(gamma_unit_large_shape(shape, rng));
  // G(a) = G(a + 1) * U^(1/a)
  return std::log(gamma_unit_large_shape(shape + 1.0, rng)) + std::log(rng.uniform()) / shape;
}

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ParameterError("gamma rate must be positive and finite, got " + std::to_string(rate));
  }
  if (shape >= 1.0) {
    if (!std::isfinite(shape)) throw ParameterError("gamma shape must be finite");
    return gamma_unit_large_shape(shape, rng) / rate;
  }
  return std::exp(sample_log_gamma(shape, rng)) / rate;
}

double sample_chi_square(double df, Rng& rng) { return 2.0 * sample_gamma(0.5 * df, 1.0, rng); }

Vector sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  if (alpha.empty()) throw ParameterError("Dirichlet needs at least one component");
  Vector logs(static_cast<Eigen::Index>(alpha.size()));
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
      throw ParameterError("Dirichlet concentration must be positive, got alpha[" +
                           std::to_string(i) + "] = " + std::to_string(alpha[i]));
    }
    logs[static_cast<Eigen::Index>(i)] = sample_log_gamma(alpha[i], rng);
  }
  const double norm = log_sum_exp(std::span<const double>(logs.data(), alpha.size()));
  Vector w = (logs.array() - norm).exp().matrix();
  return w / w.sum();
}

Vector sample_dirichlet(const Vector& alpha, Rng& rng) {
  return sample_dirichlet(std::span<const double>(alpha.data(), static_cast<std::size_t>(alpha.size())), rng);
}

namespace {

Matrix wishart_from_factor(double df, const Matrix& lower, Rng& rng) {
  const auto d = lower.rows();
  if (!(df > static_cast<double>(d) - 1.0)) {
    throw ParameterError("Wishart df must exceed d - 1, got df = " + std::to_string(df));
  }
  // Bartlett: A lower triangular, A_ii^2 ~ chi2(df - i), A_ij ~ N(0, 1).
  Matrix bartlett = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(sample_chi_square(df - static_cast<double>(i), rng));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Matrix factor = lower * bartlett;
  return symmetrize(factor * factor.transpose());
}

}  // namespace

Matrix sample_wishart(double df, const Matrix& scale, Rng& rng) {
  require_spd(scale, "Wishart scale");
  return wishart_from_factor(df, cholesky_lower(scale, "Wishart scale"), rng);
}

Matrix sample_wishart_inverse_scale(double df, const Matrix& inverse_scale, Rng& rng) {
  // Inputs come from posterior updates, so ill-conditioning here is numerical.
  const Matrix scale = spd_inverse(inverse_scale, "Wishart inverse scale");
  return wishart_from_factor(df, cholesky_lower(scale, "Wishart scale"), rng);
}

Vector sample_mvn_cholesky(const Vector& mean, const Matrix& lower, Rng& rng) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + lower.triangularView<Eigen::Lower>() * z;
}

Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng) {
  return sample_mvn_cholesky(mean, cholesky_lower(cov, "normal covariance"), rng);
}

double sample_gig(double p, double a, double b, Rng& rng) {
  if (!std::isfinite(p) || !std::isfinite(a) || !std::isfinite(b) || !(a > 0.0) || b < 0.0 ||
      (b == 0.0 && p <= 0.0)) {
    throw ParameterError("GIG parameters out of range: p = " + std::to_string(p) +
                         ", a = " + std::to_string(a) + ", b = " + std::to_string(b));
  }
  constexpr double kZeroTol = 10.0 * std::numeric_limits<double>::epsilon();
  if (b < kZeroTol) {
    if (p > 0.0) return sample_gamma(p, a / 2.0, rng);
    throw ParameterError("GIG with b ~ 0 requires p > 0");
  }
  // Reduce to the two-parameter form x^(l-1) exp(-omega/2 (x + 1/x)) scaled
  // by sqrt(b / a); negative p uses the reciprocal symmetry.
  const double lambda = std::abs(p);
  const double alpha = std::sqrt(b / a);
  const double omega = std::sqrt(a * b);
  double x;
  if (lambda > 2.0 || omega > 3.0) {
    x = gig_rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = gig_rou_noshift(lambda, omega, rng);
  } else {
    x = gig_small_omega(lambda, omega, rng);
  }
  return p < 0.0 ? alpha / x : alpha * x;
}

double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Matrix lower = cholesky_lower(cov, "normal covariance");
  const Vector z = lower.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (static_cast<double>(x.size()) * kLogTwoPi + log_det_from_cholesky(lower) +
                 z.squaredNorm());
}

MvtDensity::MvtDensity(const Vector& loc, const Matrix& scale, double df)
    : loc_(loc), lower_(cholesky_lower(scale, "Student-t scale")), df_(df) {
  if (!(df > 0.0)) throw ParameterError("Student-t df must be positive");
  const double d = static_cast<double>(loc.size());
  norm_ = std::lgamma(0.5 * (df + d)) - std::lgamma(0.5 * df) -
          0.5 * d * std::log(df * std::numbers::pi) - 0.5 * log_det_from_cholesky(lower_);
}

double MvtDensity::operator()(const Eigen::Ref<const Vector>& x) const {
  const Vector z = lower_.triangularView<Eigen::Lower>().solve(x - loc_);
  const double d = static_cast<double>(loc_.size());
  return norm_ - 0.5 * (df_ + d) * std::log1p(z.squaredNorm() / df_);
}

double mvt_logpdf(const Vector& x, const Vector& loc, const Matrix& scale, double df) {
  return MvtDensity(loc, scale, df)(x);
}

double log_sum_exp(std::span<const double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

std::size_t log_categorical_sample(std::span<const double> log_weights, Rng& rng) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) {
    if (std::isnan(v)) throw ParameterError("categorical log weight is NaN");
    hi = std::max(hi, v);
  }
  if (!std::isfinite(hi)) throw ParameterError("categorical draw needs a finite log weight");
  double total = 0.0;
  for (double v : log_weights) total += std::exp(v - hi);
  double u = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    const double w = std::exp(log_weights[i] - hi);
    if (w > 0.0) last_positive = i;
    if (u < w) return i;
    u -= w;
  }
  return last_positive;
}

}  // namespace dibc::stats

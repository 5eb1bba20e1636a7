#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <string_view>

namespace dibc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// A failed factorization is retried once after adding 1e-10 * trace / d to
/// the diagonal; a second failure throws NumericalError carrying the
/// eigenvalue range of the offending matrix and `context`.
Matrix cholesky_lower(const Matrix& a, std::string_view context = {});

/// True when `a` is square, finite, symmetric to 1e-10 relative and Cholesky
/// succeeds without jitter.
bool is_spd(const Matrix& a);

/// Throws ParameterError unless is_spd(a).
void require_spd(const Matrix& a, std::string_view what);

Matrix spd_inverse(const Matrix& a, std::string_view context = {});

double log_det_from_cholesky(const Matrix& lower);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace dibc

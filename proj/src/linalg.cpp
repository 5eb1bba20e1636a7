#include "dibc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "dibc/error.hpp"

namespace dibc {
namespace {

bool try_factor(const Matrix& a, Matrix& lower) {
  if (!a.allFinite()) return false;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  // LLT does not always flag tiny negative pivots; reject them explicitly.
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

std::string diagnostics(const Matrix& a, std::string_view context) {
  std::ostringstream os;
  os << "Cholesky factorization failed";
  if (!context.empty()) os << " (" << context << ")";
  os << ": " << a.rows() << "x" << a.cols() << " matrix";
  if (a.allFinite() && a.rows() == a.cols()) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    os << ", eigenvalues in [" << lo << ", " << hi << "]";
    if (lo > 0.0) os << ", condition " << hi / lo;
  } else {
    os << " with non-finite entries";
  }
  return os.str();
}

}  // namespace

Matrix cholesky_lower(const Matrix& a, std::string_view context) {
  Matrix lower;
  if (a.rows() == a.cols() && try_factor(a, lower)) return lower;
  if (a.rows() == a.cols() && a.rows() > 0 && a.allFinite()) {
    Matrix jittered = a;
    const double jitter = 1e-10 * std::abs(a.trace()) / static_cast<double>(a.rows());
    jittered.diagonal().array() += jitter;
    if (try_factor(jittered, lower)) return lower;
  }
  throw NumericalError(diagnostics(a, context));
}

bool is_spd(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols() || !a.allFinite()) return false;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
  Matrix lower;
  return try_factor(a, lower);
}

void require_spd(const Matrix& a, std::string_view what) {
  if (!is_spd(a)) {
    throw ParameterError(std::string(what) + " must be symmetric positive definite");
  }
}

Matrix spd_inverse(const Matrix& a, std::string_view context) {
  const Matrix lower = cholesky_lower(a, context);
  const Matrix lower_inv =
      lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(a.rows(), a.cols()));
  return symmetrize(lower_inv.transpose() * lower_inv);
}

double log_det_from_cholesky(const Matrix& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

}  // namespace dibc

#include "ncl/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "ncl/errors.hpp"

namespace ncl {

Cholesky::Cholesky(const Matrix& spd) : lower_(Matrix::Zero(spd.rows(), spd.cols())) {
  if (spd.rows() != spd.cols()) throw std::invalid_argument("Cholesky needs a square matrix");
  const Index n = spd.rows();
  for (Index j = 0; j < n; ++j) {
    double pivot = spd(j, j) - lower_.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NumericalDomainError(static_cast<long>(j), "matrix is not positive definite");
    }
    const double root = std::sqrt(pivot);
    lower_(j, j) = root;
    if (j + 1 < n) {
      lower_.col(j).tail(n - j - 1) =
          (spd.col(j).tail(n - j - 1) - lower_.bottomLeftCorner(n - j - 1, j) * lower_.row(j).head(j).transpose()) /
          root;
    }
  }
}

double Cholesky::logdet() const { return 2.0 * lower_.diagonal().array().log().sum(); }

Matrix Cholesky::solve(const Matrix& rhs) const {
  Matrix x = lower_.triangularView<Eigen::Lower>().solve(rhs);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix Cholesky::inverse() const { return solve(Matrix::Identity(size(), size())); }

double logdet_psd(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("logdet needs a square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("logdet input is not symmetric");
  }
  return Cholesky(m).logdet();
}

}  // namespace ncl

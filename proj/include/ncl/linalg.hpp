#pragma once

#include "ncl/types.hpp"

namespace ncl {

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Only the lower triangle of the input is read.
class Cholesky {
 public:
  // Throws NumericalDomainError naming the first non-positive pivot.
  explicit Cholesky(const Matrix& spd);

  const Matrix& factor() const { return lower_; }
  Index size() const { return lower_.rows(); }
  // 2 * sum log diag(L).
  double logdet() const;
  // Solves (L L^T) X = B.
  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;

 private:
  Matrix lower_;
};

// Log-determinant of a symmetric positive-definite matrix. Rejects inputs
// asymmetric beyond 1e-10 (relative to the largest entry).
double logdet_psd(const Matrix& m);

}  // namespace ncl

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "ncl/rng.hpp"
#include "ncl/types.hpp"

namespace ncl::test {

inline RowMatrix random_rows(Index rows, Index cols, CounterRng& rng, double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

inline Matrix random_matrix(Index rows, Index cols, CounterRng& rng, double scale = 1.0) {
  return random_rows(rows, cols, rng, scale);
}

inline RowMatrix unit_rows(Index rows, Index cols, CounterRng& rng) {
  RowMatrix m = random_rows(rows, cols, rng);
  for (Index r = 0; r < rows; ++r) m.row(r).normalize();
  return m;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Worst relative error between central differences along random directions
// and the analytic directional derivative <grad, v>.
template <class M>
double directional_check(const std::function<double(const M&)>& f, const M& x, const M& grad, CounterRng& rng,
                         int directions = 50, double h = 1e-5) {
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    M v = random_rows(x.rows(), x.cols(), rng);
    const double fd = (f(x + h * v) - f(x - h * v)) / (2 * h);
    const double an = (grad.array() * v.array()).sum();
    worst = std::max(worst, relative_error(fd, an));
  }
  return worst;
}

}  // namespace ncl::test

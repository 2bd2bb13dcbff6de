#include "ncl/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "ncl/errors.hpp"
#include "ncl/linalg.hpp"

namespace ncl {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LogdetTerm {
  double value;
  Matrix grad;
};

// g(F) = logdet(I + t F F^T) and dg/dF = 2t (I + t F F^T)^{-1} F, evaluated on
// whichever Gram side is smaller.
LogdetTerm logdet_term(const Matrix& f, double t) {
  LogdetTerm out;
  if (f.cols() < f.rows()) {
    Matrix gram = t * (f.transpose() * f);
    gram.diagonal().array() += 1.0;
    const Cholesky chol(gram);
    out.value = chol.logdet();
    out.grad = (2.0 * t) * (f * chol.inverse());
  } else {
    Matrix gram = t * (f * f.transpose());
    gram.diagonal().array() += 1.0;
    const Cholesky chol(gram);
    out.value = chol.logdet();
    out.grad = (2.0 * t) * chol.solve(f);
  }
  return out;
}

}  // namespace

LossResult bpr_loss(std::span<const TripleIndex> triples, const RowMatrix& users, const RowMatrix& items) {
  LossResult out;
  out.grad_user = RowMatrix::Zero(users.rows(), users.cols());
  out.grad_item = RowMatrix::Zero(items.rows(), items.cols());
  for (const auto& t : triples) {
    const auto eu = users.row(t.user);
    const auto ei = items.row(t.positive);
    const auto ej = items.row(t.negative);
    const double gap = eu.dot(ei) - eu.dot(ej);
    out.value += softplus(-gap);
    const double coef = -sigmoid(-gap);
    out.grad_user.row(t.user) += coef * (ei - ej);
    out.grad_item.row(t.positive) += coef * eu;
    out.grad_item.row(t.negative) -= coef * eu;
  }
  return out;
}

LossResult infonce_loss(const RowMatrix& view_a, const RowMatrix& view_b, double tau) {
  if (view_a.rows() != view_b.rows() || view_a.cols() != view_b.cols())
    throw std::invalid_argument("InfoNCE views must have equal shapes");
  if (tau <= 0) throw std::invalid_argument("temperature must be positive");
  const Index n = view_a.rows();
  Matrix logits = (view_a * view_b.transpose()) / tau;
  Matrix dlogits(n, n);
  LossResult out;
  for (Index u = 0; u < n; ++u) {
    const double peak = logits.row(u).maxCoeff();
    const auto shifted = (logits.row(u).array() - peak).exp();
    const double denom = shifted.sum();
    out.value += peak + std::log(denom) - logits(u, u);
    dlogits.row(u) = shifted / denom;
    dlogits(u, u) -= 1.0;
  }
  out.grad_user = (dlogits * view_b) / tau;
  out.grad_item = (dlogits.transpose() * view_a) / tau;
  return out;
}

LossResult alignment_loss(std::span<const PairIndex> pairs, const RowMatrix& users, const RowMatrix& items) {
  LossResult out;
  out.grad_user = RowMatrix::Zero(users.rows(), users.cols());
  out.grad_item = RowMatrix::Zero(items.rows(), items.cols());
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    const auto diff = users.row(p.user) - items.row(p.item);
    out.value += diff.squaredNorm() * inv;
    out.grad_user.row(p.user) += 2.0 * inv * diff;
    out.grad_item.row(p.item) -= 2.0 * inv * diff;
  }
  return out;
}

namespace {

// exp(-2 |e_u - e_v|^2) for all pairs, zero diagonal.
Matrix gaussian_kernel(const RowMatrix& rows) {
  const Index n = rows.rows();
  const Matrix gram = rows * rows.transpose();
  const Vector sq = gram.diagonal();
  Matrix k(n, n);
  for (Index v = 0; v < n; ++v)
    for (Index u = 0; u < n; ++u) k(u, v) = u == v ? 0.0 : std::exp(-2.0 * std::max(0.0, sq(u) + sq(v) - 2.0 * gram(u, v)));
  return k;
}

}  // namespace

double uniformity_value(const RowMatrix& rows) {
  const Index n = rows.rows();
  if (n < 2) throw UndefinedMetricError("uniformity needs at least two rows");
  return std::log(gaussian_kernel(rows).sum() / (static_cast<double>(n) * static_cast<double>(n - 1)));
}

UniformityResult uniformity_loss(const RowMatrix& rows) {
  const Index n = rows.rows();
  if (n < 2) throw UndefinedMetricError("uniformity needs at least two rows");
  const Matrix k = gaussian_kernel(rows);
  const double total = k.sum();
  UniformityResult out;
  out.value = std::log(total / (static_cast<double>(n) * static_cast<double>(n - 1)));
  // Each unordered pair appears twice in the sum, and d|a-b|^2/da = 2(a-b):
  // d/de_u = -8 / S * sum_v k_uv (e_u - e_v).
  const Vector row_mass = k.rowwise().sum();
  out.grad = (-8.0 / total) * (row_mass.asDiagonal() * rows - k * rows);
  return out;
}

LossResult directau_loss(std::span<const PairIndex> pairs, const RowMatrix& users, const RowMatrix& items,
                         double lambda) {
  LossResult out = alignment_loss(pairs, users, items);
  if (users.rows() >= 2) {
    const auto u = uniformity_loss(users);
    out.value += lambda * u.value;
    out.grad_user += lambda * u.grad;
  }
  if (items.rows() >= 2) {
    const auto i = uniformity_loss(items);
    out.value += lambda * i.value;
    out.grad_item += lambda * i.grad;
  }
  return out;
}

RateResult coding_rate(const Matrix& columns, double epsilon_sq) {
  if (columns.cols() < 1) throw std::invalid_argument("coding rate needs at least one column");
  if (epsilon_sq <= 0) throw std::invalid_argument("epsilon^2 must be positive");
  const double d = static_cast<double>(columns.rows());
  const double t = d / (static_cast<double>(columns.cols()) * epsilon_sq);
  auto term = logdet_term(columns, t);
  return {0.5 * term.value, 0.5 * term.grad, 0};
}

RateResult per_cluster_coding_rate(const Matrix& columns, double epsilon_sq, const MembershipSet& memberships,
                                   double trace_tol) {
  if (epsilon_sq <= 0) throw std::invalid_argument("epsilon^2 must be positive");
  if (memberships.num_entities != columns.cols())
    throw std::invalid_argument("memberships do not match the number of columns");
  const double d = static_cast<double>(columns.rows());
  const double n = static_cast<double>(columns.cols());
  RateResult out;
  out.grad = Matrix::Zero(columns.rows(), columns.cols());
  for (const auto& cluster : memberships.clusters) {
    const double trace = cluster.trace();
    if (trace <= trace_tol) {
      ++out.skipped_clusters;
      continue;
    }
    const auto m = static_cast<Index>(cluster.size());
    Matrix f(columns.rows(), m);
    Vector root(m);
    for (Index j = 0; j < m; ++j) {
      root(j) = std::sqrt(cluster.weights[static_cast<std::size_t>(j)]);
      f.col(j) = root(j) * columns.col(cluster.members[static_cast<std::size_t>(j)]);
    }
    const auto term = logdet_term(f, d / (trace * epsilon_sq));
    const double scale = trace / (2.0 * n);
    out.value += scale * term.value;
    for (Index j = 0; j < m; ++j)
      out.grad.col(cluster.members[static_cast<std::size_t>(j)]) += (scale * root(j)) * term.grad.col(j);
  }
  return out;
}

RateResult compactness_loss(const Matrix& columns, double epsilon_sq, const MembershipSet& memberships) {
  RateResult out = per_cluster_coding_rate(columns, epsilon_sq, memberships);
  const RateResult whole = coding_rate(columns, epsilon_sq);
  out.value -= whole.value;
  out.grad -= whole.grad;
  return out;
}

LossResult ncl_total(const LossResult& align, const RateResult& compact_user, const RateResult& compact_item,
                     double alpha) {
  if (alpha < 0) throw std::invalid_argument("alpha must be non-negative");
  LossResult out = align;
  out.value += alpha * (compact_user.value + compact_item.value);
  if (compact_user.grad.size() > 0) out.grad_user += alpha * compact_user.grad.transpose();
  if (compact_item.grad.size() > 0) out.grad_item += alpha * compact_item.grad.transpose();
  return out;
}

}  // namespace ncl

#pragma once

#include <span>

#include "ncl/membership.hpp"
#include "ncl/types.hpp"

namespace ncl {

// Loss value with gradients on a batch of user rows and item rows.
struct LossResult {
  double value = 0.0;
  RowMatrix grad_user;
  RowMatrix grad_item;
};

// Loss on a single d x n column matrix; `grad` has the same layout.
struct RateResult {
  double value = 0.0;
  Matrix grad;
  // Clusters skipped for having (near) zero trace.
  std::size_t skipped_clusters = 0;
};

struct RateParams {
  double epsilon_sq = 0.05;
  double alpha = 0.5;
  double tau = 0.2;
  double lambda = 1.0;
};

// Row indices into the batch user/item matrices.
struct PairIndex {
  Index user;
  Index item;
};

struct TripleIndex {
  Index user;
  Index positive;
  Index negative;
};

// sum of -ln sigmoid(e_u . e_pos - e_u . e_neg)
LossResult bpr_loss(std::span<const TripleIndex> triples, const RowMatrix& users, const RowMatrix& items);

// In-batch InfoNCE: row u of `view_a` is positive with row u of `view_b` and
// negative with every other row. grad_user is w.r.t. view_a, grad_item view_b.
LossResult infonce_loss(const RowMatrix& view_a, const RowMatrix& view_b, double tau);

// Mean squared distance over positive pairs.
LossResult alignment_loss(std::span<const PairIndex> pairs, const RowMatrix& users, const RowMatrix& items);

// log mean_{u != v} exp(-2 |e_u - e_v|^2); throws UndefinedMetricError below 2 rows.
double uniformity_value(const RowMatrix& rows);
struct UniformityResult {
  double value = 0.0;
  RowMatrix grad;
};
UniformityResult uniformity_loss(const RowMatrix& rows);

// alignment + lambda * (uniformity(users) + uniformity(items))
LossResult directau_loss(std::span<const PairIndex> pairs, const RowMatrix& users, const RowMatrix& items,
                         double lambda);

// R(E, eps) = 1/2 logdet(I + d/(n eps^2) E E^T) for E of shape d x n.
RateResult coding_rate(const Matrix& columns, double epsilon_sq);

// Membership-weighted sum of per-cluster rates. Clusters with trace <= trace_tol
// are skipped and counted.
RateResult per_cluster_coding_rate(const Matrix& columns, double epsilon_sq, const MembershipSet& memberships,
                                   double trace_tol = 1e-12);

// R^c(E | Pi) - R(E).
RateResult compactness_loss(const Matrix& columns, double epsilon_sq, const MembershipSet& memberships);

// align + alpha * (compact_user + compact_item); compactness gradients are in
// column layout and get transposed onto the row gradients.
LossResult ncl_total(const LossResult& align, const RateResult& compact_user, const RateResult& compact_item,
                     double alpha);

}  // namespace ncl

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ncl/dataset.hpp"
#include "ncl/membership.hpp"
#include "ncl/types.hpp"

namespace ncl {

// A = R R^T (users) or R^T R (items) in CSR form; entries count shared neighbours.
class CooccurrenceGraph {
 public:
  Index size() const { return static_cast<Index>(offsets_.size()) - 1; }
  std::size_t nnz() const { return cols_.size(); }
  // Row v; by symmetry also column v.
  std::span<const Index> neighbours(Index v) const;
  std::span<const int> counts(Index v) const;
  int at(Index u, Index v) const;

  friend CooccurrenceGraph build_cooccurrence(const InteractionSet&, Side, std::size_t);

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Index> cols_;
  std::vector<int> counts_;
};

// Throws SizingError when the result would hold more than max_nnz entries.
CooccurrenceGraph build_cooccurrence(const InteractionSet& train, Side side, std::size_t max_nnz = 50'000'000);

struct Threshold {
  enum class Kind { Absolute, Quantile };
  Kind kind = Kind::Quantile;
  // eta itself, or q in [0,1] applied to the nonzero entries of each column
  double value = 0.9;
};

// One indicator cluster per column k: {v : A_vk >= eta_k}. Columns with no
// entry reaching the threshold are dropped.
MembershipSet thresholded_memberships(const CooccurrenceGraph& graph, Threshold threshold);

// Uniform sample of m clusters without replacement; all of them when m >= K.
MembershipSet sample_memberships(const MembershipSet& memberships, std::size_t m, std::uint64_t seed);

// Phi(e) = W2^T relu(W1^T e + b1) + b2
struct ClassifierHead {
  Matrix w1;  // d x h
  Vector b1;
  Matrix w2;  // h x K
  Vector b2;

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int num_clusters() const { return static_cast<int>(w2.cols()); }

  static ClassifierHead init(int dim, int hidden, int clusters, std::uint64_t seed);
};

// K x n logits, one column per row of `rows`.
Matrix classifier_logits(const RowMatrix& rows, const ClassifierHead& head);
// P(y, u) = softmax(Phi(e_u))_y / n
Matrix classifier_forward(const RowMatrix& rows, const ClassifierHead& head);

struct IpotOptions {
  int iterations = 50;
  int inner_iterations = 1;
  double beta = 1.0;
  double tol = 1e-6;
  double floor = 1e-30;
};

struct AssignmentMatrix {
  Matrix q;  // K x n
  bool converged = false;
  int iterations = 0;
  // l1 deviation of both marginals.
  double marginal_error = 0.0;
};

// min <Q, -log P> s.t. Q 1 = 1/K, Q^T 1 = 1/n, solved by inexact proximal
// point iterations (KL proximal term, weight beta) with Sinkhorn-style inner
// scaling, run in the log domain. Converged means the marginal error and the
// change of the plan between outer iterations are both within tol.
AssignmentMatrix ipot_assign(const Matrix& p, const IpotOptions& options = {});

double transport_cost(const Matrix& q, const Matrix& p, double floor = 1e-30);

// Soft: pi_uk = n Q_ku. Hard: argmax per entity, lowest cluster on ties.
// Soft weights below `prune` are dropped and rows renormalized.
MembershipSet memberships_from_assignments(const Matrix& q, MembershipMode mode, double prune = 0.0);

struct ClassifierGradient {
  double cross_entropy = 0.0;
  ClassifierHead grad;
};

// E(p, q) = -(1/n) sum_u sum_y q(y|u) log p(y|u) with q(y|u) = n Q_yu held
// fixed, and its gradient w.r.t. the head parameters.
ClassifierGradient classifier_gradient(const RowMatrix& rows, const Matrix& q, const ClassifierHead& head);

struct ClassifierUpdate {
  ClassifierHead head;
  // Cross-entropy before the step.
  double cross_entropy = 0.0;
};

ClassifierUpdate update_classifier(const RowMatrix& rows, const Matrix& q, const ClassifierHead& head,
                                   double step_size);

}  // namespace ncl

#include "ncl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ncl/errors.hpp"
#include "ncl/rng.hpp"

namespace ncl {

std::span<const Index> CooccurrenceGraph::neighbours(Index v) const {
  const auto b = offsets_[static_cast<std::size_t>(v)];
  return {cols_.data() + b, offsets_[static_cast<std::size_t>(v) + 1] - b};
}

std::span<const int> CooccurrenceGraph::counts(Index v) const {
  const auto b = offsets_[static_cast<std::size_t>(v)];
  return {counts_.data() + b, offsets_[static_cast<std::size_t>(v) + 1] - b};
}

int CooccurrenceGraph::at(Index u, Index v) const {
  const auto row = neighbours(u);
  const auto it = std::lower_bound(row.begin(), row.end(), v);
  if (it == row.end() || *it != v) return 0;
  return counts(u)[static_cast<std::size_t>(it - row.begin())];
}

CooccurrenceGraph build_cooccurrence(const InteractionSet& train, Side side, std::size_t max_nnz) {
  if (train.empty()) throw EmptyDatasetError("co-occurrence needs a non-empty training set");
  const bool users = side == Side::User;
  const Index n = users ? train.num_users : train.num_items;
  const Index m = users ? train.num_items : train.num_users;
  // entity -> its neighbours, neighbour -> its entities
  std::vector<std::vector<Index>> own(static_cast<std::size_t>(n));
  std::vector<std::vector<Index>> via(static_cast<std::size_t>(m));
  for (const auto& r : train.records) {
    const Index a = users ? r.user : r.item;
    const Index b = users ? r.item : r.user;
    own[static_cast<std::size_t>(a)].push_back(b);
    via[static_cast<std::size_t>(b)].push_back(a);
  }

  CooccurrenceGraph g;
  g.offsets_.reserve(static_cast<std::size_t>(n) + 1);
  std::vector<int> scratch(static_cast<std::size_t>(n), 0);
  std::vector<Index> touched;
  for (Index v = 0; v < n; ++v) {
    touched.clear();
    for (Index b : own[static_cast<std::size_t>(v)]) {
      for (Index u : via[static_cast<std::size_t>(b)]) {
        if (scratch[static_cast<std::size_t>(u)]++ == 0) touched.push_back(u);
      }
    }
    std::sort(touched.begin(), touched.end());
    if (g.cols_.size() + touched.size() > max_nnz) {
      throw SizingError("co-occurrence graph exceeds " + std::to_string(max_nnz) + " nonzeros");
    }
    for (Index u : touched) {
      g.cols_.push_back(u);
      g.counts_.push_back(scratch[static_cast<std::size_t>(u)]);
      scratch[static_cast<std::size_t>(u)] = 0;
    }
    g.offsets_.push_back(g.cols_.size());
  }
  return g;
}

namespace {

// Linear-interpolation quantile of sorted values.
double quantile(std::vector<int>& values, double q) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

MembershipSet thresholded_memberships(const CooccurrenceGraph& graph, Threshold threshold) {
  if (threshold.kind == Threshold::Kind::Absolute && !(threshold.value > 0))
    throw std::invalid_argument("co-occurrence threshold must be positive");
  if (threshold.kind == Threshold::Kind::Quantile && !(threshold.value >= 0 && threshold.value <= 1))
    throw std::invalid_argument("co-occurrence quantile must lie in [0,1]");
  MembershipSet set;
  set.num_entities = graph.size();
  set.mode = MembershipMode::Indicator;
  std::vector<int> scratch;
  for (Index k = 0; k < graph.size(); ++k) {
    const auto rows = graph.neighbours(k);
    const auto counts = graph.counts(k);
    double eta = threshold.value;
    if (threshold.kind == Threshold::Kind::Quantile) {
      if (counts.empty()) continue;
      scratch.assign(counts.begin(), counts.end());
      eta = quantile(scratch, threshold.value);
    }
    Cluster c;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (counts[j] >= eta) {
        c.members.push_back(rows[j]);
        c.weights.push_back(1.0);
      }
    }
    if (!c.members.empty()) set.clusters.push_back(std::move(c));
  }
  return set;
}

MembershipSet sample_memberships(const MembershipSet& memberships, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample size must be >= 1");
  if (m >= memberships.num_clusters()) return memberships;
  std::vector<std::size_t> order(memberships.num_clusters());
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng(seed, 0x5a3d);
  // Partial Fisher-Yates: the first m slots are a uniform sample.
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  MembershipSet out;
  out.num_entities = memberships.num_entities;
  out.mode = memberships.mode;
  for (std::size_t i = 0; i < m; ++i) out.clusters.push_back(memberships.clusters[order[i]]);
  return out;
}

ClassifierHead ClassifierHead::init(int dim, int hidden, int clusters, std::uint64_t seed) {
  if (clusters < 2) throw std::invalid_argument("classifier needs K >= 2");
  ClassifierHead head;
  CounterRng rng(seed, 0xc1a55);
  const double s1 = std::sqrt(2.0 / dim);
  const double s2 = std::sqrt(1.0 / hidden);
  head.w1.resize(dim, hidden);
  for (Index j = 0; j < hidden; ++j)
    for (Index i = 0; i < dim; ++i) head.w1(i, j) = s1 * rng.normal();
  head.b1 = Vector::Zero(hidden);
  head.w2.resize(hidden, clusters);
  for (Index j = 0; j < clusters; ++j)
    for (Index i = 0; i < hidden; ++i) head.w2(i, j) = s2 * rng.normal();
  head.b2 = Vector::Zero(clusters);
  return head;
}

namespace {

struct HeadActivations {
  Matrix pre;     // n x h
  Matrix hidden;  // n x h
  Matrix logits;  // n x K
};

HeadActivations run_head(const RowMatrix& rows, const ClassifierHead& head) {
  if (rows.cols() != head.w1.rows()) throw std::invalid_argument("classifier input dimension mismatch");
  HeadActivations a;
  a.pre = rows * head.w1;
  a.pre.rowwise() += head.b1.transpose();
  a.hidden = a.pre.cwiseMax(0.0);
  a.logits = a.hidden * head.w2;
  a.logits.rowwise() += head.b2.transpose();
  return a;
}

// Row-wise softmax in place; returns row log-partition values.
Vector softmax_rows(Matrix& z) {
  Vector log_z(z.rows());
  for (Index u = 0; u < z.rows(); ++u) {
    const double peak = z.row(u).maxCoeff();
    z.row(u) = (z.row(u).array() - peak).exp();
    const double s = z.row(u).sum();
    z.row(u) /= s;
    log_z(u) = peak + std::log(s);
  }
  return log_z;
}

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double peak = x.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((x.array() - peak).exp().sum());
}

}  // namespace

Matrix classifier_logits(const RowMatrix& rows, const ClassifierHead& head) {
  return run_head(rows, head).logits.transpose();
}

Matrix classifier_forward(const RowMatrix& rows, const ClassifierHead& head) {
  Matrix z = run_head(rows, head).logits;
  softmax_rows(z);
  return z.transpose() / static_cast<double>(rows.rows());
}

double transport_cost(const Matrix& q, const Matrix& p, double floor) {
  return (q.array() * -(p.array().max(floor)).log()).sum();
}

AssignmentMatrix ipot_assign(const Matrix& p, const IpotOptions& options) {
  if (options.beta <= 0) throw std::invalid_argument("IPOT proximal weight must be positive");
  const Index k = p.rows();
  const Index n = p.cols();
  if (k < 1 || n < 1) throw std::invalid_argument("IPOT needs a non-empty matrix");
  const double log_a = -std::log(static_cast<double>(k));
  const double log_b = -std::log(static_cast<double>(n));
  const Matrix log_kernel = p.array().max(options.floor).log() / options.beta;

  Matrix log_plan = Matrix::Zero(k, n);
  Vector log_row(k);
  Vector log_col = Vector::Constant(n, log_b);
  Matrix plan = Matrix::Ones(k, n);
  Matrix scaled(k, n);

  AssignmentMatrix out;
  for (int it = 1; it <= options.iterations; ++it) {
    const Matrix log_q = log_kernel + log_plan;
    for (int inner = 0; inner < options.inner_iterations; ++inner) {
      for (Index r = 0; r < k; ++r) log_row(r) = log_a - log_sum_exp((log_q.row(r).transpose() + log_col));
      for (Index c = 0; c < n; ++c) log_col(c) = log_b - log_sum_exp(log_q.col(c) + log_row);
    }
    log_plan = log_q;
    log_plan.colwise() += log_row;
    log_plan.rowwise() += log_col.transpose();
    scaled = log_plan.array().exp();

    const double error = (scaled.rowwise().sum().array() - std::exp(log_a)).abs().sum() +
                         (scaled.colwise().sum().array() - std::exp(log_b)).abs().sum();
    const double change = (scaled - plan).cwiseAbs().sum();
    plan.swap(scaled);
    out.marginal_error = error;
    out.iterations = it;
    if (error <= options.tol && change <= options.tol) {
      out.converged = true;
      break;
    }
  }
  // The proximal iterates only lower the transport cost, so the last one is kept.
  out.q = std::move(plan);
  return out;
}

MembershipSet memberships_from_assignments(const Matrix& q, MembershipMode mode, double prune) {
  const Index k = q.rows();
  const Index n = q.cols();
  MembershipSet set;
  set.num_entities = n;
  set.mode = mode;
  set.clusters.resize(static_cast<std::size_t>(k));
  for (Index u = 0; u < n; ++u) {
    if (mode == MembershipMode::Hard) {
      Index arg = 0;
      for (Index c = 1; c < k; ++c)
        if (q(c, u) > q(arg, u)) arg = c;
      set.clusters[static_cast<std::size_t>(arg)].members.push_back(u);
      set.clusters[static_cast<std::size_t>(arg)].weights.push_back(1.0);
      continue;
    }
    Vector pi = static_cast<double>(n) * q.col(u);
    for (Index c = 0; c < k; ++c)
      if (pi(c) < prune) pi(c) = 0.0;
    const double total = pi.sum();
    if (total <= 0) throw std::invalid_argument("assignment column has no mass");
    pi /= total;
    for (Index c = 0; c < k; ++c) {
      if (pi(c) > 0) {
        set.clusters[static_cast<std::size_t>(c)].members.push_back(u);
        set.clusters[static_cast<std::size_t>(c)].weights.push_back(pi(c));
      }
    }
  }
  return set;
}

ClassifierGradient classifier_gradient(const RowMatrix& rows, const Matrix& q, const ClassifierHead& head) {
  const Index n = rows.rows();
  if (q.rows() != head.num_clusters() || q.cols() != n) throw std::invalid_argument("assignment shape mismatch");
  auto act = run_head(rows, head);
  Matrix probs = act.logits;
  const Vector log_z = softmax_rows(probs);
  const Matrix target = static_cast<double>(n) * q.transpose();  // q(y|u), n x K

  ClassifierGradient out;
  double ce = 0;
  for (Index u = 0; u < n; ++u) {
    for (Index y = 0; y < target.cols(); ++y) {
      if (target(u, y) != 0.0) ce -= target(u, y) * (act.logits(u, y) - log_z(u));
    }
  }
  out.cross_entropy = ce / static_cast<double>(n);

  const Vector target_mass = target.rowwise().sum();
  const Matrix d_logits = (target_mass.asDiagonal() * probs - target) / static_cast<double>(n);
  out.grad.w2 = act.hidden.transpose() * d_logits;
  out.grad.b2 = d_logits.colwise().sum().transpose();
  const Matrix d_hidden = (d_logits * head.w2.transpose()).cwiseProduct((act.pre.array() > 0).cast<double>().matrix());
  out.grad.w1 = rows.transpose() * d_hidden;
  out.grad.b1 = d_hidden.colwise().sum().transpose();
  return out;
}

ClassifierUpdate update_classifier(const RowMatrix& rows, const Matrix& q, const ClassifierHead& head,
                                   double step_size) {
  const auto g = classifier_gradient(rows, q, head);
  ClassifierUpdate out;
  out.cross_entropy = g.cross_entropy;
  out.head = head;
  out.head.w1 -= step_size * g.grad.w1;
  out.head.b1 -= step_size * g.grad.b1;
  out.head.w2 -= step_size * g.grad.w2;
  out.head.b2 -= step_size * g.grad.b2;
  return out;
}

}  // namespace ncl

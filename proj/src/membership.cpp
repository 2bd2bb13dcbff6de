#include "ncl/membership.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncl {

const char* to_string(MembershipMode mode) {
  switch (mode) {
    case MembershipMode::Hard: return "hard";
    case MembershipMode::Soft: return "soft";
    case MembershipMode::Indicator: return "indicator";
  }
  return "unknown";
}

double Cluster::trace() const {
  double t = 0;
  for (double w : weights) t += w;
  return t;
}

Matrix MembershipSet::dense() const {
  Matrix pi = Matrix::Zero(num_entities, static_cast<Index>(clusters.size()));
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& c = clusters[k];
    for (std::size_t j = 0; j < c.members.size(); ++j) pi(c.members[j], static_cast<Index>(k)) += c.weights[j];
  }
  return pi;
}

void MembershipSet::validate(double tol) const {
  Vector row_sum = Vector::Zero(num_entities);
  std::vector<int> nonzeros(static_cast<std::size_t>(num_entities), 0);
  for (const auto& c : clusters) {
    if (c.members.size() != c.weights.size()) throw std::logic_error("cluster members/weights mismatch");
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      const double w = c.weights[j];
      if (c.members[j] < 0 || c.members[j] >= num_entities) throw std::logic_error("member index out of range");
      if (!(w >= 0.0 && w <= 1.0 + tol)) throw std::logic_error("membership weight outside [0,1]");
      row_sum(c.members[j]) += w;
      if (w > 0) ++nonzeros[static_cast<std::size_t>(c.members[j])];
    }
  }
  if (mode == MembershipMode::Indicator) return;
  for (Index u = 0; u < num_entities; ++u) {
    if (std::abs(row_sum(u) - 1.0) > tol)
      throw std::logic_error("membership row " + std::to_string(u) + " sums to " + std::to_string(row_sum(u)));
    if (mode == MembershipMode::Hard && nonzeros[static_cast<std::size_t>(u)] != 1)
      throw std::logic_error("hard membership row " + std::to_string(u) + " is not one-hot");
  }
}

MembershipSet MembershipSet::single_cluster(Index n) {
  MembershipSet set;
  set.num_entities = n;
  set.mode = MembershipMode::Hard;
  Cluster c;
  c.members.resize(static_cast<std::size_t>(n));
  for (Index u = 0; u < n; ++u) c.members[static_cast<std::size_t>(u)] = u;
  c.weights.assign(static_cast<std::size_t>(n), 1.0);
  set.clusters.push_back(std::move(c));
  return set;
}

MembershipSet MembershipSet::from_dense(const Matrix& pi, MembershipMode mode) {
  MembershipSet set;
  set.num_entities = pi.rows();
  set.mode = mode;
  for (Index k = 0; k < pi.cols(); ++k) {
    Cluster c;
    for (Index u = 0; u < pi.rows(); ++u) {
      if (pi(u, k) > 0) {
        c.members.push_back(u);
        c.weights.push_back(pi(u, k));
      }
    }
    set.clusters.push_back(std::move(c));
  }
  return set;
}

RestrictedMemberships restrict_memberships(const MembershipSet& set, std::span<const Index> entities) {
  std::vector<Index> local(static_cast<std::size_t>(set.num_entities), -1);
  for (std::size_t j = 0; j < entities.size(); ++j) local[static_cast<std::size_t>(entities[j])] = static_cast<Index>(j);

  RestrictedMemberships out;
  out.set.num_entities = static_cast<Index>(entities.size());
  out.set.mode = set.mode;
  for (const auto& c : set.clusters) {
    Cluster kept;
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      const Index pos = local[static_cast<std::size_t>(c.members[j])];
      if (pos >= 0 && c.weights[j] > 0) {
        kept.members.push_back(pos);
        kept.weights.push_back(c.weights[j]);
      }
    }
    if (kept.members.empty()) {
      ++out.dropped;
      continue;
    }
    out.set.clusters.push_back(std::move(kept));
  }
  if (set.mode == MembershipMode::Indicator) return out;

  Vector row_sum = Vector::Zero(out.set.num_entities);
  for (const auto& c : out.set.clusters)
    for (std::size_t j = 0; j < c.members.size(); ++j) row_sum(c.members[j]) += c.weights[j];
  for (auto& c : out.set.clusters)
    for (std::size_t j = 0; j < c.members.size(); ++j) c.weights[j] /= row_sum(c.members[j]);
  return out;
}

}  // namespace ncl

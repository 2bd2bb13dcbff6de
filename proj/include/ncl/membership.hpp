#pragma once

#include <span>
#include <vector>

#include "ncl/types.hpp"

namespace ncl {

enum class MembershipMode {
  // one-hot rows
  Hard,
  // probability rows summing to 1
  Soft,
  // overlapping 0/1 clusters from co-occurrence thresholding; rows may sum past 1
  Indicator,
};

const char* to_string(MembershipMode mode);

// Nonzero diagonal of one membership matrix Pi_k.
struct Cluster {
  std::vector<Index> members;
  std::vector<double> weights;

  double trace() const;
  std::size_t size() const { return members.size(); }
};

// Clusters over `num_entities` users (or items), stored sparsely per cluster.
struct MembershipSet {
  Index num_entities = 0;
  MembershipMode mode = MembershipMode::Soft;
  std::vector<Cluster> clusters;

  std::size_t num_clusters() const { return clusters.size(); }

  // Pi as a dense num_entities x K matrix.
  Matrix dense() const;
  // Throws std::logic_error if weights leave [0,1], or (hard/soft) a row does
  // not sum to 1 within tol, or (hard) a row is not one-hot.
  void validate(double tol = 1e-8) const;

  static MembershipSet single_cluster(Index n);
  static MembershipSet from_dense(const Matrix& pi, MembershipMode mode);
};

struct RestrictedMemberships {
  MembershipSet set;
  // Clusters with no weight left among the selected entities.
  std::size_t dropped = 0;
};

// Memberships over the listed entities, re-indexed to their positions in
// `entities`. Hard and soft rows are renormalized over the clusters present;
// indicator weights are kept as-is. Empty clusters are dropped.
RestrictedMemberships restrict_memberships(const MembershipSet& set, std::span<const Index> entities);

}  // namespace ncl

#pragma once

// Reference computations shared by the unit tests and the acceptance run.

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <set>

#include "ncl/dataset.hpp"
#include "ncl/evaluator.hpp"
#include "ncl/membership.hpp"
#include "ncl/objectives.hpp"
#include "support.hpp"

namespace ncl::test {

inline std::vector<TripleIndex> random_triples(Index users, Index items, int count, CounterRng& rng) {
  std::vector<TripleIndex> out;
  for (int k = 0; k < count; ++k) {
    const Index u = static_cast<Index>(rng.below(users));
    const Index i = static_cast<Index>(rng.below(items));
    Index j = static_cast<Index>(rng.below(items));
    if (j == i) j = (j + 1) % items;
    out.push_back({u, i, j});
  }
  return out;
}

inline std::vector<PairIndex> random_pairs(Index users, Index items, int count, CounterRng& rng) {
  std::vector<PairIndex> out;
  for (int k = 0; k < count; ++k)
    out.push_back({static_cast<Index>(rng.below(users)), static_cast<Index>(rng.below(items))});
  return out;
}

inline Matrix unit_columns(Index d, Index n, CounterRng& rng) { return unit_rows(n, d, rng).transpose(); }

inline MembershipSet random_soft(Index n, Index k, CounterRng& rng) {
  Matrix pi(n, k);
  for (Index u = 0; u < n; ++u) {
    for (Index c = 0; c < k; ++c) pi(u, c) = 0.05 + rng.uniform();
    pi.row(u) /= pi.row(u).sum();
  }
  return MembershipSet::from_dense(pi, MembershipMode::Soft);
}

// 1/2 sum log(1 + t s_i^2) over the singular values of E.
inline double svd_rate(const Matrix& e, double eps_sq) {
  const double t = static_cast<double>(e.rows()) / (static_cast<double>(e.cols()) * eps_sq);
  Eigen::JacobiSVD<Matrix> svd(e);
  double sum = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i) sum += std::log1p(t * std::pow(svd.singularValues()(i), 2));
  return 0.5 * sum;
}

inline InteractionSet random_graph(Id users, Id items, std::size_t edges, CounterRng& rng) {
  std::set<std::pair<Id, Id>> e;
  while (e.size() < edges) e.insert({static_cast<Id>(rng.below(users)), static_cast<Id>(rng.below(items))});
  InteractionSet set;
  set.num_users = users;
  set.num_items = items;
  for (auto [u, i] : e) set.records.push_back({u, i, std::nullopt});
  return set;
}

// Column-stochastic K x n matrix scaled to columns summing to 1/n.
inline Matrix random_p(Index k, Index n, CounterRng& rng, double spread = 1.0) {
  Matrix p(k, n);
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r < k; ++r) p(r, c) = std::exp(spread * rng.normal());
    p.col(c) /= p.col(c).sum() * static_cast<double>(n);
  }
  return p;
}

inline double marginal_error(const Matrix& q) {
  const double k = static_cast<double>(q.rows()), n = static_cast<double>(q.cols());
  return (q.rowwise().sum().array() - 1 / k).abs().sum() + (q.colwise().sum().array() - 1 / n).abs().sum();
}

// 2x2 problem from cell (i, j) of the 10x10 grid: column c puts mass p_c/2 on
// cluster 0. Feasible plans are [[x, 1/2 - x], [1/2 - x, x]] and the cost is
// linear in x, so the optimum is x = 1/2 or x = 0 (every x when tied).
struct Grid2x2 {
  Matrix p;
  bool tie;
  Matrix exact;
};

inline Grid2x2 grid_2x2(int i, int j) {
  const double p1 = 0.05 + 0.1 * i, p2 = 0.05 + 0.1 * j;
  Grid2x2 g;
  g.p.resize(2, 2);
  g.p << p1 / 2, p2 / 2, (1 - p1) / 2, (1 - p2) / 2;
  g.tie = i == j;
  const double x = p1 > p2 ? 0.5 : 0.0;
  g.exact.resize(2, 2);
  g.exact << x, 0.5 - x, 0.5 - x, x;
  return g;
}

inline double lp_2x2_cost(const Matrix& p) {
  const Matrix cost = -p.array().log().matrix();
  return std::min(0.5 * (cost(0, 0) + cost(1, 1)), 0.5 * (cost(0, 1) + cost(1, 0)));
}

struct RankInstance {
  RowMatrix users;
  RowMatrix items;
  ItemLists truth;
  ItemLists mask;
};

// Scores are drawn from a coarse grid so that ties actually occur.
inline RankInstance random_rank_instance(CounterRng& rng) {
  const Index nu = 1 + static_cast<Index>(rng.below(20));
  const Index ni = 10 + static_cast<Index>(rng.below(41));
  RankInstance x;
  x.users = random_rows(nu, 3, rng);
  x.items = random_rows(ni, 3, rng);
  x.items = (x.items * 2).array().round() / 2;
  x.users = (x.users * 2).array().round() / 2;
  x.truth.resize(static_cast<std::size_t>(nu));
  x.mask.resize(static_cast<std::size_t>(nu));
  for (Index u = 0; u < nu; ++u) {
    for (Id i = 0; i < ni; ++i) {
      const double r = rng.uniform();
      if (r < 0.1) x.truth[u].push_back(i);
      else if (r < 0.3) x.mask[u].push_back(i);
    }
  }
  return x;
}

// Full sort of all unmasked items per user.
inline RankingMetrics ranking_oracle(const RankInstance& x, const std::vector<int>& cutoffs) {
  RankingMetrics m;
  m.cutoffs = cutoffs;
  m.recall.assign(cutoffs.size(), 0.0);
  m.ndcg.assign(cutoffs.size(), 0.0);
  for (Index u = 0; u < x.users.rows(); ++u) {
    const auto& gt = x.truth[u];
    if (gt.empty()) continue;
    ++m.num_users;
    std::vector<Id> order;
    for (Id i = 0; i < x.items.rows(); ++i)
      if (std::find(x.mask[u].begin(), x.mask[u].end(), i) == x.mask[u].end()) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](Id a, Id b) {
      const double sa = x.users.row(u).dot(x.items.row(a)), sb = x.users.row(u).dot(x.items.row(b));
      return sa != sb ? sa > sb : a < b;
    });
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const int n = cutoffs[c];
      double hits = 0, dcg = 0, idcg = 0;
      for (int r = 0; r < n && r < static_cast<int>(order.size()); ++r)
        if (std::find(gt.begin(), gt.end(), order[r]) != gt.end()) {
          hits += 1;
          dcg += 1 / std::log2(r + 2.0);
        }
      for (int r = 0; r < std::min<int>(n, static_cast<int>(gt.size())); ++r) idcg += 1 / std::log2(r + 2.0);
      m.recall[c] += hits / static_cast<double>(gt.size());
      m.ndcg[c] += dcg / idcg;
    }
  }
  for (std::size_t c = 0; c < cutoffs.size(); ++c)
    if (m.num_users > 0) {
      m.recall[c] /= static_cast<double>(m.num_users);
      m.ndcg[c] /= static_cast<double>(m.num_users);
    }
  return m;
}

inline RankRequest rank_request(const RankInstance& x, std::vector<int> cutoffs) {
  RankRequest r;
  r.users = &x.users;
  r.items = &x.items;
  r.ground_truth = &x.truth;
  r.masks = {&x.mask};
  r.cutoffs = std::move(cutoffs);
  return r;
}

}  // namespace ncl::test

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncl/types.hpp"

namespace ncl {

struct RankingMetrics {
  std::vector<int> cutoffs;
  std::vector<double> recall;
  std::vector<double> ndcg;
  Index num_users = 0;

  // Throws std::out_of_range for a cutoff that was not evaluated.
  double recall_at(int cutoff) const;
  double ndcg_at(int cutoff) const;
};

// Per-user item lists, indexed by user id.
using ItemLists = std::vector<std::vector<Id>>;

struct RankRequest {
  const RowMatrix* users = nullptr;
  const RowMatrix* items = nullptr;
  const ItemLists* ground_truth = nullptr;
  // Items excluded from each user's ranking.
  std::vector<const ItemLists*> masks;
  std::vector<int> cutoffs;
  // Evaluate only these users when non-empty.
  std::span<const Id> user_subset;
};

// Top-n list of one user: items by descending score, ties to the lower index,
// masked items skipped.
std::vector<Id> top_items(const RankRequest& request, Id user, int n);

RankingMetrics rank_and_score(const RankRequest& request);

struct BucketMetrics {
  // [lower, upper) over item training degree; upper < 0 means unbounded.
  double lower = 0;
  double upper = -1;
  std::size_t test_interactions = 0;
  std::optional<RankingMetrics> metrics;
};

// Same ranking as rank_and_score but with each user's ground truth restricted
// to items whose degree falls in the bucket. The last bucket is open-ended.
std::vector<BucketMetrics> degree_bucket_eval(const RankRequest& request, std::span<const Id> item_degrees,
                                              std::span<const double> edges);

// {"10": {"recall": .., "ndcg": ..}, ...} plus an optional "buckets" array.
std::string metrics_json(const RankingMetrics& metrics, const std::vector<BucketMetrics>* buckets = nullptr);
std::string metrics_csv(const RankingMetrics& metrics);

}  // namespace ncl

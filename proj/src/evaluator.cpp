#include "ncl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ncl {

namespace {

std::size_t find_cutoff(const std::vector<int>& cutoffs, int cutoff) {
  const auto it = std::find(cutoffs.begin(), cutoffs.end(), cutoff);
  if (it == cutoffs.end()) throw std::out_of_range("cutoff " + std::to_string(cutoff) + " was not evaluated");
  return static_cast<std::size_t>(it - cutoffs.begin());
}

void check_request(const RankRequest& r) {
  if (!r.users || !r.items || !r.ground_truth) throw std::invalid_argument("incomplete ranking request");
  if (r.cutoffs.empty()) throw std::invalid_argument("no cutoffs given");
  if (!std::is_sorted(r.cutoffs.begin(), r.cutoffs.end()) || r.cutoffs.front() < 1)
    throw std::invalid_argument("cutoffs must be positive and ascending");
  if (r.cutoffs.back() > r.items->rows()) throw std::invalid_argument("cutoff exceeds the number of items");
}

RankingMetrics score_users(const RankRequest& request, const ItemLists& truth) {
  check_request(request);
  RankingMetrics out;
  out.cutoffs = request.cutoffs;
  out.recall.assign(out.cutoffs.size(), 0.0);
  out.ndcg.assign(out.cutoffs.size(), 0.0);
  const int max_n = out.cutoffs.back();

  std::vector<Id> all_users;
  std::span<const Id> users = request.user_subset;
  if (users.empty()) {
    all_users.resize(truth.size());
    std::iota(all_users.begin(), all_users.end(), 0);
    users = all_users;
  }
  // 1 / log2(rank + 1) for rank = 1..max_n
  std::vector<double> discount(static_cast<std::size_t>(max_n));
  for (int r = 0; r < max_n; ++r) discount[static_cast<std::size_t>(r)] = 1.0 / std::log2(r + 2.0);

  std::vector<char> relevant(static_cast<std::size_t>(request.items->rows()), 0);
  for (Id u : users) {
    const auto& gt = truth[static_cast<std::size_t>(u)];
    if (gt.empty()) continue;
    ++out.num_users;
    for (Id i : gt) relevant[static_cast<std::size_t>(i)] = 1;
    const auto top = top_items(request, u, max_n);
    std::size_t c = 0;
    double hits = 0;
    double dcg = 0;
    double idcg = 0;
    for (int rank = 0; rank < max_n; ++rank) {
      if (rank < static_cast<int>(top.size()) && relevant[static_cast<std::size_t>(top[rank])]) {
        hits += 1;
        dcg += discount[static_cast<std::size_t>(rank)];
      }
      if (rank < static_cast<int>(gt.size())) idcg += discount[static_cast<std::size_t>(rank)];
      while (c < out.cutoffs.size() && out.cutoffs[c] == rank + 1) {
        out.recall[c] += hits / static_cast<double>(gt.size());
        out.ndcg[c] += dcg / idcg;
        ++c;
      }
    }
    for (Id i : gt) relevant[static_cast<std::size_t>(i)] = 0;
  }
  if (out.num_users > 0) {
    for (std::size_t c = 0; c < out.cutoffs.size(); ++c) {
      out.recall[c] /= static_cast<double>(out.num_users);
      out.ndcg[c] /= static_cast<double>(out.num_users);
    }
  }
  return out;
}

std::string bound_label(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

double RankingMetrics::recall_at(int cutoff) const { return recall[find_cutoff(cutoffs, cutoff)]; }
double RankingMetrics::ndcg_at(int cutoff) const { return ndcg[find_cutoff(cutoffs, cutoff)]; }

std::vector<Id> top_items(const RankRequest& request, Id user, int n) {
  const RowMatrix& items = *request.items;
  const Vector scores = items * request.users->row(user).transpose();
  std::vector<char> masked(static_cast<std::size_t>(items.rows()), 0);
  for (const ItemLists* mask : request.masks) {
    if (!mask || static_cast<std::size_t>(user) >= mask->size()) continue;
    for (Id i : (*mask)[static_cast<std::size_t>(user)]) masked[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<Id> candidates;
  candidates.reserve(static_cast<std::size_t>(items.rows()));
  for (Id i = 0; i < items.rows(); ++i)
    if (!masked[static_cast<std::size_t>(i)]) candidates.push_back(i);
  const auto better = [&](Id a, Id b) { return scores(a) != scores(b) ? scores(a) > scores(b) : a < b; };
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(n), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    better);
  candidates.resize(take);
  return candidates;
}

RankingMetrics rank_and_score(const RankRequest& request) { return score_users(request, *request.ground_truth); }

std::vector<BucketMetrics> degree_bucket_eval(const RankRequest& request, std::span<const Id> item_degrees,
                                              std::span<const double> edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
    throw std::invalid_argument("bucket edges must be non-empty and ascending");
  std::vector<BucketMetrics> out;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    BucketMetrics bucket;
    bucket.lower = edges[b];
    bucket.upper = b + 1 < edges.size() ? edges[b + 1] : -1.0;
    const auto inside = [&](Id item) {
      const double deg = item_degrees[static_cast<std::size_t>(item)];
      return deg >= bucket.lower && (bucket.upper < 0 || deg < bucket.upper);
    };
    ItemLists restricted(request.ground_truth->size());
    for (std::size_t u = 0; u < restricted.size(); ++u) {
      for (Id i : (*request.ground_truth)[u]) {
        if (inside(i)) restricted[u].push_back(i);
      }
      bucket.test_interactions += restricted[u].size();
    }
    if (bucket.test_interactions > 0) bucket.metrics = score_users(request, restricted);
    out.push_back(std::move(bucket));
  }
  return out;
}

std::string metrics_json(const RankingMetrics& metrics, const std::vector<BucketMetrics>* buckets) {
  const auto cutoff_block = [](const RankingMetrics& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < m.cutoffs.size(); ++c)
      j[std::to_string(m.cutoffs[c])] = {{"recall", m.recall[c]}, {"ndcg", m.ndcg[c]}};
    return j;
  };
  nlohmann::ordered_json j = cutoff_block(metrics);
  j["users"] = metrics.num_users;
  if (buckets) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : *buckets) {
      nlohmann::ordered_json e;
      e["lower"] = b.lower;
      e["upper"] = b.upper < 0 ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(b.upper);
      e["label"] = "[" + bound_label(b.lower) + ", " + (b.upper < 0 ? std::string("inf") : bound_label(b.upper)) + ")";
      e["test_interactions"] = b.test_interactions;
      if (b.metrics) {
        e["users"] = b.metrics->num_users;
        e["metrics"] = cutoff_block(*b.metrics);
      } else {
        e["users"] = 0;
        e["metrics"] = nullptr;
      }
      arr.push_back(std::move(e));
    }
    j["buckets"] = std::move(arr);
  }
  return j.dump(2) + "\n";
}

std::string metrics_csv(const RankingMetrics& metrics) {
  std::ostringstream s;
  s.precision(17);
  s << "cutoff,recall,ndcg\n";
  for (std::size_t c = 0; c < metrics.cutoffs.size(); ++c)
    s << metrics.cutoffs[c] << ',' << metrics.recall[c] << ',' << metrics.ndcg[c] << '\n';
  return s.str();
}

}  // namespace ncl

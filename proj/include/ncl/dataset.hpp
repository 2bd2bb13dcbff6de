#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncl/types.hpp"

namespace ncl {

struct Interaction {
  Id user = 0;
  Id item = 0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const Interaction& a, const Interaction& b) {
    return a.user == b.user && a.item == b.item;
  }
};

// Raw id strings indexed by contiguous id.
struct IdTable {
  std::vector<std::string> users;
  std::vector<std::string> items;
};

struct InteractionSet {
  Id num_users = 0;
  Id num_items = 0;
  std::vector<Interaction> records;
  std::shared_ptr<const IdTable> ids;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
  // Item lists per user, sorted ascending.
  std::vector<std::vector<Id>> items_by_user() const;
  std::vector<Id> user_degrees() const;
  std::vector<Id> item_degrees() const;
};

enum class InputFormat {
  // whitespace separated: user item [timestamp]
  Tsv,
  // comma separated: user,item[,timestamp]
  Csv,
  // MovieLens u.data: user item rating timestamp
  MovieLens,
};

InputFormat parse_format(std::string_view name);

InteractionSet parse_interactions(std::istream& in, InputFormat format);
InteractionSet load_interactions(const std::filesystem::path& path, InputFormat format);

// Iteratively drops users and items with fewer than k interactions, then
// re-compacts ids preserving relative order.
InteractionSet apply_k_core(const InteractionSet& set, int k);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

SplitRatios parse_ratios(std::string_view text);

struct SplitDataset {
  InteractionSet train;
  InteractionSet valid;
  InteractionSet test;
  std::uint64_t split_seed = 0;
};

SplitDataset split_per_user(const InteractionSet& set, SplitRatios ratios, std::uint64_t seed);

// Symmetric-normalized bipartite operator with weights 1/sqrt(|N_u| |N_i|),
// held both by user rows and by item rows.
class NormalizedAdjacency {
 public:
  NormalizedAdjacency() = default;

  Id num_users() const { return num_users_; }
  Id num_items() const { return num_items_; }
  std::size_t num_edges() const { return user_items_.size(); }

  std::span<const Id> user_degrees() const { return user_degree_; }
  std::span<const Id> item_degrees() const { return item_degree_; }
  Id isolated_users() const { return isolated_users_; }
  Id isolated_items() const { return isolated_items_; }

  std::span<const Id> items_of(Id user) const;
  std::span<const double> weights_of_user(Id user) const;
  std::span<const Id> users_of(Id item) const;
  std::span<const double> weights_of_item(Id item) const;

  // 0 when (user, item) is not an edge.
  double weight(Id user, Id item) const;

  // out(u) = sum_i w_ui x(i); out is resized to num_users x cols.
  void gather_to_users(const RowMatrix& item_rows, RowMatrix& out) const;
  // out(i) = sum_u w_ui y(u).
  void gather_to_items(const RowMatrix& user_rows, RowMatrix& out) const;

  friend NormalizedAdjacency build_adjacency(const InteractionSet& train);

 private:
  Id num_users_ = 0;
  Id num_items_ = 0;
  std::vector<std::size_t> user_offsets_;
  std::vector<Id> user_items_;
  std::vector<double> user_weights_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Id> item_users_;
  std::vector<double> item_weights_;
  std::vector<Id> user_degree_;
  std::vector<Id> item_degree_;
  Id isolated_users_ = 0;
  Id isolated_items_ = 0;
};

NormalizedAdjacency build_adjacency(const InteractionSet& train);

}  // namespace ncl

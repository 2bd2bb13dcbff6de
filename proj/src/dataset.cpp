#include "ncl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_map>
#include <unordered_set>

#include "ncl/errors.hpp"
#include "ncl/rng.hpp"

namespace ncl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, InputFormat format) {
  std::vector<std::string_view> fields;
  if (format == InputFormat::Csv) {
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
      while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
      fields.push_back(field);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t begin = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > begin) fields.push_back(line.substr(begin, i - begin));
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::int64_t parse_int(std::string_view text, std::size_t line, const char* what) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

class Interner {
 public:
  Id intern(std::string_view raw) {
    auto [it, inserted] = index_.try_emplace(std::string(raw), static_cast<Id>(names_.size()));
    if (inserted) names_.emplace_back(raw);
    return it->second;
  }
  std::vector<std::string> release() { return std::move(names_); }

 private:
  std::unordered_map<std::string, Id> index_;
  std::vector<std::string> names_;
};

std::uint64_t pair_key(Id user, Id item) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(user)) << 32) |
         static_cast<std::uint32_t>(item);
}

}  // namespace

std::vector<std::vector<Id>> InteractionSet::items_by_user() const {
  std::vector<std::vector<Id>> lists(static_cast<std::size_t>(num_users));
  for (const auto& r : records) lists[r.user].push_back(r.item);
  for (auto& l : lists) std::sort(l.begin(), l.end());
  return lists;
}

std::vector<Id> InteractionSet::user_degrees() const {
  std::vector<Id> deg(static_cast<std::size_t>(num_users), 0);
  for (const auto& r : records) ++deg[r.user];
  return deg;
}

std::vector<Id> InteractionSet::item_degrees() const {
  std::vector<Id> deg(static_cast<std::size_t>(num_items), 0);
  for (const auto& r : records) ++deg[r.item];
  return deg;
}

InputFormat parse_format(std::string_view name) {
  if (name == "tsv" || name == "txt" || name == "whitespace") return InputFormat::Tsv;
  if (name == "csv") return InputFormat::Csv;
  if (name == "ml100k" || name == "movielens") return InputFormat::MovieLens;
  throw InputError("unknown input format '" + std::string(name) + "'");
}

InteractionSet parse_interactions(std::istream& in, InputFormat format) {
  Interner users;
  Interner items;
  InteractionSet set;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line) || line.front() == '#') continue;
    const auto fields = split_fields(line, format);
    std::optional<std::int64_t> timestamp;
    if (format == InputFormat::MovieLens) {
      if (fields.size() != 4) throw ParseError(line_no, "expected 4 fields: user item rating timestamp");
      timestamp = parse_int(fields[3], line_no, "timestamp");
    } else {
      if (fields.size() < 2 || fields.size() > 3) throw ParseError(line_no, "expected 2 or 3 fields");
      if (fields.size() == 3) timestamp = parse_int(fields[2], line_no, "timestamp");
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty id");
    const Id u = users.intern(fields[0]);
    const Id i = items.intern(fields[1]);
    if (seen.insert(pair_key(u, i)).second) set.records.push_back({u, i, timestamp});
  }
  if (set.records.empty()) throw EmptyDatasetError("no interactions in input");
  auto ids = std::make_shared<IdTable>();
  ids->users = users.release();
  ids->items = items.release();
  set.num_users = static_cast<Id>(ids->users.size());
  set.num_items = static_cast<Id>(ids->items.size());
  set.ids = std::move(ids);
  return set;
}

InteractionSet load_interactions(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path.string());
  return parse_interactions(in, format);
}

InteractionSet apply_k_core(const InteractionSet& set, int k) {
  if (k < 1) throw InputError("k-core requires k >= 1");
  std::vector<char> alive(set.records.size(), 1);
  auto user_deg = set.user_degrees();
  auto item_deg = set.item_degrees();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < set.records.size(); ++r) {
      if (!alive[r]) continue;
      const auto& rec = set.records[r];
      if (user_deg[rec.user] < k || item_deg[rec.item] < k) {
        alive[r] = 0;
        --user_deg[rec.user];
        --item_deg[rec.item];
        changed = true;
      }
    }
  }

  std::vector<Id> user_map(static_cast<std::size_t>(set.num_users), -1);
  std::vector<Id> item_map(static_cast<std::size_t>(set.num_items), -1);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    if (!alive[r]) continue;
    user_map[set.records[r].user] = 0;
    item_map[set.records[r].item] = 0;
  }
  auto ids = std::make_shared<IdTable>();
  Id next = 0;
  for (Id u = 0; u < set.num_users; ++u) {
    if (user_map[u] < 0) continue;
    user_map[u] = next++;
    if (set.ids) ids->users.push_back(set.ids->users[u]);
  }
  InteractionSet out;
  out.num_users = next;
  next = 0;
  for (Id i = 0; i < set.num_items; ++i) {
    if (item_map[i] < 0) continue;
    item_map[i] = next++;
    if (set.ids) ids->items.push_back(set.ids->items[i]);
  }
  out.num_items = next;
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    if (!alive[r]) continue;
    const auto& rec = set.records[r];
    out.records.push_back({user_map[rec.user], item_map[rec.item], rec.timestamp});
  }
  if (out.records.empty()) throw EmptyDatasetError("no interactions left after " + std::to_string(k) + "-core filtering");
  out.ids = std::move(ids);
  return out;
}

SplitRatios parse_ratios(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    try {
      parts.push_back(std::stod(std::string(piece)));
    } catch (const std::exception&) {
      throw InputError("invalid split ratio '" + std::string(piece) + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) throw InputError("split needs three ratios train,valid,test");
  return {parts[0], parts[1], parts[2]};
}

SplitDataset split_per_user(const InteractionSet& set, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw InputError("split ratios must be positive and sum to 1");
  }
  SplitDataset out;
  out.split_seed = seed;
  for (InteractionSet* part : {&out.train, &out.valid, &out.test}) {
    part->num_users = set.num_users;
    part->num_items = set.num_items;
    part->ids = set.ids;
  }
  const auto lists = set.items_by_user();
  for (Id u = 0; u < set.num_users; ++u) {
    std::vector<Id> items = lists[u];
    const auto n = items.size();
    if (n < 3) {
      for (Id i : items) out.train.records.push_back({u, i, std::nullopt});
      continue;
    }
    CounterRng rng(seed, static_cast<std::uint64_t>(u));
    shuffle(std::span<Id>(items), rng);
    // The small tolerance keeps e.g. 0.1 * 30 from flooring to 2.
    auto n_test = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n) + 1e-9));
    auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n) + 1e-9));
    std::size_t pos = 0;
    for (; pos < n_test; ++pos) out.test.records.push_back({u, items[pos], std::nullopt});
    for (; pos < n_test + n_valid; ++pos) out.valid.records.push_back({u, items[pos], std::nullopt});
    for (; pos < n; ++pos) out.train.records.push_back({u, items[pos], std::nullopt});
  }
  const auto by_pair = [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  };
  for (InteractionSet* part : {&out.train, &out.valid, &out.test}) {
    std::sort(part->records.begin(), part->records.end(), by_pair);
  }
  return out;
}

std::span<const Id> NormalizedAdjacency::items_of(Id user) const {
  const auto b = user_offsets_[user];
  return {user_items_.data() + b, user_offsets_[user + 1] - b};
}

std::span<const double> NormalizedAdjacency::weights_of_user(Id user) const {
  const auto b = user_offsets_[user];
  return {user_weights_.data() + b, user_offsets_[user + 1] - b};
}

std::span<const Id> NormalizedAdjacency::users_of(Id item) const {
  const auto b = item_offsets_[item];
  return {item_users_.data() + b, item_offsets_[item + 1] - b};
}

std::span<const double> NormalizedAdjacency::weights_of_item(Id item) const {
  const auto b = item_offsets_[item];
  return {item_weights_.data() + b, item_offsets_[item + 1] - b};
}

double NormalizedAdjacency::weight(Id user, Id item) const {
  const auto items = items_of(user);
  const auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) return 0.0;
  return weights_of_user(user)[static_cast<std::size_t>(it - items.begin())];
}

void NormalizedAdjacency::gather_to_users(const RowMatrix& item_rows, RowMatrix& out) const {
  out.setZero(num_users_, item_rows.cols());
  for (Id u = 0; u < num_users_; ++u) {
    const auto items = items_of(u);
    const auto w = weights_of_user(u);
    auto row = out.row(u);
    for (std::size_t k = 0; k < items.size(); ++k) row.noalias() += w[k] * item_rows.row(items[k]);
  }
}

void NormalizedAdjacency::gather_to_items(const RowMatrix& user_rows, RowMatrix& out) const {
  out.setZero(num_items_, user_rows.cols());
  for (Id i = 0; i < num_items_; ++i) {
    const auto users = users_of(i);
    const auto w = weights_of_item(i);
    auto row = out.row(i);
    for (std::size_t k = 0; k < users.size(); ++k) row.noalias() += w[k] * user_rows.row(users[k]);
  }
}

NormalizedAdjacency build_adjacency(const InteractionSet& train) {
  if (train.empty()) throw EmptyDatasetError("cannot build adjacency from an empty training set");
  NormalizedAdjacency adj;
  adj.num_users_ = train.num_users;
  adj.num_items_ = train.num_items;
  adj.user_degree_ = train.user_degrees();
  adj.item_degree_ = train.item_degrees();
  adj.isolated_users_ = static_cast<Id>(std::count(adj.user_degree_.begin(), adj.user_degree_.end(), 0));
  adj.isolated_items_ = static_cast<Id>(std::count(adj.item_degree_.begin(), adj.item_degree_.end(), 0));

  const auto lists = train.items_by_user();
  adj.user_offsets_.assign(static_cast<std::size_t>(train.num_users) + 1, 0);
  for (Id u = 0; u < train.num_users; ++u) adj.user_offsets_[u + 1] = adj.user_offsets_[u] + lists[u].size();
  adj.user_items_.reserve(train.size());
  adj.user_weights_.reserve(train.size());
  for (Id u = 0; u < train.num_users; ++u) {
    for (Id i : lists[u]) {
      adj.user_items_.push_back(i);
      adj.user_weights_.push_back(
          1.0 / std::sqrt(static_cast<double>(adj.user_degree_[u]) * adj.item_degree_[i]));
    }
  }

  adj.item_offsets_.assign(static_cast<std::size_t>(train.num_items) + 1, 0);
  for (Id i = 0; i < train.num_items; ++i) adj.item_offsets_[i + 1] = adj.item_offsets_[i] + adj.item_degree_[i];
  adj.item_users_.resize(train.size());
  adj.item_weights_.resize(train.size());
  std::vector<std::size_t> fill(adj.item_offsets_.begin(), adj.item_offsets_.end() - 1);
  // Users are visited in ascending order, so each item's user list ends up sorted.
  for (Id u = 0; u < train.num_users; ++u) {
    const auto items = adj.items_of(u);
    const auto w = adj.weights_of_user(u);
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto slot = fill[items[k]]++;
      adj.item_users_[slot] = u;
      adj.item_weights_[slot] = w[k];
    }
  }
  return adj;
}

}  // namespace ncl

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ncl/dataset.hpp"
#include "ncl/errors.hpp"
#include "ncl/rng.hpp"

using namespace ncl;

namespace {

InteractionSet parse(const std::string& text, InputFormat format = InputFormat::Tsv) {
  std::istringstream in(text);
  return parse_interactions(in, format);
}

InteractionSet from_edges(Id users, Id items, const std::vector<std::pair<Id, Id>>& edges) {
  InteractionSet set;
  set.num_users = users;
  set.num_items = items;
  for (auto [u, i] : edges) set.records.push_back({u, i, std::nullopt});
  return set;
}

// Repeatedly deletes entities below k until nothing changes, on raw pairs.
std::set<std::pair<Id, Id>> peel(std::set<std::pair<Id, Id>> edges, int k) {
  for (bool changed = true; changed;) {
    changed = false;
    std::map<Id, int> du, di;
    for (auto [u, i] : edges) ++du[u], ++di[i];
    for (auto it = edges.begin(); it != edges.end();) {
      if (du[it->first] < k || di[it->second] < k) {
        it = edges.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("parsing counts users, items and records") {
  const auto set = parse("u1 i1\nu1 i2\nu2 i1\n");
  CHECK(set.num_users == 2);
  CHECK(set.num_items == 2);
  CHECK(set.size() == 3);
  CHECK(set.ids->users[0] == "u1");
  CHECK(set.ids->items[1] == "i2");
}

TEST_CASE("duplicates collapse to one record") {
  const auto set = parse("u1 i1\nu1 i2\nu1 i1\nu2 i1\n");
  CHECK(set.size() == 3);
}

TEST_CASE("formats and timestamps") {
  const auto tsv = parse("a\tx\t100\nb\ty\t200\n");
  REQUIRE(tsv.records[1].timestamp.has_value());
  CHECK(*tsv.records[1].timestamp == 200);
  const auto csv = parse("a,x\nb,x,5\n", InputFormat::Csv);
  CHECK(csv.num_items == 1);
  const auto ml = parse("196\t242\t3\t881250949\n186\t302\t3\t891717742\n", InputFormat::MovieLens);
  CHECK(ml.size() == 2);
  CHECK(*ml.records[0].timestamp == 881250949);
  CHECK(parse_format("ml100k") == InputFormat::MovieLens);
  CHECK_THROWS_AS(parse_format("parquet"), InputError);
}

TEST_CASE("parse errors name the line and empty input is rejected") {
  try {
    parse("u1 i1\nu2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse(""), EmptyDatasetError);
  CHECK_THROWS_AS(parse("# only a comment\n\n"), EmptyDatasetError);
  CHECK_THROWS_AS(load_interactions("/nonexistent/file.tsv", InputFormat::Tsv), InputError);
}

TEST_CASE("movielens 100k raw counts") {
  const std::filesystem::path path = std::filesystem::path(NCL_DATA_DIR) / "ml-100k" / "u.data";
  if (!std::filesystem::exists(path)) {
    MESSAGE("ml-100k not present, skipping");
    return;
  }
  const auto set = load_interactions(path, InputFormat::MovieLens);
  CHECK(set.num_users == 943);
  CHECK(set.num_items == 1682);
  CHECK(set.size() == 100000);
}

TEST_CASE("k-core boundary cases") {
  const auto star = from_edges(1, 5, {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK_THROWS_AS(apply_k_core(star, 2), EmptyDatasetError);

  std::vector<std::pair<Id, Id>> complete;
  for (Id u = 0; u < 3; ++u)
    for (Id i = 0; i < 3; ++i) complete.push_back({u, i});
  const auto full = from_edges(3, 3, complete);
  const auto kept = apply_k_core(full, 3);
  CHECK(kept.size() == 9);
  CHECK(kept.num_users == 3);
  CHECK(kept.num_items == 3);
}

TEST_CASE("k-core matches an independent peeling oracle") {
  CounterRng rng(21, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::set<std::pair<Id, Id>> edges;
    while (edges.size() < 400)
      edges.insert({static_cast<Id>(rng.below(50)), static_cast<Id>(rng.below(50))});
    InteractionSet set;
    set.num_users = 50;
    set.num_items = 50;
    auto ids = std::make_shared<IdTable>();
    for (int k = 0; k < 50; ++k) ids->users.push_back("u" + std::to_string(k)), ids->items.push_back("i" + std::to_string(k));
    set.ids = ids;
    for (auto [u, i] : edges) set.records.push_back({u, i, std::nullopt});

    const auto expected = peel(edges, 5);
    const auto got = apply_k_core(set, 5);
    std::set<std::pair<std::string, std::string>> want_raw, got_raw;
    for (auto [u, i] : expected) want_raw.insert({ids->users[u], ids->items[i]});
    for (const auto& r : got.records) got_raw.insert({got.ids->users[r.user], got.ids->items[r.item]});
    CHECK(want_raw == got_raw);
    for (Id d : got.user_degrees()) CHECK(d >= 5);
    for (Id d : got.item_degrees()) CHECK(d >= 5);
  }
}

TEST_CASE("per-user split sizes and degenerate users") {
  std::vector<std::pair<Id, Id>> edges;
  for (Id i = 0; i < 10; ++i) edges.push_back({0, i});
  edges.push_back({1, 0});
  edges.push_back({1, 1});
  const auto split = split_per_user(from_edges(2, 10, edges), {}, 7);
  std::map<Id, int> tr, va, te;
  for (const auto& r : split.train.records) ++tr[r.user];
  for (const auto& r : split.valid.records) ++va[r.user];
  for (const auto& r : split.test.records) ++te[r.user];
  CHECK(tr[0] == 8);
  CHECK(va[0] == 1);
  CHECK(te[0] == 1);
  CHECK(tr[1] == 2);
  CHECK(va[1] == 0);
  CHECK(te[1] == 0);
}

TEST_CASE("split is deterministic, disjoint and covering") {
  std::vector<std::pair<Id, Id>> edges;
  CounterRng rng(22, 0);
  for (Id u = 0; u < 100; ++u) {
    std::set<Id> items;
    while (items.size() < 20) items.insert(static_cast<Id>(rng.below(300)));
    for (Id i : items) edges.push_back({u, i});
  }
  const auto set = from_edges(100, 300, edges);
  const auto a = split_per_user(set, {}, 3);
  const auto b = split_per_user(set, {}, 3);
  CHECK(a.train.records == b.train.records);
  CHECK(a.valid.records == b.valid.records);
  CHECK(a.test.records == b.test.records);
  CHECK(a.train.size() + a.valid.size() + a.test.size() == set.size());

  std::set<std::pair<Id, Id>> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const auto& r : part->records) CHECK(seen.insert({r.user, r.item}).second);
  CHECK(seen.size() == set.size());

  std::set<Id> train_users;
  for (const auto& r : a.train.records) train_users.insert(r.user);
  for (const auto& r : a.test.records) CHECK(train_users.count(r.user) == 1);

  const auto c = split_per_user(set, {}, 4);
  CHECK_FALSE(a.test.records == c.test.records);
}

TEST_CASE("split ratios are validated") {
  CHECK_THROWS_AS(parse_ratios("0.5,0.5"), InputError);
  CHECK_THROWS_AS(split_per_user(from_edges(1, 3, {{0, 0}, {0, 1}, {0, 2}}), {0.5, 0.1, 0.1}, 1), InputError);
  const auto r = parse_ratios("0.7,0.2,0.1");
  CHECK(r.valid == doctest::Approx(0.2));
}

TEST_CASE("adjacency weights") {
  // u0: {i0, i1}; u1: {i0}; u2: {i0}. So |N_u0| = 2 and |N_i0| = 3.
  const auto adj = build_adjacency(from_edges(3, 2, {{0, 0}, {0, 1}, {1, 0}, {2, 0}}));
  CHECK(adj.weight(0, 0) == doctest::Approx(1 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(adj.weight(0, 0) == doctest::Approx(0.40825).epsilon(1e-5));
  CHECK(adj.weight(1, 1) == 0.0);

  const auto single = build_adjacency(from_edges(1, 1, {{0, 0}}));
  CHECK(single.weight(0, 0) == 1.0);

  const auto isolated = build_adjacency(from_edges(3, 3, {{0, 0}}));
  CHECK(isolated.isolated_users() == 2);
  CHECK(isolated.isolated_items() == 2);
  CHECK_THROWS_AS(build_adjacency(from_edges(2, 2, {})), EmptyDatasetError);
}

TEST_CASE("adjacency matches a dense normalized oracle and is symmetric") {
  CounterRng rng(23, 0);
  std::set<std::pair<Id, Id>> edges;
  while (edges.size() < 120) edges.insert({static_cast<Id>(rng.below(20)), static_cast<Id>(rng.below(20))});
  const auto set = from_edges(20, 20, {edges.begin(), edges.end()});
  const auto adj = build_adjacency(set);

  Matrix r = Matrix::Zero(20, 20);
  for (auto [u, i] : edges) r(u, i) = 1;
  const Vector du = r.rowwise().sum(), di = r.colwise().sum().transpose();
  for (Id u = 0; u < 20; ++u)
    for (Id i = 0; i < 20; ++i) {
      const double expected = r(u, i) > 0 ? 1 / std::sqrt(du(u) * di(i)) : 0.0;
      CHECK(std::abs(adj.weight(u, i) - expected) <= 1e-12);
      if (r(u, i) > 0) CHECK(adj.weight(u, i) <= 1.0);
    }
  for (Id u = 0; u < 20; ++u) CHECK(adj.user_degrees()[u] == static_cast<Id>(du(u)));

  // <A x, y> over users equals <x, A^T y> over items for one-hot vectors.
  for (Id u = 0; u < 20; u += 3)
    for (Id i = 0; i < 20; i += 3) {
      RowMatrix x = RowMatrix::Zero(20, 1), y = RowMatrix::Zero(20, 1), ax, aty;
      x(i, 0) = 1;
      y(u, 0) = 1;
      adj.gather_to_users(x, ax);
      adj.gather_to_items(y, aty);
      CHECK(ax(u, 0) == aty(i, 0));
    }
}

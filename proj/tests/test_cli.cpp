#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ncl/checkpoint.hpp"
#include "ncl/config.hpp"
#include "ncl/errors.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace ncl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

class Workspace {
 public:
  Workspace() {
    root_ = fs::temp_directory_path() / ("ncl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }
  const fs::path& root() const { return root_; }

  Outcome ncl(const std::string& args, const std::string& env = "") const {
    const auto out = root_ / "stdout.txt", err = root_ / "stderr.txt";
    const std::string cmd = env + " '" + std::string(NCL_BINARY) + "' " + args + " > '" + out.string() + "' 2> '" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  // Block-structured interactions as "user item" lines, prepared into snap/.
  fs::path prepared() const {
    const auto set = test::block_dataset(80, 60, 2, 0.5, 0.05, 21);
    std::string text;
    for (const auto& r : set.records) text += "u" + std::to_string(r.user) + "\ti" + std::to_string(r.item) + "\n";
    spit(root_ / "raw.tsv", text);
    const auto res = ncl("prepare --input '" + (root_ / "raw.tsv").string() + "' --out '" + (root_ / "snap").string() + "'");
    REQUIRE(res.code == 0);
    return root_ / "snap";
  }

  fs::path config(const std::string& objective, int max_epochs) const {
    nlohmann::json doc{{"snapshot", (root_ / "snap").string()},
                       {"checkpoint", (root_ / "ckpt").string()},
                       {"objective", objective},
                       {"dim", 8},
                       {"batch_size", 128},
                       {"learning_rate", 0.01},
                       {"clusters_user", 4},
                       {"clusters_item", 4},
                       {"max_epochs", max_epochs},
                       {"patience", 100}};
    const auto path = root_ / (objective + ".json");
    spit(path, doc.dump(2));
    return path;
  }

 private:
  fs::path root_;
  static inline int counter_ = 0;
};

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("run config json") {
  RunConfig c;
  c.name = "x";
  c.snapshot = "snap";
  c.train.alpha = 0.25;
  c.train.ipot.beta = 3;
  c.train.membership_mode = MembershipMode::Hard;
  const auto back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back).dump() == to_json(c).dump());

  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"alhpa", 0.1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"ipot", {{"bta", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"dim", "wide"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"objective", "sgl"}}), ConfigError);
  const auto partial = run_config_from_json(nlohmann::json{{"dim", 16}});
  CHECK(partial.train.dim == 16);
  CHECK(partial.train.alpha == TrainConfig{}.alpha);
}

TEST_CASE("overrides and seeds") {
  RunConfig c;
  apply_override(c, "alpha=0.1");
  apply_override(c, "ipot.iterations=7");
  apply_override(c, "objective=bpr");
  apply_override(c, "eval_cutoffs=[5,10]");
  CHECK(c.train.alpha == 0.1);
  CHECK(c.train.ipot.iterations == 7);
  CHECK(c.train.objective == Objective::Bpr);
  CHECK(c.train.eval_cutoffs == std::vector<int>{5, 10});
  CHECK_THROWS_AS(apply_override(c, "alpah=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "alpha"), ConfigError);

  RunConfig a, b;
  apply_global_seed(a, 5);
  apply_global_seed(b, 6);
  CHECK(a.train.init_seed != b.train.init_seed);
  CHECK(a.train.init_seed != a.train.batch_seed);
}

TEST_CASE("matrix and membership files round-trip") {
  Workspace ws;
  CounterRng rng(3, 0);
  const RowMatrix m = test::random_rows(7, 5, rng);
  write_matrix(ws.root() / "m.bin", m);
  CHECK(read_matrix(ws.root() / "m.bin") == m);
  spit(ws.root() / "bad.bin", "garbage");
  CHECK_THROWS_AS(read_matrix(ws.root() / "bad.bin"), InputError);

  Matrix pi(4, 3);
  pi << 0.2, 0.3, 0.5, 1, 0, 0, 0.1, 0.1, 0.8, 0, 0.6, 0.4;
  const auto set = MembershipSet::from_dense(pi, MembershipMode::Soft);
  write_memberships(ws.root() / "pi.txt", set);
  const auto back = read_memberships(ws.root() / "pi.txt");
  CHECK(back.mode == MembershipMode::Soft);
  CHECK(back.dense() == set.dense());
}

TEST_CASE("prepare writes a reproducible snapshot") {
  Workspace ws;
  const auto snap = ws.prepared();
  const auto manifest = nlohmann::json::parse(slurp(snap / "split.json"));
  const auto split = read_snapshot(snap);
  CHECK(manifest["num_users"] == split.train.num_users);
  CHECK(manifest["interactions"]["total"] ==
        split.train.size() + split.valid.size() + split.test.size());
  CHECK(manifest["seed"] == 1);

  const auto res = ws.ncl("prepare --input '" + (ws.root() / "raw.tsv").string() + "' --out '" +
                          (ws.root() / "again").string() + "'");
  REQUIRE(res.code == 0);
  for (const char* f : {"train.txt", "valid.txt", "test.txt", "interactions.txt", "users.txt", "items.txt"})
    CHECK(slurp(snap / f) == slurp(ws.root() / "again" / f));

  const auto missing = ws.ncl("prepare --input /nonexistent/ratings.tsv --out x");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/ratings.tsv") != std::string::npos);
  CHECK(ws.ncl("prepare --out x").code == 2);
  CHECK(ws.ncl("frobnicate").code == 2);
}

TEST_CASE("train, resume and evaluate") {
  Workspace ws;
  ws.prepared();
  const auto cfg = ws.config("ncl", 4);
  const std::string ckpt = (ws.root() / "ckpt").string();

  auto res = ws.ncl("train --quiet --config '" + cfg.string() + "' --max-epochs 1");
  REQUIRE(res.code == 0);
  CHECK(count_lines(slurp(ws.root() / "ckpt" / "history.csv")) == 2);
  CHECK(nlohmann::json::parse(res.out)["epochs"] == 1);

  CHECK(ws.ncl("train --quiet --config '" + cfg.string() + "'").code == 2);
  res = ws.ncl("train --quiet --resume --checkpoint '" + ckpt + "' --max-epochs 4");
  REQUIRE(res.code == 0);
  const auto resumed = slurp(ws.root() / "ckpt" / "history.csv");
  std::stringstream lines(resumed);
  std::string line;
  std::getline(lines, line);
  for (int e = 1; std::getline(lines, line); ++e) CHECK(line.substr(0, line.find(',')) == std::to_string(e));
  CHECK(count_lines(resumed) == 5);

  // an uninterrupted four-epoch run writes the same history
  const auto straight = ws.root() / "straight";
  REQUIRE(ws.ncl("train --quiet --config '" + cfg.string() + "' --checkpoint '" + straight.string() + "'").code == 0);
  CHECK(slurp(straight / "history.csv") == resumed);

  res = ws.ncl("evaluate --checkpoint '" + ckpt + "' --cutoffs 5,10,20 --degree-buckets 0,10,20");
  REQUIRE(res.code == 0);
  const auto doc = nlohmann::json::parse(res.out);
  CHECK(doc["5"]["recall"].get<double>() <= doc["10"]["recall"].get<double>());
  CHECK(doc["10"]["recall"].get<double>() <= doc["20"]["recall"].get<double>());
  CHECK(doc["buckets"].size() == 3);
  CHECK(ws.ncl("evaluate --checkpoint '" + ckpt + "' --cutoffs 5,10,20 --degree-buckets 0,10,20").out == res.out);

  const auto csv = ws.ncl("evaluate --checkpoint '" + ckpt + "' --on valid --format csv");
  REQUIRE(csv.code == 0);
  CHECK(count_lines(csv.out) == 4);
  CHECK(ws.ncl("evaluate --checkpoint '" + (ws.root() / "nope").string() + "'").code == 2);
}

TEST_CASE("seed environment changes the run") {
  Workspace ws;
  ws.prepared();
  const auto cfg = ws.config("bpr", 2);
  const auto a = ws.root() / "a", b = ws.root() / "b", c = ws.root() / "c";
  REQUIRE(ws.ncl("train --quiet --config '" + cfg.string() + "' --checkpoint '" + a.string() + "'", "NCL_SEED=5").code == 0);
  REQUIRE(ws.ncl("train --quiet --config '" + cfg.string() + "' --checkpoint '" + b.string() + "'", "NCL_SEED=5").code == 0);
  REQUIRE(ws.ncl("train --quiet --config '" + cfg.string() + "' --checkpoint '" + c.string() + "'", "NCL_SEED=6").code == 0);
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(slurp(a / "history.csv") != slurp(c / "history.csv"));
  CHECK(ws.ncl("train --quiet --config '" + cfg.string() + "'", "NCL_SEED=abc").code == 2);
  CHECK(ws.ncl("train --quiet --config '" + cfg.string() + "' --set alhpa=1").code == 2);
}

TEST_CASE("spectrum reports") {
  Workspace ws;
  CounterRng rng(9, 0);
  const auto ckpt = ws.root() / "ckpt";
  fs::create_directories(ckpt / "best");
  write_matrix(ckpt / "best" / "user_final.bin", test::random_rows(3000, 64, rng));
  // rows confined to a 3-dimensional subspace
  const RowMatrix basis = test::random_rows(3, 64, rng);
  write_matrix(ckpt / "best" / "item_final.bin", test::random_rows(500, 3, rng) * basis);

  const auto user = ws.ncl("spectrum --checkpoint '" + ckpt.string() + "' --side user");
  REQUIRE(user.code == 0);
  CHECK(nlohmann::json::parse(user.out)["effective_rank"].get<double>() > 60);
  CHECK(count_lines(slurp(ckpt / "spectrum_user.csv")) >= 64);
  CHECK(ws.ncl("spectrum --checkpoint '" + ckpt.string() + "' --side user").out == user.out);

  const auto item = ws.ncl("spectrum --checkpoint '" + ckpt.string() + "' --side item --out '" +
                           (ws.root() / "rep").string() + "'");
  REQUIRE(item.code == 0);
  const auto doc = nlohmann::json::parse(item.out);
  CHECK(fs::exists(ws.root() / "rep" / "spectrum_item.json"));
  const auto counts = doc["below_threshold"];
  REQUIRE(counts.size() == 3);
  for (const auto& c : counts) CHECK(c["below"].get<int>() == 61);
  CHECK(ws.ncl("spectrum --checkpoint '" + ckpt.string() + "' --side both").code == 2);
}

TEST_CASE("sweep runs every grid point") {
  Workspace ws;
  ws.prepared();
  const auto cfg = ws.config("bpr", 1);
  const auto res = ws.ncl("sweep --quiet --config '" + cfg.string() + "' --grid learning_rate=0.01,0.001 --grid dim=4,8 --out '" +
                          (ws.root() / "sw").string() + "'");
  REQUIRE(res.code == 0);
  const auto table = slurp(ws.root() / "sw" / "sweep.csv");
  CHECK(count_lines(table) == 5);
  CHECK(fs::exists(ws.root() / "sw" / "run-3" / "history.csv"));
}

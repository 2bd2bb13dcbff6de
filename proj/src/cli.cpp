#include "ncl/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ncl/checkpoint.hpp"
#include "ncl/config.hpp"
#include "ncl/diagnostics.hpp"
#include "ncl/errors.hpp"
#include "ncl/evaluator.hpp"

namespace ncl::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// NDCG at the selection cutoff (10, lower only for catalogues under 10 items).
double selection_ndcg(const RankingMetrics& m) {
  int cut = m.cutoffs.front();
  for (int c : m.cutoffs)
    if (c <= 10) cut = c;
  return m.ndcg_at(cut);
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  for (std::string cell; std::getline(in, cell, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw InputError(std::string("bad ") + what + " entry '" + cell + "'");
    }
  }
  if (out.empty()) throw InputError(std::string(what) + " list is empty");
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv(kSeedEnv);
  if (!text || !*text) return std::nullopt;
  char* end = nullptr;
  const auto v = std::strtoull(text, &end, 10);
  if (*end != '\0') throw ConfigError(std::string(kSeedEnv) + " must be an unsigned integer");
  return v;
}

// -------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string input;
  std::string format = "tsv";
  int k_core = 5;
  std::string split = "0.8,0.1,0.1";
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a) {
  const auto format = parse_format(a.format);
  const auto ratios = parse_ratios(a.split);
  auto set = load_interactions(a.input, format);
  if (a.k_core > 1) set = apply_k_core(set, a.k_core);
  const auto split = split_per_user(set, ratios, a.seed);
  SnapshotInfo info{a.input, a.format, a.k_core, ratios, a.seed};
  write_snapshot(a.out, split, info);
  std::cout << snapshot_manifest(split, info);
  return kOk;
}

// -------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string checkpoint;
  std::vector<std::string> overrides;
  int max_epochs = 0;
  bool resume = false;
  bool force = false;
  bool quiet = false;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg;
  if (a.resume && a.config.empty()) {
    if (a.checkpoint.empty()) throw InputError("--resume needs --checkpoint or --config");
    cfg = read_checkpoint_config(a.checkpoint);
  } else {
    if (a.config.empty()) throw InputError("--config is required");
    cfg = load_run_config(a.config);
    if (const auto seed = env_seed()) apply_global_seed(cfg, *seed);
  }
  for (const auto& o : a.overrides) apply_override(cfg, o);
  if (!a.checkpoint.empty()) cfg.checkpoint = a.checkpoint;
  if (a.max_epochs > 0) cfg.train.max_epochs = a.max_epochs;
  if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint directory configured");
  if (cfg.snapshot.empty()) throw ConfigError("no snapshot directory configured");
  cfg.train.validate();
  return cfg;
}

// Runs one configured training job; returns the finished trainer's result.
TrainResult run_training(const RunConfig& cfg, bool resume, bool force, bool quiet) {
  const auto split = read_snapshot(cfg.snapshot);
  std::optional<Trainer> trainer;
  if (resume) {
    if (!has_checkpoint(cfg.checkpoint)) throw InputError("no checkpoint to resume in " + cfg.checkpoint.string());
    trainer.emplace(cfg.train, split, load_trainer_state(cfg.checkpoint, cfg.train));
  } else {
    if (has_checkpoint(cfg.checkpoint) && !force)
      throw InputError("checkpoint already exists in " + cfg.checkpoint.string() + " (use --resume or --force)");
    if (force && fs::exists(cfg.checkpoint)) {
      fs::remove_all(cfg.checkpoint / "latest");
      fs::remove_all(cfg.checkpoint / "best");
      fs::remove(cfg.checkpoint / "state.json");
    }
    trainer.emplace(cfg.train, split);
    if (!quiet)
      std::cerr << "epoch 0 valid ndcg@10 " << selection_ndcg(trainer->initial_valid()) << "\n";
    save_checkpoint(cfg.checkpoint, cfg, *trainer);
  }
  while (!trainer->done()) {
    const auto& r = trainer->run_epoch();
    save_checkpoint(cfg.checkpoint, cfg, *trainer);
    if (!quiet)
      std::cerr << "epoch " << r.epoch << " loss " << r.loss << " valid ndcg@10 " << selection_ndcg(r.valid) << " ("
                << r.seconds << " s)\n";
  }
  return trainer->result();
}

int cmd_train(const TrainArgs& a) {
  const auto cfg = resolve_config(a);
  const auto result = run_training(cfg, a.resume, a.force, a.quiet);
  nlohmann::ordered_json summary;
  summary["checkpoint"] = cfg.checkpoint.string();
  summary["epochs"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  if (result.best_epoch > 0)
    summary["best_valid_ndcg@10"] = selection_ndcg(result.history[static_cast<std::size_t>(result.best_epoch - 1)].valid);
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

// -------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string checkpoint;
  std::string snapshot;
  std::string cutoffs = "10,20,50";
  std::string buckets;
  std::string on = "test";
  std::string format = "json";
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  if (!fs::is_directory(a.checkpoint)) throw InputError("checkpoint directory not found: " + a.checkpoint);
  fs::path snapshot = a.snapshot;
  if (snapshot.empty()) snapshot = read_checkpoint_config(a.checkpoint).snapshot;
  const auto split = read_snapshot(snapshot);
  const auto emb = load_final_embeddings(a.checkpoint);
  if (emb.user.rows() != split.train.num_users || emb.item.rows() != split.train.num_items)
    throw InputError("checkpoint " + a.checkpoint + " does not match snapshot " + snapshot.string());

  const auto train_items = split.train.items_by_user();
  const auto valid_items = split.valid.items_by_user();
  const auto test_items = split.test.items_by_user();
  RankRequest req;
  req.users = &emb.user;
  req.items = &emb.item;
  req.cutoffs = parse_int_list(a.cutoffs, "cutoff");
  if (a.on == "test") {
    req.ground_truth = &test_items;
    req.masks = {&train_items, &valid_items};
  } else if (a.on == "valid") {
    req.ground_truth = &valid_items;
    req.masks = {&train_items};
  } else {
    throw InputError("--on must be test or valid");
  }
  const auto metrics = rank_and_score(req);
  std::optional<std::vector<BucketMetrics>> buckets;
  if (!a.buckets.empty()) {
    const auto ints = parse_int_list(a.buckets, "bucket edge");
    const std::vector<double> edges(ints.begin(), ints.end());
    buckets = degree_bucket_eval(req, split.train.item_degrees(), edges);
  }
  const std::string text = a.format == "csv" ? metrics_csv(metrics) : metrics_json(metrics, buckets ? &*buckets : nullptr);
  if (a.format != "csv" && a.format != "json") throw InputError("--format must be json or csv");
  if (a.out.empty()) std::cout << text;
  else write_file(a.out, text);
  return kOk;
}

// -------------------------------------------------------------------------
// spectrum

struct SpectrumArgs {
  std::string checkpoint;
  std::string side = "user";
  std::string out;
};

int cmd_spectrum(const SpectrumArgs& a) {
  if (a.side != "user" && a.side != "item") throw InputError("--side must be user or item");
  const auto emb = load_final_embeddings(a.checkpoint);
  const auto rows = normalize_rows(a.side == "user" ? emb.user : emb.item).rows;
  const auto report = spectrum(covariance(rows));
  const fs::path dir = a.out.empty() ? fs::path(a.checkpoint) : fs::path(a.out);
  write_file(dir / ("spectrum_" + a.side + ".csv"), spectrum_csv(report));
  const std::string summary = spectrum_json(report);
  write_file(dir / ("spectrum_" + a.side + ".json"), summary);
  std::cout << summary;
  return kOk;
}

// -------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string config;
  std::vector<std::string> grid;
  std::vector<std::string> overrides;
  std::string out;
  int max_epochs = 0;
  bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
  RunConfig base = load_run_config(a.config);
  if (const auto seed = env_seed()) apply_global_seed(base, *seed);
  for (const auto& o : a.overrides) apply_override(base, o);
  if (a.max_epochs > 0) base.train.max_epochs = a.max_epochs;

  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& g : a.grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw InputError("--grid must look like key=v1,v2: " + g);
    std::vector<std::string> values;
    std::stringstream in(g.substr(eq + 1));
    for (std::string v; std::getline(in, v, ',');) values.push_back(v);
    if (values.empty()) throw InputError("--grid has no values: " + g);
    axes.emplace_back(g.substr(0, eq), std::move(values));
  }
  std::size_t total = 1;
  for (const auto& [key, values] : axes) total *= values.size();

  const fs::path out = a.out.empty() ? fs::path(base.name + "-sweep") : fs::path(a.out);
  fs::create_directories(out);
  // Validate every combination before launching any run.
  std::vector<RunConfig> runs;
  for (std::size_t r = 0; r < total; ++r) {
    RunConfig cfg = base;
    std::size_t rest = r;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      apply_override(cfg, it->first + "=" + it->second[rest % it->second.size()]);
      rest /= it->second.size();
    }
    cfg.name = base.name + "-" + std::to_string(r);
    cfg.checkpoint = out / cfg.name;
    cfg.train.validate();
    runs.push_back(std::move(cfg));
  }

  std::string table = "run";
  for (const auto& [key, values] : axes) table += "," + key;
  table += ",epochs,best_epoch,best_valid_ndcg@10\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto result = run_training(runs[r], false, true, a.quiet);
    table += runs[r].name;
    std::size_t rest = r;
    std::vector<std::string> cells(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      cells[k] = axes[k].second[rest % axes[k].second.size()];
      rest /= axes[k].second.size();
    }
    for (const auto& c : cells) table += "," + c;
    double best = 0;
    if (result.best_epoch > 0) best = selection_ndcg(result.history[static_cast<std::size_t>(result.best_epoch - 1)].valid);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", best);
    table += "," + std::to_string(result.history.size()) + "," + std::to_string(result.best_epoch) + "," + buf + "\n";
    write_file(out / "sweep.csv", table);
  }
  std::cout << table;
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Collaborative filtering with coding-rate compactness on LightGCN embeddings", "ncl"};
  app.require_subcommand(1);
  app.footer(std::string("Environment:\n  ") + kSeedEnv +
             "  unsigned integer; when set, replaces the init, batch and eval seeds of train and sweep runs\n"
             "Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input error");

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Filter, split and index an interaction file");
  p->add_option("--input", prep.input, "Interaction file")->required();
  p->add_option("--format", prep.format, "tsv, csv or ml100k")->capture_default_str();
  p->add_option("--k-core", prep.k_core, "Minimum interactions per user and item (<= 1 disables)")->capture_default_str();
  p->add_option("--split", prep.split, "train,valid,test ratios")->capture_default_str();
  p->add_option("--seed", prep.seed, "Split seed")->capture_default_str();
  p->add_option("--out", prep.out, "Snapshot directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a run config");
  t->add_option("--config", tr.config, "Run config (JSON)");
  t->add_option("--checkpoint", tr.checkpoint, "Checkpoint directory (overrides the config)");
  t->add_option("--set", tr.overrides, "key=value override, repeatable");
  t->add_option("--max-epochs", tr.max_epochs, "Epoch cap");
  t->add_flag("--resume", tr.resume, "Continue from the checkpoint directory");
  t->add_flag("--force", tr.force, "Replace an existing checkpoint");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Full-ranking metrics of a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--snapshot", ev.snapshot, "Snapshot directory (default: from the checkpoint config)");
  e->add_option("--cutoffs", ev.cutoffs, "Ascending cutoffs")->capture_default_str();
  e->add_option("--degree-buckets", ev.buckets, "Ascending item-degree edges, e.g. 0,100,200");
  e->add_option("--on", ev.on, "test or valid")->capture_default_str();
  e->add_option("--format", ev.format, "json or csv")->capture_default_str();
  e->add_option("--out", ev.out, "Output file (default: stdout)");

  SpectrumArgs sp;
  auto* s = app.add_subcommand("spectrum", "Covariance spectrum of the embeddings of a checkpoint");
  s->add_option("--checkpoint", sp.checkpoint, "Checkpoint directory")->required();
  s->add_option("--side", sp.side, "user or item")->capture_default_str();
  s->add_option("--out", sp.out, "Output directory (default: the checkpoint directory)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Train every combination of a parameter grid");
  w->add_option("--config", sw.config, "Base run config")->required();
  w->add_option("--grid", sw.grid, "key=v1,v2,... repeatable")->required();
  w->add_option("--set", sw.overrides, "key=value override, repeatable");
  w->add_option("--out", sw.out, "Output directory");
  w->add_option("--max-epochs", sw.max_epochs, "Epoch cap");
  w->add_flag("--quiet", sw.quiet, "No per-epoch progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*p) return cmd_prepare(prep);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*s) return cmd_spectrum(sp);
    if (*w) return cmd_sweep(sw);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace ncl::cli

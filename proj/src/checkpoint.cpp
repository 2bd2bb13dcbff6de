#include "ncl/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ncl/errors.hpp"

namespace ncl {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'N', 'C', 'L', 'M', 'A', 'T', '1', '\0'};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

// Writes through a temporary so a crash never leaves a half-written file.
void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    auto out = open_out(tmp, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

InteractionSet read_pairs(const fs::path& path, Id num_users, Id num_items, std::shared_ptr<const IdTable> ids) {
  InteractionSet set;
  set.num_users = num_users;
  set.num_items = num_items;
  set.ids = std::move(ids);
  auto in = open_in(path);
  long line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long u = -1, i = -1;
    if (!(fields >> u >> i) || u < 0 || i < 0 || u >= num_users || i >= num_items)
      throw ParseError(line_no, path.string() + ": bad record '" + line + "'");
    set.records.push_back({static_cast<Id>(u), static_cast<Id>(i), std::nullopt});
  }
  return set;
}

std::string pairs_text(const InteractionSet& set) {
  std::string out;
  for (const auto& r : set.records) out += std::to_string(r.user) + '\t' + std::to_string(r.item) + '\n';
  return out;
}

std::string lines_text(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

void save_head(const fs::path& dir, const std::string& side, const ClassifierHead& head) {
  write_matrix(dir / ("head_" + side + "_w1.bin"), head.w1);
  write_matrix(dir / ("head_" + side + "_b1.bin"), head.b1.transpose());
  write_matrix(dir / ("head_" + side + "_w2.bin"), head.w2);
  write_matrix(dir / ("head_" + side + "_b2.bin"), head.b2.transpose());
}

ClassifierHead load_head(const fs::path& dir, const std::string& side) {
  ClassifierHead head;
  head.w1 = read_matrix(dir / ("head_" + side + "_w1.bin"));
  head.b1 = read_matrix(dir / ("head_" + side + "_b1.bin")).transpose();
  head.w2 = read_matrix(dir / ("head_" + side + "_w2.bin"));
  head.b2 = read_matrix(dir / ("head_" + side + "_b2.bin")).transpose();
  return head;
}

std::vector<double> split_doubles(const std::string& line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const auto comma = line.find(',', start);
    const std::string cell = line.substr(start, comma - start);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw InputError("bad history cell '" + cell + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string snapshot_manifest(const SplitDataset& split, const SnapshotInfo& info) {
  ordered_json doc;
  doc["source"] = info.source;
  doc["format"] = info.format;
  doc["k_core"] = info.k_core;
  doc["split"] = {info.ratios.train, info.ratios.valid, info.ratios.test};
  doc["seed"] = info.seed;
  doc["num_users"] = split.train.num_users;
  doc["num_items"] = split.train.num_items;
  doc["interactions"] = {{"train", split.train.size()},
                         {"valid", split.valid.size()},
                         {"test", split.test.size()},
                         {"total", split.train.size() + split.valid.size() + split.test.size()}};
  return doc.dump(2) + "\n";
}

void write_snapshot(const fs::path& dir, const SplitDataset& split, const SnapshotInfo& info) {
  fs::create_directories(dir);
  write_text(dir / "train.txt", pairs_text(split.train));
  write_text(dir / "valid.txt", pairs_text(split.valid));
  write_text(dir / "test.txt", pairs_text(split.test));
  InteractionSet all = split.train;
  all.records.insert(all.records.end(), split.valid.records.begin(), split.valid.records.end());
  all.records.insert(all.records.end(), split.test.records.begin(), split.test.records.end());
  std::sort(all.records.begin(), all.records.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  write_text(dir / "interactions.txt", pairs_text(all));
  if (split.train.ids) {
    write_text(dir / "users.txt", lines_text(split.train.ids->users));
    write_text(dir / "items.txt", lines_text(split.train.ids->items));
  }
  write_text(dir / "split.json", snapshot_manifest(split, info));
}

SplitDataset read_snapshot(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("snapshot directory not found: " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "split.json"));
  } catch (const json::exception& e) {
    throw InputError((dir / "split.json").string() + ": " + e.what());
  }
  const Id num_users = manifest.at("num_users").get<Id>();
  const Id num_items = manifest.at("num_items").get<Id>();
  auto ids = std::make_shared<IdTable>();
  if (fs::exists(dir / "users.txt")) {
    ids->users = read_lines(dir / "users.txt");
    ids->items = read_lines(dir / "items.txt");
    if (ids->users.size() != static_cast<std::size_t>(num_users) ||
        ids->items.size() != static_cast<std::size_t>(num_items))
      throw InputError("id tables in " + dir.string() + " disagree with split.json");
  }
  SplitDataset split;
  split.split_seed = manifest.at("seed").get<std::uint64_t>();
  split.train = read_pairs(dir / "train.txt", num_users, num_items, ids);
  split.valid = read_pairs(dir / "valid.txt", num_users, num_items, ids);
  split.test = read_pairs(dir / "test.txt", num_users, num_items, ids);
  if (split.train.empty()) throw EmptyDatasetError("snapshot " + dir.string() + " has no training interactions");
  return split;
}

void write_matrix(const fs::path& path, const RowMatrix& m) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    auto out = open_out(tmp, std::ios::binary);
    const std::int64_t rows = m.rows(), cols = m.cols();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

RowMatrix read_matrix(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8];
  std::int64_t rows = 0, cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || rows < 0 || cols < 0)
    throw InputError(path.string() + " is not a matrix file");
  RowMatrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw InputError(path.string() + " is truncated");
  return m;
}

void write_memberships(const fs::path& path, const MembershipSet& set) {
  std::string out = std::string(to_string(set.mode)) + ' ' + std::to_string(set.num_entities) + ' ' +
                    std::to_string(set.num_clusters()) + '\n';
  for (std::size_t k = 0; k < set.clusters.size(); ++k) {
    const auto& c = set.clusters[k];
    for (std::size_t j = 0; j < c.size(); ++j)
      out += std::to_string(c.members[j]) + ' ' + std::to_string(k) + ' ' + fmt(c.weights[j]) + '\n';
  }
  write_text(path, out);
}

MembershipSet read_memberships(const fs::path& path) {
  auto in = open_in(path);
  std::string mode;
  long n = 0, k = 0;
  if (!(in >> mode >> n >> k) || n < 0 || k < 0) throw InputError(path.string() + ": bad header");
  MembershipSet set;
  set.num_entities = n;
  if (mode == "hard") set.mode = MembershipMode::Hard;
  else if (mode == "soft") set.mode = MembershipMode::Soft;
  else if (mode == "indicator") set.mode = MembershipMode::Indicator;
  else throw InputError(path.string() + ": unknown mode " + mode);
  set.clusters.resize(static_cast<std::size_t>(k));
  std::string weight;
  long entity = 0, cluster = 0;
  while (in >> entity >> cluster >> weight) {
    if (entity < 0 || entity >= n || cluster < 0 || cluster >= k) throw InputError(path.string() + ": bad entry");
    auto& c = set.clusters[static_cast<std::size_t>(cluster)];
    c.members.push_back(entity);
    c.weights.push_back(std::strtod(weight.c_str(), nullptr));
  }
  return set;
}

std::string history_header(const std::vector<int>& cutoffs) {
  std::string out = "epoch,loss";
  for (int c : cutoffs) out += ",recall@" + std::to_string(c);
  for (int c : cutoffs) out += ",ndcg@" + std::to_string(c);
  return out;
}

std::string history_row(const EpochReport& r) {
  std::string out = std::to_string(r.epoch) + ',' + fmt(r.loss);
  for (double v : r.valid.recall) out += ',' + fmt(v);
  for (double v : r.valid.ndcg) out += ',' + fmt(v);
  return out;
}

std::vector<EpochReport> read_history(const fs::path& history, const fs::path& timing) {
  const auto lines = read_lines(history);
  if (lines.empty()) throw InputError(history.string() + " has no header");
  std::vector<int> cutoffs;
  {
    std::size_t pos = 0;
    while ((pos = lines[0].find("recall@", pos)) != std::string::npos) {
      pos += 7;
      cutoffs.push_back(std::stoi(lines[0].substr(pos)));
    }
  }
  if (lines[0] != history_header(cutoffs)) throw InputError(history.string() + ": unexpected header");
  std::vector<EpochReport> out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    const auto cells = split_doubles(lines[l]);
    if (cells.size() != 2 + 2 * cutoffs.size()) throw InputError(history.string() + ": bad row " + std::to_string(l));
    EpochReport r;
    r.epoch = static_cast<int>(cells[0]);
    r.loss = cells[1];
    r.valid.cutoffs = cutoffs;
    r.valid.recall.assign(cells.begin() + 2, cells.begin() + 2 + static_cast<long>(cutoffs.size()));
    r.valid.ndcg.assign(cells.begin() + 2 + static_cast<long>(cutoffs.size()), cells.end());
    out.push_back(std::move(r));
  }
  if (fs::exists(timing)) {
    const auto rows = read_lines(timing);
    for (std::size_t l = 1; l < rows.size() && l - 1 < out.size(); ++l) {
      const auto cells = split_doubles(rows[l]);
      if (cells.size() == 2) out[l - 1].seconds = cells[1];
    }
  }
  return out;
}

void save_checkpoint(const fs::path& dir, const RunConfig& config, const Trainer& trainer) {
  const auto& s = trainer.state();
  const fs::path latest = dir / "latest";
  const fs::path best = dir / "best";
  fs::create_directories(latest);
  fs::create_directories(best);

  write_text(dir / "config.json", to_json(config).dump(2) + "\n");

  write_matrix(latest / "user.bin", s.table.user);
  write_matrix(latest / "item.bin", s.table.item);
  if (s.optimizer.first.size() == 2) {
    write_matrix(latest / "adam_m_user.bin", s.optimizer.first[0]);
    write_matrix(latest / "adam_m_item.bin", s.optimizer.first[1]);
    write_matrix(latest / "adam_v_user.bin", s.optimizer.second[0]);
    write_matrix(latest / "adam_v_item.bin", s.optimizer.second[1]);
  }
  if (s.head_user) save_head(latest, "user", *s.head_user);
  if (s.head_item) save_head(latest, "item", *s.head_item);
  if (s.members_user) write_memberships(latest / "members_user.txt", *s.members_user);
  if (s.members_item) write_memberships(latest / "members_item.txt", *s.members_item);

  if (s.best_epoch == s.epoch || !fs::exists(best / "user_final.bin")) {
    write_matrix(best / "user.bin", s.best_table.user);
    write_matrix(best / "item.bin", s.best_table.item);
    const auto cache = trainer.forward(s.best_table);
    write_matrix(best / "user_final.bin", cache.user_output());
    write_matrix(best / "item_final.bin", cache.item_output());
  }

  std::vector<int> cutoffs = s.history.empty() ? trainer.initial_valid().cutoffs : s.history.front().valid.cutoffs;
  std::string history = history_header(cutoffs) + "\n";
  std::string timing = "epoch,seconds\n";
  for (const auto& r : s.history) {
    history += history_row(r) + "\n";
    timing += std::to_string(r.epoch) + ',' + fmt(r.seconds) + "\n";
  }
  write_text(dir / "history.csv", history);
  write_text(dir / "timing.csv", timing);

  ordered_json state;
  state["epoch"] = s.epoch;
  state["best_epoch"] = s.best_epoch;
  state["best_ndcg"] = s.best_ndcg;
  state["bad_epochs"] = s.bad_epochs;
  state["stopped"] = s.stopped;
  state["adam_step"] = s.optimizer.step;
  state["members"] = s.members_user.has_value();
  write_text(dir / "state.json", state.dump(2) + "\n");
}

bool has_checkpoint(const fs::path& dir) { return fs::exists(dir / "state.json"); }

RunConfig read_checkpoint_config(const fs::path& dir) { return load_run_config(dir / "config.json"); }

TrainerState load_trainer_state(const fs::path& dir, const TrainConfig& config) {
  json doc;
  try {
    doc = json::parse(read_text(dir / "state.json"));
  } catch (const json::exception& e) {
    throw InputError((dir / "state.json").string() + ": " + e.what());
  }
  const fs::path latest = dir / "latest";
  TrainerState s;
  s.epoch = doc.at("epoch").get<int>();
  s.best_epoch = doc.at("best_epoch").get<int>();
  s.best_ndcg = doc.at("best_ndcg").get<double>();
  s.bad_epochs = doc.at("bad_epochs").get<int>();
  s.stopped = doc.at("stopped").get<bool>();
  s.optimizer.step = doc.at("adam_step").get<std::int64_t>();
  s.table.user = read_matrix(latest / "user.bin");
  s.table.item = read_matrix(latest / "item.bin");
  if (s.optimizer.step > 0) {
    s.optimizer.first = {read_matrix(latest / "adam_m_user.bin"), read_matrix(latest / "adam_m_item.bin")};
    s.optimizer.second = {read_matrix(latest / "adam_v_user.bin"), read_matrix(latest / "adam_v_item.bin")};
  }
  if (config.objective == Objective::Ncl) {
    s.head_user = load_head(latest, "user");
    s.head_item = load_head(latest, "item");
    if (doc.at("members").get<bool>()) {
      s.members_user = read_memberships(latest / "members_user.txt");
      s.members_item = read_memberships(latest / "members_item.txt");
    }
  }
  s.best_table.user = read_matrix(dir / "best" / "user.bin");
  s.best_table.item = read_matrix(dir / "best" / "item.bin");
  s.history = read_history(dir / "history.csv", dir / "timing.csv");
  if (static_cast<int>(s.history.size()) != s.epoch)
    throw InputError(dir.string() + ": history has " + std::to_string(s.history.size()) + " rows but state says " +
                     std::to_string(s.epoch) + " epochs");
  return s;
}

FinalEmbeddings load_final_embeddings(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("checkpoint directory not found: " + dir.string());
  return {read_matrix(dir / "best" / "user_final.bin"), read_matrix(dir / "best" / "item_final.bin")};
}

}  // namespace ncl

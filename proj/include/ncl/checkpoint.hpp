#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ncl/config.hpp"
#include "ncl/dataset.hpp"
#include "ncl/membership.hpp"
#include "ncl/trainer.hpp"

namespace ncl {

// Prepared dataset directory:
//   train.txt valid.txt test.txt   "user<TAB>item" with contiguous ids
//   interactions.txt               all three parts, sorted
//   users.txt items.txt            raw id per line, line k holds id k
//   split.json                     counts, seed, source and filtering settings
struct SnapshotInfo {
  std::string source;
  std::string format;
  int k_core = 0;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

void write_snapshot(const std::filesystem::path& dir, const SplitDataset& split, const SnapshotInfo& info);
// Throws InputError when files are missing or inconsistent.
SplitDataset read_snapshot(const std::filesystem::path& dir);
std::string snapshot_manifest(const SplitDataset& split, const SnapshotInfo& info);

// Dense matrix file: "NCLMAT1\0", int64 rows, int64 cols, row-major doubles
// in native byte order.
void write_matrix(const std::filesystem::path& path, const RowMatrix& m);
RowMatrix read_matrix(const std::filesystem::path& path);

// Text lines "entity cluster weight" after a header "mode entities clusters".
void write_memberships(const std::filesystem::path& path, const MembershipSet& set);
MembershipSet read_memberships(const std::filesystem::path& path);

// History columns: epoch, loss, recall@c..., ndcg@c... Wall-clock seconds
// live in a separate timing file so the history is reproducible byte for byte.
std::string history_header(const std::vector<int>& cutoffs);
std::string history_row(const EpochReport& report);
std::vector<EpochReport> read_history(const std::filesystem::path& history, const std::filesystem::path& timing);

// Checkpoint directory:
//   config.json history.csv timing.csv state.json
//   latest/   user.bin item.bin adam_{m,v}_{user,item}.bin
//             head_{user,item}_{w1,b1,w2,b2}.bin members_{user,item}.txt
//   best/     user.bin item.bin (base tables) user_final.bin item_final.bin (encoder outputs)
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config, const Trainer& trainer);
bool has_checkpoint(const std::filesystem::path& dir);
RunConfig read_checkpoint_config(const std::filesystem::path& dir);
TrainerState load_trainer_state(const std::filesystem::path& dir, const TrainConfig& config);

struct FinalEmbeddings {
  RowMatrix user;
  RowMatrix item;
};
FinalEmbeddings load_final_embeddings(const std::filesystem::path& dir);

}  // namespace ncl

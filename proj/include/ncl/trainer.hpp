#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncl/clustering.hpp"
#include "ncl/dataset.hpp"
#include "ncl/encoder.hpp"
#include "ncl/evaluator.hpp"
#include "ncl/membership.hpp"
#include "ncl/types.hpp"

namespace ncl {

enum class Objective { Bpr, InfoNce, DirectAu, Nclg, Ncl };

const char* to_string(Objective objective);
Objective parse_objective(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::Ncl;
  int dim = 64;
  int layers = 2;
  // Pooling weights per layer; empty means uniform.
  std::vector<double> layer_weights;
  bool normalize = true;
  int batch_size = 2048;
  double learning_rate = 1e-3;
  double init_scale = 0.1;

  double alpha = 0.5;
  double epsilon_sq = 0.05;
  double tau = 0.2;
  double lambda = 1.0;

  // ncl: self-labelled clusters
  int clusters_user = 300;
  int clusters_item = 300;
  MembershipMode membership_mode = MembershipMode::Soft;
  double membership_prune = 1e-6;
  // 0 selects 2 * dim.
  int classifier_hidden = 0;
  int classifier_steps = 10;
  double classifier_lr = 1.0;
  IpotOptions ipot;

  // nclg: co-occurrence clusters
  Threshold cooccurrence;
  int membership_sample = 50;

  int max_epochs = 300;
  int patience = 10;
  std::uint64_t init_seed = 1;
  std::uint64_t batch_seed = 2;
  std::vector<int> eval_cutoffs{10, 20, 50};
  int valid_user_cap = 5000;
  std::uint64_t eval_seed = 3;

  // Throws ConfigError.
  void validate() const;
};

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<RowMatrix> first;
  std::vector<RowMatrix> second;
};

struct ParamGrad {
  RowMatrix* param;
  const RowMatrix* grad;
};

// Bias-corrected Adam update; moments are allocated on the first call.
void adam_step(std::span<const ParamGrad> params, OptimizerState& state, double learning_rate);

struct TrainPair {
  Id user;
  Id item;
};

struct Batch {
  std::vector<TrainPair> pairs;
  // One uniformly drawn unobserved item per pair, when requested.
  std::vector<Id> negatives;
};

// Shuffled partition of `pairs` into batches (last one may be short). With
// `positives` set, also draws negatives avoiding each user's positives.
std::vector<Batch> minibatch_iter(std::span<const TrainPair> pairs, int batch_size, int epoch, std::uint64_t seed,
                                  const ItemLists* positives = nullptr, Id num_items = 0);

struct MembershipStats {
  std::size_t user_clusters = 0;
  std::size_t item_clusters = 0;
  double user_cross_entropy = 0.0;
  double item_cross_entropy = 0.0;
  bool transport_converged = true;
};

struct EpochReport {
  int epoch = 0;
  double loss = 0.0;
  RankingMetrics valid;
  double seconds = 0.0;
  MembershipStats refresh;
};

struct TrainerState {
  // Completed epochs.
  int epoch = 0;
  EmbeddingTable table;
  OptimizerState optimizer;
  std::optional<ClassifierHead> head_user;
  std::optional<ClassifierHead> head_item;
  // Memberships used by the next epoch (ncl only; nclg re-derives them).
  std::optional<MembershipSet> members_user;
  std::optional<MembershipSet> members_item;
  std::vector<EpochReport> history;
  int best_epoch = 0;
  double best_ndcg = -1.0;
  int bad_epochs = 0;
  bool stopped = false;
  EmbeddingTable best_table;
};

struct TrainResult {
  EmbeddingTable best_table;
  // Encoder outputs of the best table.
  RowMatrix best_user;
  RowMatrix best_item;
  std::vector<EpochReport> history;
  int best_epoch = 0;
  RankingMetrics initial_valid;
};

class Trainer {
 public:
  Trainer(TrainConfig config, const SplitDataset& split);
  // Continue from a saved state.
  Trainer(TrainConfig config, const SplitDataset& split, TrainerState state);

  const TrainConfig& config() const { return config_; }
  const TrainerState& state() const { return state_; }
  TrainerState& mutable_state() { return state_; }
  const NormalizedAdjacency& adjacency() const { return adj_; }
  const RankingMetrics& initial_valid() const { return initial_valid_; }

  bool done() const;
  // NDCG cutoff for model selection: 10, or the catalogue size when smaller.
  int selection_cutoff() const;
  // Trains one epoch, refreshes memberships, evaluates and updates early stopping.
  const EpochReport& run_epoch();
  // Encoder outputs for a table.
  ForwardCache forward(const EmbeddingTable& table) const;
  RankingMetrics evaluate_valid(const EmbeddingTable& table) const;
  TrainResult result() const;

 private:
  double train_batch(const Batch& batch, int epoch, long index);
  MembershipStats refresh_memberships(int next_epoch);
  void sample_cooccurrence(int next_epoch);

  TrainConfig config_;
  const SplitDataset* split_;
  NormalizedAdjacency adj_;
  std::vector<TrainPair> pairs_;
  ItemLists train_items_;
  ItemLists valid_items_;
  std::vector<Id> valid_users_;
  std::optional<MembershipSet> indicator_user_;
  std::optional<MembershipSet> indicator_item_;
  TrainerState state_;
  RankingMetrics initial_valid_;
};

TrainResult train(const TrainConfig& config, const SplitDataset& split);

}  // namespace ncl

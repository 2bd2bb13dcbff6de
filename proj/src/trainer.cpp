#include "ncl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ncl/errors.hpp"
#include "ncl/objectives.hpp"
#include "ncl/rng.hpp"

namespace ncl {

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::Bpr: return "bpr";
    case Objective::InfoNce: return "infonce";
    case Objective::DirectAu: return "directau";
    case Objective::Nclg: return "nclg";
    case Objective::Ncl: return "ncl";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  if (name == "bpr") return Objective::Bpr;
  if (name == "infonce") return Objective::InfoNce;
  if (name == "directau") return Objective::DirectAu;
  if (name == "nclg") return Objective::Nclg;
  if (name == "ncl") return Objective::Ncl;
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(dim >= 1, "dim must be >= 1");
  require(layers >= 0, "layers must be >= 0");
  require(layer_weights.empty() || layer_weights.size() == static_cast<std::size_t>(layers) + 1,
          "layer_weights needs layers + 1 entries");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate >= 0, "learning_rate must be >= 0");
  require(init_scale > 0, "init_scale must be positive");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(!eval_cutoffs.empty() && std::is_sorted(eval_cutoffs.begin(), eval_cutoffs.end()) &&
              eval_cutoffs.front() >= 1,
          "eval_cutoffs must be positive and ascending");
  require(valid_user_cap >= 1, "valid_user_cap must be >= 1");
  switch (objective) {
    case Objective::InfoNce:
      require(tau > 0, "tau must be positive");
      require(lambda >= 0, "lambda must be >= 0");
      break;
    case Objective::DirectAu:
      require(lambda >= 0, "lambda must be >= 0");
      break;
    case Objective::Ncl:
      require(clusters_user >= 2 && clusters_item >= 2, "cluster counts must be >= 2");
      require(classifier_hidden >= 0, "classifier_hidden must be >= 0");
      require(classifier_steps >= 0, "classifier_steps must be >= 0");
      require(ipot.iterations >= 1 && ipot.inner_iterations >= 1 && ipot.beta > 0 && ipot.tol > 0,
              "invalid transport solver settings");
      [[fallthrough]];
    case Objective::Nclg:
      require(alpha >= 0, "alpha must be >= 0");
      require(epsilon_sq > 0, "epsilon_sq must be positive");
      require(membership_sample >= 1, "membership_sample must be >= 1");
      break;
    case Objective::Bpr:
      break;
  }
}

void adam_step(std::span<const ParamGrad> params, OptimizerState& state, double learning_rate) {
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.push_back(RowMatrix::Zero(p.param->rows(), p.param->cols()));
      state.second.push_back(RowMatrix::Zero(p.param->rows(), p.param->cols()));
    }
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first[k];
    auto& v = state.second[k];
    const auto& g = *params[k].grad;
    if (g.rows() != m.rows() || g.cols() != m.cols()) throw std::invalid_argument("gradient shape mismatch");
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    params[k].param->array() -=
        learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

std::vector<Batch> minibatch_iter(std::span<const TrainPair> pairs, int batch_size, int epoch, std::uint64_t seed,
                                  const ItemLists* positives, Id num_items) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  CounterRng shuffler(seed, stream_id(static_cast<std::uint64_t>(epoch), 0));
  shuffle(std::span<std::size_t>(order), shuffler);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch b;
    b.pairs.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) b.pairs.push_back(pairs[order[k]]);
    if (positives) {
      CounterRng rng(seed, stream_id(static_cast<std::uint64_t>(epoch), batches.size(), 1));
      b.negatives.reserve(b.pairs.size());
      for (const auto& p : b.pairs) {
        const auto& seen = (*positives)[static_cast<std::size_t>(p.user)];
        if (seen.size() >= static_cast<std::size_t>(num_items))
          throw std::invalid_argument("user has interacted with every item; cannot sample a negative");
        Id j;
        do {
          j = static_cast<Id>(rng.below(static_cast<std::uint64_t>(num_items)));
        } while (std::binary_search(seen.begin(), seen.end(), j));
        b.negatives.push_back(j);
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

bool uses_negatives(Objective o) { return o == Objective::Bpr || o == Objective::InfoNce; }

// Sorted distinct ids plus each input's position among them.
struct LocalIndex {
  std::vector<Index> ids;
  std::vector<Index> slot;
};

LocalIndex localize(std::span<const Id> ids) {
  LocalIndex out;
  out.ids.assign(ids.begin(), ids.end());
  std::sort(out.ids.begin(), out.ids.end());
  out.ids.erase(std::unique(out.ids.begin(), out.ids.end()), out.ids.end());
  out.slot.reserve(ids.size());
  for (Id v : ids)
    out.slot.push_back(std::lower_bound(out.ids.begin(), out.ids.end(), static_cast<Index>(v)) - out.ids.begin());
  return out;
}

RowMatrix gather_rows(const RowMatrix& src, std::span<const Index> ids) {
  RowMatrix out(static_cast<Index>(ids.size()), src.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) out.row(static_cast<Index>(k)) = src.row(ids[k]);
  return out;
}

// Compactness of a batch side. Without memberships only the expansion term
// -R remains.
RateResult side_compactness(const RowMatrix& rows, const std::optional<MembershipSet>& members,
                            std::span<const Index> ids, double epsilon_sq) {
  const Matrix columns = rows.transpose();
  if (!members) {
    RateResult r = coding_rate(columns, epsilon_sq);
    r.value = -r.value;
    r.grad = -r.grad;
    return r;
  }
  const auto restricted = restrict_memberships(*members, ids);
  return compactness_loss(columns, epsilon_sq, restricted.set);
}

}  // namespace

Trainer::Trainer(TrainConfig config, const SplitDataset& split)
    : config_(std::move(config)), split_(&split), adj_(build_adjacency(split.train)) {
  config_.validate();
  const auto& train = split.train;
  pairs_.reserve(train.size());
  for (const auto& r : train.records) pairs_.push_back({r.user, r.item});
  train_items_ = train.items_by_user();
  valid_items_ = split.valid.items_by_user();

  std::vector<Id> candidates;
  for (Id u = 0; u < train.num_users; ++u)
    if (!valid_items_[static_cast<std::size_t>(u)].empty()) candidates.push_back(u);
  if (candidates.size() > static_cast<std::size_t>(config_.valid_user_cap)) {
    CounterRng rng(config_.eval_seed, 0xe7a1);
    shuffle(std::span<Id>(candidates), rng);
    candidates.resize(static_cast<std::size_t>(config_.valid_user_cap));
    std::sort(candidates.begin(), candidates.end());
  }
  valid_users_ = std::move(candidates);

  state_.table = init_embeddings(train.num_users, train.num_items, config_.dim, config_.init_seed, config_.init_scale);
  state_.best_table = state_.table;
  if (config_.objective == Objective::Ncl) {
    const int hidden = config_.classifier_hidden > 0 ? config_.classifier_hidden : 2 * config_.dim;
    state_.head_user = ClassifierHead::init(config_.dim, hidden, config_.clusters_user, stream_id(config_.init_seed, 11));
    state_.head_item = ClassifierHead::init(config_.dim, hidden, config_.clusters_item, stream_id(config_.init_seed, 12));
  }
  if (config_.objective == Objective::Nclg) {
    indicator_user_ = thresholded_memberships(build_cooccurrence(train, Side::User), config_.cooccurrence);
    indicator_item_ = thresholded_memberships(build_cooccurrence(train, Side::Item), config_.cooccurrence);
    sample_cooccurrence(1);
  }
  initial_valid_ = evaluate_valid(state_.table);
}

Trainer::Trainer(TrainConfig config, const SplitDataset& split, TrainerState state) : Trainer(std::move(config), split) {
  if (state.table.user.rows() != split.train.num_users || state.table.item.rows() != split.train.num_items ||
      state.table.dim() != config_.dim)
    throw InputError("checkpoint does not match the dataset or configuration");
  state_ = std::move(state);
  if (config_.objective == Objective::Nclg) sample_cooccurrence(state_.epoch + 1);
}

int Trainer::selection_cutoff() const { return static_cast<int>(std::min<Id>(10, split_->train.num_items)); }

bool Trainer::done() const { return state_.stopped || state_.epoch >= config_.max_epochs; }

ForwardCache Trainer::forward(const EmbeddingTable& table) const {
  return encode(adj_, table, config_.layers, config_.normalize, config_.layer_weights);
}

RankingMetrics Trainer::evaluate_valid(const EmbeddingTable& table) const {
  const auto cache = forward(table);
  RankRequest req;
  req.users = &cache.user_output();
  req.items = &cache.item_output();
  req.ground_truth = &valid_items_;
  req.masks = {&train_items_};
  req.cutoffs = config_.eval_cutoffs;
  const int select = selection_cutoff();
  if (!std::binary_search(req.cutoffs.begin(), req.cutoffs.end(), select)) {
    req.cutoffs.push_back(select);
    std::sort(req.cutoffs.begin(), req.cutoffs.end());
  }
  req.user_subset = valid_users_;
  return rank_and_score(req);
}

void Trainer::sample_cooccurrence(int next_epoch) {
  const auto seed = stream_id(config_.batch_seed, static_cast<std::uint64_t>(next_epoch), 7);
  state_.members_user = sample_memberships(*indicator_user_, static_cast<std::size_t>(config_.membership_sample), seed);
  state_.members_item =
      sample_memberships(*indicator_item_, static_cast<std::size_t>(config_.membership_sample), seed + 1);
}

double Trainer::train_batch(const Batch& batch, int epoch, long index) {
  const auto cache = forward(state_.table);
  const RowMatrix& all_users = cache.user_output();
  const RowMatrix& all_items = cache.item_output();

  std::vector<Id> user_ids;
  std::vector<Id> item_ids;
  user_ids.reserve(batch.pairs.size());
  item_ids.reserve(batch.pairs.size() * 2);
  for (const auto& p : batch.pairs) {
    user_ids.push_back(p.user);
    item_ids.push_back(p.item);
  }
  item_ids.insert(item_ids.end(), batch.negatives.begin(), batch.negatives.end());
  const auto users = localize(user_ids);
  const auto items = localize(item_ids);
  const RowMatrix u_rows = gather_rows(all_users, users.ids);
  const RowMatrix i_rows = gather_rows(all_items, items.ids);

  const std::size_t n_pairs = batch.pairs.size();
  std::vector<PairIndex> pairs(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) pairs[k] = {users.slot[k], items.slot[k]};

  LossResult loss;
  switch (config_.objective) {
    case Objective::Bpr:
    case Objective::InfoNce: {
      std::vector<TripleIndex> triples(n_pairs);
      for (std::size_t k = 0; k < n_pairs; ++k)
        triples[k] = {users.slot[k], items.slot[k], items.slot[n_pairs + k]};
      loss = bpr_loss(triples, u_rows, i_rows);
      if (config_.objective == Objective::InfoNce) {
        RowMatrix view_a(static_cast<Index>(n_pairs), config_.dim);
        RowMatrix view_b(static_cast<Index>(n_pairs), config_.dim);
        for (std::size_t k = 0; k < n_pairs; ++k) {
          view_a.row(static_cast<Index>(k)) = u_rows.row(pairs[k].user);
          view_b.row(static_cast<Index>(k)) = i_rows.row(pairs[k].item);
        }
        const auto nce = infonce_loss(view_a, view_b, config_.tau);
        loss.value += config_.lambda * nce.value;
        for (std::size_t k = 0; k < n_pairs; ++k) {
          loss.grad_user.row(pairs[k].user) += config_.lambda * nce.grad_user.row(static_cast<Index>(k));
          loss.grad_item.row(pairs[k].item) += config_.lambda * nce.grad_item.row(static_cast<Index>(k));
        }
      }
      break;
    }
    case Objective::DirectAu:
      loss = directau_loss(pairs, u_rows, i_rows, config_.lambda);
      break;
    case Objective::Nclg:
    case Objective::Ncl: {
      const auto align = alignment_loss(pairs, u_rows, i_rows);
      const auto cu = side_compactness(u_rows, state_.members_user, users.ids, config_.epsilon_sq);
      const auto ci = side_compactness(i_rows, state_.members_item, items.ids, config_.epsilon_sq);
      loss = ncl_total(align, cu, ci, config_.alpha);
      break;
    }
  }
  if (!std::isfinite(loss.value) || !loss.grad_user.allFinite() || !loss.grad_item.allFinite())
    throw DivergenceError(epoch, index);

  RowMatrix grad_users = RowMatrix::Zero(all_users.rows(), all_users.cols());
  RowMatrix grad_items = RowMatrix::Zero(all_items.rows(), all_items.cols());
  for (std::size_t k = 0; k < users.ids.size(); ++k) grad_users.row(users.ids[k]) = loss.grad_user.row(static_cast<Index>(k));
  for (std::size_t k = 0; k < items.ids.size(); ++k) grad_items.row(items.ids[k]) = loss.grad_item.row(static_cast<Index>(k));
  const auto grads = backprop(adj_, cache, grad_users, grad_items);
  const ParamGrad params[] = {{&state_.table.user, &grads.user}, {&state_.table.item, &grads.item}};
  adam_step(params, state_.optimizer, config_.learning_rate);
  return loss.value;
}

MembershipStats Trainer::refresh_memberships(int next_epoch) {
  MembershipStats stats;
  if (config_.objective == Objective::Nclg) {
    sample_cooccurrence(next_epoch);
    stats.user_clusters = state_.members_user->num_clusters();
    stats.item_clusters = state_.members_item->num_clusters();
    return stats;
  }
  if (config_.objective != Objective::Ncl) return stats;

  const auto cache = forward(state_.table);
  const auto refresh = [&](const RowMatrix& rows, ClassifierHead& head, std::optional<MembershipSet>& members,
                           double& cross_entropy) {
    const Matrix p = classifier_forward(rows, head);
    const auto assignment = ipot_assign(p, config_.ipot);
    stats.transport_converged = stats.transport_converged && assignment.converged;
    members = memberships_from_assignments(assignment.q, config_.membership_mode, config_.membership_prune);
    for (int s = 0; s < config_.classifier_steps; ++s) {
      auto step = update_classifier(rows, assignment.q, head, config_.classifier_lr);
      if (s == 0) cross_entropy = step.cross_entropy;
      head = std::move(step.head);
    }
    return members->num_clusters();
  };
  stats.user_clusters = refresh(cache.user_output(), *state_.head_user, state_.members_user, stats.user_cross_entropy);
  stats.item_clusters = refresh(cache.item_output(), *state_.head_item, state_.members_item, stats.item_cross_entropy);
  return stats;
}

const EpochReport& Trainer::run_epoch() {
  if (done()) throw std::logic_error("training already finished");
  const auto start = std::chrono::steady_clock::now();
  const int epoch = state_.epoch + 1;

  const auto batches = minibatch_iter(pairs_, config_.batch_size, epoch, config_.batch_seed,
                                      uses_negatives(config_.objective) ? &train_items_ : nullptr,
                                      split_->train.num_items);
  double total = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) total += train_batch(batches[b], epoch, static_cast<long>(b));

  EpochReport report;
  report.epoch = epoch;
  report.loss = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
  report.refresh = refresh_memberships(epoch + 1);
  report.valid = evaluate_valid(state_.table);

  const double ndcg = report.valid.ndcg_at(selection_cutoff());
  if (ndcg > state_.best_ndcg) {
    state_.best_ndcg = ndcg;
    state_.best_epoch = epoch;
    state_.best_table = state_.table;
    state_.bad_epochs = 0;
  } else if (++state_.bad_epochs >= config_.patience) {
    state_.stopped = true;
  }
  state_.epoch = epoch;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  state_.history.push_back(std::move(report));
  return state_.history.back();
}

TrainResult Trainer::result() const {
  TrainResult out;
  out.best_table = state_.best_table;
  const auto cache = forward(state_.best_table);
  out.best_user = cache.user_output();
  out.best_item = cache.item_output();
  out.history = state_.history;
  out.best_epoch = state_.best_epoch;
  out.initial_valid = initial_valid_;
  return out;
}

TrainResult train(const TrainConfig& config, const SplitDataset& split) {
  Trainer trainer(config, split);
  while (!trainer.done()) trainer.run_epoch();
  return trainer.result();
}

}  // namespace ncl

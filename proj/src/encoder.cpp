#include "ncl/encoder.hpp"

#include <stdexcept>

#include "ncl/rng.hpp"

namespace ncl {

EmbeddingTable init_embeddings(Id num_users, Id num_items, int dim, std::uint64_t seed, double scale) {
  if (scale <= 0) throw std::invalid_argument("init scale must be positive");
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  EmbeddingTable t;
  t.user.resize(num_users, dim);
  t.item.resize(num_items, dim);
  CounterRng user_rng(seed, 1);
  CounterRng item_rng(seed, 2);
  for (Index r = 0; r < t.user.rows(); ++r)
    for (Index c = 0; c < dim; ++c) t.user(r, c) = scale * user_rng.normal();
  for (Index r = 0; r < t.item.rows(); ++r)
    for (Index c = 0; c < dim; ++c) t.item(r, c) = scale * item_rng.normal();
  return t;
}

std::vector<double> uniform_layer_weights(int layers) {
  return std::vector<double>(static_cast<std::size_t>(layers) + 1, 1.0 / (layers + 1));
}

NormalizedRows normalize_rows(const RowMatrix& m) {
  NormalizedRows out;
  out.rows = m;
  out.norms = m.rowwise().norm();
  for (Index r = 0; r < m.rows(); ++r) {
    if (out.norms(r) > 0) {
      out.rows.row(r) /= out.norms(r);
    } else {
      ++out.zero_rows;
    }
  }
  return out;
}

RowMatrix normalize_backward(const NormalizedRows& normalized, const RowMatrix& grad) {
  RowMatrix out(grad.rows(), grad.cols());
  for (Index r = 0; r < grad.rows(); ++r) {
    const double norm = normalized.norms(r);
    if (norm <= 0) {
      out.row(r).setZero();
      continue;
    }
    const auto unit = normalized.rows.row(r);
    out.row(r) = (grad.row(r) - unit.dot(grad.row(r)) * unit) / norm;
  }
  return out;
}

ForwardCache propagate(const NormalizedAdjacency& adj, const EmbeddingTable& table, int layers,
                       std::vector<double> layer_weights) {
  if (layers < 0) throw std::invalid_argument("layer count must be >= 0");
  if (layer_weights.empty()) layer_weights = uniform_layer_weights(layers);
  if (layer_weights.size() != static_cast<std::size_t>(layers) + 1)
    throw std::invalid_argument("need one pooling weight per layer");
  if (table.user.rows() != adj.num_users() || table.item.rows() != adj.num_items())
    throw std::invalid_argument("embedding table does not match adjacency");

  ForwardCache cache;
  cache.layer_weights = std::move(layer_weights);
  cache.user_layers.resize(static_cast<std::size_t>(layers) + 1);
  cache.item_layers.resize(static_cast<std::size_t>(layers) + 1);
  cache.user_layers[0] = table.user;
  cache.item_layers[0] = table.item;
  for (int l = 0; l < layers; ++l) {
    adj.gather_to_users(cache.item_layers[l], cache.user_layers[l + 1]);
    adj.gather_to_items(cache.user_layers[l], cache.item_layers[l + 1]);
  }
  cache.pooled_user = cache.layer_weights[0] * cache.user_layers[0];
  cache.pooled_item = cache.layer_weights[0] * cache.item_layers[0];
  for (int l = 1; l <= layers; ++l) {
    cache.pooled_user += cache.layer_weights[l] * cache.user_layers[l];
    cache.pooled_item += cache.layer_weights[l] * cache.item_layers[l];
  }
  return cache;
}

ForwardCache encode(const NormalizedAdjacency& adj, const EmbeddingTable& table, int layers,
                    bool normalize, std::vector<double> layer_weights) {
  auto cache = propagate(adj, table, layers, std::move(layer_weights));
  if (normalize) {
    cache.normalized = true;
    cache.out_user = normalize_rows(cache.pooled_user);
    cache.out_item = normalize_rows(cache.pooled_item);
  }
  return cache;
}

EmbeddingTable backprop(const NormalizedAdjacency& adj, const ForwardCache& cache,
                        const RowMatrix& grad_user_out, const RowMatrix& grad_item_out) {
  const RowMatrix grad_user = cache.normalized ? normalize_backward(cache.out_user, grad_user_out) : grad_user_out;
  const RowMatrix grad_item = cache.normalized ? normalize_backward(cache.out_item, grad_item_out) : grad_item_out;
  const int layers = cache.layers();
  const auto& w = cache.layer_weights;

  // Reverse sweep: U_{l+1} = A I_l and I_{l+1} = A^T U_l, so the adjoint of
  // U_{l+1} flows into I_l through A^T and vice versa.
  RowMatrix g_user = w[layers] * grad_user;
  RowMatrix g_item = w[layers] * grad_item;
  RowMatrix to_user;
  RowMatrix to_item;
  for (int l = layers - 1; l >= 0; --l) {
    adj.gather_to_users(g_item, to_user);
    adj.gather_to_items(g_user, to_item);
    g_user = w[l] * grad_user + to_user;
    g_item = w[l] * grad_item + to_item;
  }
  return {std::move(g_user), std::move(g_item)};
}

}  // namespace ncl

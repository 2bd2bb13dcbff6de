#pragma once

#include <cstdint>
#include <vector>

#include "ncl/dataset.hpp"
#include "ncl/types.hpp"

namespace ncl {

struct EmbeddingTable {
  RowMatrix user;
  RowMatrix item;

  int dim() const { return static_cast<int>(user.cols()); }
};

// Entries i.i.d. N(0, scale^2).
EmbeddingTable init_embeddings(Id num_users, Id num_items, int dim, std::uint64_t seed, double scale);

std::vector<double> uniform_layer_weights(int layers);

struct NormalizedRows {
  RowMatrix rows;
  Vector norms;
  // Rows whose norm was zero; they stay zero.
  Index zero_rows = 0;
};

NormalizedRows normalize_rows(const RowMatrix& m);
// Pulls a gradient on the normalized rows back through x / |x|:
// (I - x_hat x_hat^T) g / |x| per row, zero for zero rows.
RowMatrix normalize_backward(const NormalizedRows& normalized, const RowMatrix& grad);

struct ForwardCache {
  std::vector<double> layer_weights;
  std::vector<RowMatrix> user_layers;
  std::vector<RowMatrix> item_layers;
  RowMatrix pooled_user;
  RowMatrix pooled_item;
  bool normalized = false;
  NormalizedRows out_user;
  NormalizedRows out_item;

  int layers() const { return static_cast<int>(user_layers.size()) - 1; }
  // Final embeddings: normalized when requested, pooled otherwise.
  const RowMatrix& user_output() const { return normalized ? out_user.rows : pooled_user; }
  const RowMatrix& item_output() const { return normalized ? out_item.rows : pooled_item; }
};

// LightGCN propagation with weighted-sum layer pooling. Empty weights mean
// uniform 1/(L+1).
ForwardCache propagate(const NormalizedAdjacency& adj, const EmbeddingTable& table, int layers,
                       std::vector<double> layer_weights = {});

// propagate + optional row normalization of the pooled outputs.
ForwardCache encode(const NormalizedAdjacency& adj, const EmbeddingTable& table, int layers,
                    bool normalize, std::vector<double> layer_weights = {});

// Gradient of a loss on the cache's outputs with respect to the layer-0 tables.
EmbeddingTable backprop(const NormalizedAdjacency& adj, const ForwardCache& cache,
                        const RowMatrix& grad_user_out, const RowMatrix& grad_item_out);

template <typename A, typename B>
double score(const Eigen::MatrixBase<A>& user, const Eigen::MatrixBase<B>& item) {
  return user.dot(item);
}

}  // namespace ncl

#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace ncl {

// Contiguous user or item index.
using Id = std::int32_t;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Embedding tables are stored one entity per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Side { User, Item };

}  // namespace ncl

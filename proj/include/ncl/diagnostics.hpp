#pragma once

#include <span>
#include <string>
#include <vector>

#include "ncl/objectives.hpp"
#include "ncl/types.hpp"

namespace ncl {

// C = (1/n) sum (e - mean)(e - mean)^T over the rows of E.
Matrix covariance(const RowMatrix& rows);

inline const std::vector<double> kDefaultSpectrumThresholds{1e-3, 1e-2, 1e-1};

struct SpectrumReport {
  // Descending, divided by the largest value.
  std::vector<double> scaled;
  double raw_max = 0.0;
  // exp of the entropy of the normalized spectrum.
  double effective_rank = 0.0;
  std::vector<double> thresholds;
  // Scaled values strictly below each threshold.
  std::vector<std::size_t> below;
  bool degenerate = false;

  std::size_t count_at_least(double threshold) const;
};

SpectrumReport spectrum(const Matrix& cov, std::span<const double> thresholds = kDefaultSpectrumThresholds);

struct EmbeddingMetrics {
  double alignment = 0.0;
  double uniformity_user = 0.0;
  double uniformity_item = 0.0;
};

EmbeddingMetrics embedding_metrics(const RowMatrix& users, const RowMatrix& items,
                                   std::span<const PairIndex> positives);

// `index,scaled_singular_value` lines.
std::string spectrum_csv(const SpectrumReport& report);
std::string spectrum_json(const SpectrumReport& report);

}  // namespace ncl

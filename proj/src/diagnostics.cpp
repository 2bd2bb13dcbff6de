#include "ncl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "ncl/errors.hpp"

namespace ncl {

Matrix covariance(const RowMatrix& rows) {
  if (rows.rows() < 2) throw UndefinedMetricError("covariance needs at least two rows");
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const RowMatrix centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(rows.rows());
}

std::size_t SpectrumReport::count_at_least(double threshold) const {
  return static_cast<std::size_t>(
      std::count_if(scaled.begin(), scaled.end(), [&](double v) { return v >= threshold; }));
}

SpectrumReport spectrum(const Matrix& cov, std::span<const double> thresholds) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("spectrum needs a square matrix");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("covariance is not symmetric");

  // For a symmetric PSD matrix the singular values are the eigenvalues.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov, Eigen::EigenvaluesOnly);
  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + cov.rows());
  for (double& v : values) v = std::max(0.0, v);
  std::sort(values.begin(), values.end(), std::greater<>());

  SpectrumReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.raw_max = values.empty() ? 0.0 : values.front();
  report.scaled.assign(values.size(), 0.0);
  report.degenerate = !(report.raw_max > 0);
  if (!report.degenerate) {
    double total = 0;
    for (double v : values) total += v;
    double entropy = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      report.scaled[i] = values[i] / report.raw_max;
      const double p = values[i] / total;
      if (p > 0) entropy -= p * std::log(p);
    }
    report.effective_rank = std::exp(entropy);
  }
  for (double t : report.thresholds) {
    report.below.push_back(static_cast<std::size_t>(
        std::count_if(report.scaled.begin(), report.scaled.end(), [&](double v) { return v < t; })));
  }
  return report;
}

EmbeddingMetrics embedding_metrics(const RowMatrix& users, const RowMatrix& items,
                                   std::span<const PairIndex> positives) {
  EmbeddingMetrics m;
  m.alignment = alignment_loss(positives, users, items).value;
  m.uniformity_user = uniformity_value(users);
  m.uniformity_item = uniformity_value(items);
  return m;
}

std::string spectrum_csv(const SpectrumReport& report) {
  std::ostringstream s;
  s.precision(17);
  s << "index,scaled_singular_value\n";
  for (std::size_t i = 0; i < report.scaled.size(); ++i) s << i << ',' << report.scaled[i] << '\n';
  return s.str();
}

std::string spectrum_json(const SpectrumReport& report) {
  nlohmann::ordered_json j;
  j["dimension"] = report.scaled.size();
  j["raw_max"] = report.raw_max;
  j["effective_rank"] = report.effective_rank;
  j["degenerate"] = report.degenerate;
  auto counts = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < report.thresholds.size(); ++t)
    counts.push_back({{"threshold", report.thresholds[t]}, {"below", report.below[t]}});
  j["below_threshold"] = std::move(counts);
  return j.dump(2) + "\n";
}

}  // namespace ncl

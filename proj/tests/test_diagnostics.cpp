#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>

#include "doctest.h"
#include "json.hpp"
#include "ncl/diagnostics.hpp"
#include "ncl/errors.hpp"
#include "ncl/objectives.hpp"
#include "support.hpp"

using namespace ncl;
using test::random_matrix;
using test::random_rows;
using test::unit_rows;

TEST_CASE("covariance special cases") {
  RowMatrix same = RowMatrix::Ones(5, 3);
  CHECK(covariance(same).norm() == 0.0);

  Vector v(3);
  v << 0.6, 0.8, 0;
  RowMatrix pm(4, 3);
  pm << v.transpose(), -v.transpose(), v.transpose(), -v.transpose();
  CHECK((covariance(pm) - v * v.transpose()).norm() <= 1e-15);
  CHECK_THROWS_AS(covariance(RowMatrix::Ones(1, 3)), UndefinedMetricError);
}

TEST_CASE("covariance matches a two-pass oracle") {
  CounterRng rng(61, 0);
  const RowMatrix e = unit_rows(200, 16, rng);
  Vector mean = Vector::Zero(16);
  for (Index r = 0; r < 200; ++r) mean += e.row(r).transpose();
  mean /= 200.0;
  Matrix c = Matrix::Zero(16, 16);
  for (Index r = 0; r < 200; ++r) {
    const Vector x = e.row(r).transpose() - mean;
    c += x * x.transpose();
  }
  c /= 200.0;
  CHECK((covariance(e) - c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("spectrum of identity and rank one") {
  const auto flat = spectrum(Matrix::Identity(8, 8));
  for (Index i = 0; i < 8; ++i) CHECK(flat.scaled[i] == doctest::Approx(1.0));
  CHECK(flat.effective_rank == doctest::Approx(8.0).epsilon(1e-6));

  Vector v = Vector::LinSpaced(6, 1, 6).normalized();
  const auto one = spectrum(v * v.transpose());
  CHECK(one.scaled[0] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < 6; ++i) CHECK(std::abs(one.scaled[i]) <= 1e-12);
  CHECK(one.count_at_least(0.1) == 1);

  const auto zero = spectrum(Matrix::Zero(4, 4));
  CHECK(zero.degenerate);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1e-3;
  CHECK_THROWS(spectrum(asym));
}

TEST_CASE("spectrum matches the singular values of a random PSD matrix") {
  CounterRng rng(62, 0);
  const Matrix a = random_matrix(32, 20, rng);
  const Matrix c = a * a.transpose();
  const auto report = spectrum(c);
  Eigen::JacobiSVD<Matrix> svd(c);
  const Vector s = svd.singularValues();
  CHECK(report.raw_max == doctest::Approx(s(0)).epsilon(1e-12));
  for (Index i = 0; i < 32; ++i) CHECK(std::abs(report.scaled[i] - s(i) / s(0)) <= 1e-9);
  for (Index i = 1; i < 32; ++i) CHECK(report.scaled[i] <= report.scaled[i - 1]);

  const auto scaled = spectrum(3.7 * c);
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(scaled.scaled[i] - report.scaled[i]) <= 1e-10);

  Vector p = s / s.sum();
  double h = 0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  CHECK(report.effective_rank == doctest::Approx(std::exp(h)).epsilon(1e-8));
}

TEST_CASE("embeddings in a k-dimensional subspace") {
  CounterRng rng(63, 0);
  const Index d = 16, k = 3;
  const Matrix basis = Eigen::HouseholderQR<Matrix>(random_matrix(d, d, rng)).householderQ();
  RowMatrix e = random_rows(300, k, rng) * basis.leftCols(k).transpose();
  const auto report = spectrum(covariance(e));
  CHECK(std::count_if(report.scaled.begin(), report.scaled.end(), [](double x) { return x > 1e-8; }) <= k);
  CHECK(report.count_at_least(1e-3) == k);
  const auto below = report.below;
  REQUIRE(below.size() == 3);
  CHECK(below[0] == static_cast<std::size_t>(d - k));
}

TEST_CASE("embedding metrics agree with the objectives") {
  CounterRng rng(64, 0);
  const RowMatrix users = unit_rows(12, 5, rng), items = unit_rows(9, 5, rng);
  std::vector<PairIndex> pairs;
  for (int k = 0; k < 20; ++k) pairs.push_back({static_cast<Index>(rng.below(12)), static_cast<Index>(rng.below(9))});
  const auto m = embedding_metrics(users, items, pairs);
  CHECK(std::abs(m.alignment - alignment_loss(pairs, users, items).value) <= 1e-12);
  CHECK(std::abs(m.uniformity_user - uniformity_value(users)) <= 1e-12);
  CHECK(std::abs(m.uniformity_item - uniformity_value(items)) <= 1e-12);

  const std::vector<PairIndex> self{{0, 0}};
  CHECK(embedding_metrics(users.topRows(2), users.topRows(2), self).alignment == 0.0);
  RowMatrix anti(2, 2);
  anti << 0, 1, 0, -1;
  CHECK(embedding_metrics(anti, anti, self).uniformity_user == doctest::Approx(-8.0));
}

TEST_CASE("spectrum reports") {
  const auto report = spectrum(Matrix::Identity(3, 3));
  const std::string csv = spectrum_csv(report);
  CHECK(csv.rfind("index,scaled_singular_value\n", 0) == 0);
  CHECK(csv == spectrum_csv(spectrum(Matrix::Identity(3, 3))));
  const auto doc = nlohmann::json::parse(spectrum_json(report));
  CHECK(doc["dimension"].get<int>() == 3);
  CHECK(doc["effective_rank"].get<double>() == doctest::Approx(3.0));
  CHECK(doc["below_threshold"].size() == 3);
}

#include <doctest.h>

#include <numeric>

#include "ggom/errors.hpp"
#include "ggom/linalg.hpp"
#include "ggom/vertex_hunting.hpp"
#include "support.hpp"

using namespace ggom;

namespace {

std::vector<Index> all_rows(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

std::vector<Index> sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Mean distance from row i to its r nearest other rows, by full sort.
double knn_score(const Eigen::MatrixXd& u, Index i, Index r) {
  std::vector<double> d;
  for (Index j = 0; j < u.rows(); ++j)
    if (j != i) d.push_back((u.row(i) - u.row(j)).norm());
  std::sort(d.begin(), d.end());
  return std::accumulate(d.begin(), d.begin() + r, 0.0) / static_cast<double>(r);
}

}  // namespace

TEST_CASE("identical rows are never pruned") {
  const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(30, 2, 0.3);
  CHECK(prune(u, PruneConfig{}).empty());
}

TEST_CASE("a far outlier with top norm is pruned") {
  const Eigen::MatrixXd cluster = 0.01 * testing::gaussian(100, 3, 4);
  Eigen::MatrixXd u(101, 3);
  u.topRows(100) = cluster.rowwise() + Eigen::RowVector3d(1.0, 0.0, 0.0);
  const double radius = cluster.rowwise().norm().maxCoeff();
  u.row(100) = Eigen::RowVector3d(1.0 + 10.0 * radius, 0.0, 0.0);

  const PruneConfig cfg;
  const auto pruned = prune(u, cfg);
  CHECK(std::find(pruned.begin(), pruned.end(), 100) != pruned.end());

  // Brute-force oracle for the whole rule.
  std::vector<double> norms(101);
  for (Index i = 0; i < 101; ++i) norms[i] = u.row(i).norm();
  const double cut = detail::quantile(norms, 1.0 - cfg.q);
  std::vector<Index> top;
  std::vector<double> scores;
  for (Index i = 0; i < 101; ++i) {
    if (norms[i] > cut) {
      top.push_back(i);
      scores.push_back(knn_score(u, i, cfg.r));
    }
  }
  const double threshold = (1.0 + cfg.e) * detail::median(scores);
  std::vector<Index> expected;
  for (std::size_t t = 0; t < top.size(); ++t)
    if (scores[t] > threshold) expected.push_back(top[t]);
  CHECK(pruned == expected);
}

TEST_CASE("infinite tolerance disables pruning") {
  const Eigen::MatrixXd u = testing::gaussian(50, 3, 1);
  CHECK(prune(u, PruneConfig{10, 0.4, 1e300}).empty());
  CHECK(prune(u, PruneConfig::disabled()).empty());
}

TEST_CASE("pruning never removes more than a fifth of the rows") {
  // Heavy-tailed radii: many isolated high-norm rows.
  Eigen::MatrixXd u = testing::gaussian(200, 2, 6);
  for (Index i = 0; i < 200; ++i) u.row(i) *= std::exp(3.0 * static_cast<double>(i) / 200.0);
  const auto pruned = prune(u, PruneConfig{5, 0.9, 0.0});
  CHECK(pruned.size() <= 40);
  CHECK(pruned.size() > 0);
}

TEST_CASE("prune preconditions and config checks") {
  const Eigen::MatrixXd u = testing::gaussian(20, 3, 2);
  CHECK_THROWS_AS(prune(u, PruneConfig{0, 0.4, 0.2}), UsageError);
  CHECK_THROWS_AS(prune(u, PruneConfig{10, 1.0, 0.2}), UsageError);
  CHECK_THROWS_AS(prune(u, PruneConfig{10, 0.4, -1.0}), UsageError);
  CHECK_THROWS_AS(prune(u, PruneConfig{20, 0.4, 0.2}), ValidationError);
  CHECK_THROWS_AS(prune(testing::gaussian(3, 3, 2), PruneConfig{}), ValidationError);
}

TEST_CASE("type-7 quantile") {
  CHECK(detail::quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(detail::quantile({4, 1, 3, 2}, 0.6) == doctest::Approx(2.8));
  CHECK(detail::quantile({5}, 0.3) == 5.0);
}

TEST_CASE("SPA picks the vertices of a segment") {
  Eigen::MatrixXd y(3, 2);
  y << 1, 0, 0, 1, 0.5, 0.5;
  const auto res = spa(y, 2, all_rows(3));
  CHECK(sorted(res.indices) == std::vector<Index>{0, 1});
  CHECK(res.indices[0] == 0);  // tie between rows 0 and 1 goes to the lower index
}

TEST_CASE("SPA finds identity rows among convex combinations") {
  CounterRng rng(12);
  Eigen::MatrixXd y(53, 3);
  y.topRows(3) = Eigen::Matrix3d::Identity();
  y.bottomRows(50) = sample_dirichlet(Eigen::Vector3d::Ones(), 50, rng);
  const auto res = spa(y, 3, all_rows(53));
  CHECK(sorted(res.indices) == std::vector<Index>{0, 1, 2});

  // Brute force: the first pick maximizes the raw norm.
  Index best = 0;
  y.rowwise().norm().maxCoeff(&best);
  CHECK(res.indices[0] == best);
}

TEST_CASE("SPA on the SVD of a noiseless GoM mean matrix returns the pure rows") {
  const auto inst = testing::noiseless_polytomous(8, 80, 15, 3, 3);
  const auto f = truncated_svd(inst.data.values, 3);
  CHECK(sorted(spa(f.U, 3, all_rows(80)).indices) == std::vector<Index>{0, 1, 2});
}

TEST_CASE("SPA is invariant under orthogonal rotation") {
  const Eigen::MatrixXd y = testing::gaussian(40, 4, 3);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(testing::gaussian(4, 4, 5));
  const Eigen::MatrixXd q = qr.householderQ();
  CHECK(spa(y, 4, all_rows(40)).indices == spa(Eigen::MatrixXd(y * q), 4, all_rows(40)).indices);
}

TEST_CASE("SPA respects candidates and fails loudly") {
  Eigen::MatrixXd y(4, 2);
  y << 5, 0, 0, 1, 1, 1, 0.5, 0;
  const auto res = spa(y, 2, {1, 2, 3});
  CHECK(std::find(res.indices.begin(), res.indices.end(), 0) == res.indices.end());
  CHECK_THROWS_AS(spa(y, 2, {1}), ValidationError);
  CHECK_THROWS_AS(spa(y, 3, {0, 1, 2}), ValidationError);
  CHECK_THROWS_AS(spa(Eigen::MatrixXd::Zero(4, 2), 2, all_rows(4)), NumericalError);
  Eigen::MatrixXd collinear(3, 2);
  collinear << 1, 1, 2, 2, 3, 3;
  CHECK_THROWS_AS(spa(collinear, 2, all_rows(3)), NumericalError);
}

TEST_CASE("hunt_vertices never selects a pruned row") {
  Eigen::MatrixXd u = 0.01 * testing::gaussian(60, 2, 9);
  u.col(0).array() += 1.0;
  u.row(7) << 3.0, 0.0;
  const auto res = hunt_vertices(u, PruneConfig{});
  REQUIRE_FALSE(res.pruned.empty());
  for (Index i : res.indices) CHECK(std::find(res.pruned.begin(), res.pruned.end(), i) == res.pruned.end());
  // Too few rows for pruning: SPA alone.
  CHECK(hunt_vertices(Eigen::MatrixXd(Eigen::Matrix2d::Identity()), PruneConfig{}).pruned.empty());
}

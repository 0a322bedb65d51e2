#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ggom/data_model.hpp"
#include "ggom/estimator.hpp"
#include "ggom/metrics.hpp"
#include "ggom/rng.hpp"
#include "ggom/simulate.hpp"

namespace ggom::testing {

struct Instance {
  ModelParams truth;
  FlatMatrix data;
};

// Noiseless polytomous instance: data is the mean matrix itself.
inline Instance noiseless_polytomous(std::uint64_t seed, Index n, Index items, int categories, Index k,
                                     bool random_placement = false) {
  SimScenario s;
  s.subjects = n;
  s.items = items;
  s.categories = categories;
  s.profiles = k;
  s.alpha.assign(static_cast<std::size_t>(k), 1.0);
  s.seed = seed;
  const CounterRng rng(seed);
  Instance inst;
  inst.truth.family = DataFamily::kPolytomous;
  inst.truth.partition = BlockPartition::uniform(items * categories, categories);
  inst.truth.memberships =
      gen_memberships(n, k, Eigen::VectorXd::Ones(k), rng.split(1), random_placement);
  inst.truth.item_params = gen_item_params(s, rng.split(2));
  inst.data.values = inst.truth.mean();
  inst.data.partition = inst.truth.partition;
  inst.data.family = DataFamily::kPolytomous;
  return inst;
}

// Pruning targets isolated high-norm rows, which in noiseless data are the
// pure subjects themselves, so it is switched off here.
inline FitConfig noiseless_config() {
  FitConfig cfg;
  cfg.check_input = false;
  cfg.prune = PruneConfig::disabled();
  return cfg;
}

// Singular values from the eigendecomposition of M^T M, largest first.
inline Eigen::VectorXd gram_singular_values(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m);
  Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().reverse();
  if (m.rows() < m.cols()) s.conservativeResize(m.rows());
  return s;
}

// Right singular subspace projector of the top k from M^T M.
inline Eigen::MatrixXd gram_right_projector(const Eigen::MatrixXd& m, Index k) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m);
  const Eigen::MatrixXd v = eig.eigenvectors().rightCols(k);
  return v * v.transpose();
}

inline Eigen::MatrixXd gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(gen);
  return m;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace ggom::testing

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ggom/data_model.hpp"

namespace ggom {

struct GibbsConfig {
  Eigen::VectorXd alpha;  // length K
  // Either a single value broadcast to every category, or one value per
  // category (requires every item to have that many categories).
  Eigen::VectorXd beta;
  int burnin = 5000;
  int samples = 2000;
  std::uint64_t seed = 1;

  void check(Index k) const;
};

struct GibbsEstimate {
  Eigen::MatrixXd memberships;  // posterior mean, N x K
  Eigen::MatrixXd item_params;  // posterior mean, flattened J x K
  BlockPartition partition;
  // log P(R | Pi, Theta) after every sweep (burn-in included).
  std::vector<double> log_likelihood;
  // Largest |sum_k p(Z_ij = k | ...) - 1| seen over the run.
  double max_assignment_error = 0.0;
  double seconds = 0.0;
};

// Three-block Gibbs sampler for the polytomous model: latent profile labels,
// then membership rows, then item tables. Each post-burn-in draw has its
// profiles aligned to the first post-burn-in draw before averaging.
GibbsEstimate gibbs_fit(const QuasiTensor& quasi, Index k, const GibbsConfig& cfg);

}  // namespace ggom

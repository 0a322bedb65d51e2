#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ggom/data_model.hpp"
#include "ggom/linalg.hpp"
#include "ggom/vertex_hunting.hpp"

namespace ggom {

inline constexpr double kMaxVertexCondition = 1e8;
inline constexpr double kDefaultPoissonFloor = 1e-8;

struct FitConfig {
  PruneConfig prune;
  // Replacement value for negative Poisson rates.
  double epsilon = kDefaultPoissonFloor;
  SvdOptions svd;
  // Reject data that violates its family's support. Off for noiseless
  // (mean-matrix) inputs.
  bool check_input = true;
};

struct FitDiagnostics {
  double seconds_total = 0.0;
  double seconds_svd = 0.0;
  double seconds_vertices = 0.0;
  double seconds_estimate = 0.0;
  bool gap_warning = false;
  double vertex_condition = 0.0;
  // Membership rows that were entirely nonpositive and set to uniform.
  std::vector<Index> degenerate_rows;
};

struct GomEstimate {
  DataFamily family = DataFamily::kBernoulli;
  VertexResult vertices;
  Eigen::MatrixXd memberships_raw;  // U (U_S)^{-1}
  Eigen::MatrixXd memberships;      // clipped and row-normalized
  Eigen::MatrixXd item_params_raw;  // V Lambda U_S^T
  Eigen::MatrixXd item_params;      // family-specific truncation
  SvdFactors<double> factors;
  BlockPartition partition;
  FitDiagnostics diagnostics;

  Index num_profiles() const { return memberships.cols(); }
};

// U (U_{S,:})^{-1}. Rows indexed by S are exactly the identity rows.
Eigen::MatrixXd estimate_memberships(const SvdFactors<double>& factors, const std::vector<Index>& vertices,
                                     double* condition = nullptr);

// Negative entries clipped to 0, rows rescaled to sum 1. A row with no
// positive entry becomes uniform and is reported through `degenerate`.
Eigen::MatrixXd postprocess_memberships(const Eigen::MatrixXd& raw, std::vector<Index>* degenerate = nullptr);

// V Lambda (U_{S,:})^T.
Eigen::MatrixXd estimate_item_params(const SvdFactors<double>& factors, const std::vector<Index>& vertices);

// Bernoulli and binomial: clip to [0, 1]. Polytomous: clip, then rescale every
// (item block, profile) slice to sum 1. Poisson: values below epsilon become
// epsilon.
Eigen::MatrixXd postprocess_item_params(const Eigen::MatrixXd& raw, DataFamily family,
                                        const BlockPartition& partition, double epsilon = kDefaultPoissonFloor);

// SVD, pruning, SPA, closed-form estimates and post-processing.
GomEstimate fit(const FlatMatrix& data, Index k, const FitConfig& cfg = {});

}  // namespace ggom

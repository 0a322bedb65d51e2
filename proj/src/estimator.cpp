#include "ggom/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "ggom/errors.hpp"

namespace ggom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::MatrixXd vertex_block(const Eigen::MatrixXd& u, const std::vector<Index>& vertices) {
  const auto k = static_cast<Index>(vertices.size());
  if (k != u.cols()) {
    throw ValidationError("expected " + std::to_string(u.cols()) + " vertices, got " + std::to_string(k));
  }
  Eigen::MatrixXd block(k, k);
  for (Index r = 0; r < k; ++r) {
    if (vertices[r] < 0 || vertices[r] >= u.rows()) throw ValidationError("vertex index out of range");
    block.row(r) = u.row(vertices[r]);
  }
  return block;
}

}  // namespace

Eigen::MatrixXd estimate_memberships(const SvdFactors<double>& factors, const std::vector<Index>& vertices,
                                     double* condition) {
  const Eigen::MatrixXd block = vertex_block(factors.U, vertices);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(block).singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (condition != nullptr) *condition = cond;
  if (!(cond <= kMaxVertexCondition)) {
    throw NumericalError("vertex block U_S is near-singular (condition number " + std::to_string(cond) + ")");
  }
  // Pi = U B^{-1}  <=>  B^T Pi^T = U^T
  Eigen::MatrixXd pi = block.transpose().fullPivLu().solve(factors.U.transpose()).transpose();
  for (std::size_t r = 0; r < vertices.size(); ++r) {
    pi.row(vertices[r]).setZero();
    pi(vertices[r], static_cast<Index>(r)) = 1.0;
  }
  return pi;
}

Eigen::MatrixXd postprocess_memberships(const Eigen::MatrixXd& raw, std::vector<Index>* degenerate) {
  Eigen::MatrixXd out = raw.cwiseMax(0.0);
  const auto k = static_cast<double>(raw.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0.0) {
      out.row(i) /= s;
    } else {
      out.row(i).setConstant(1.0 / k);
      if (degenerate != nullptr) degenerate->push_back(i);
    }
  }
  return out;
}

Eigen::MatrixXd estimate_item_params(const SvdFactors<double>& factors, const std::vector<Index>& vertices) {
  const Eigen::MatrixXd block = vertex_block(factors.U, vertices);
  return factors.V * factors.singular_values.asDiagonal() * block.transpose();
}

Eigen::MatrixXd postprocess_item_params(const Eigen::MatrixXd& raw, DataFamily family,
                                        const BlockPartition& partition, double epsilon) {
  switch (family) {
    case DataFamily::kPoisson:
      if (!(epsilon > 0.0)) throw UsageError("poisson floor epsilon must be positive");
      return raw.cwiseMax(epsilon);
    case DataFamily::kBernoulli:
    case DataFamily::kBinomial:
      return raw.cwiseMax(0.0).cwiseMin(1.0);
    case DataFamily::kPolytomous:
      break;
  }
  if (partition.num_columns() != raw.rows()) {
    throw ValidationError("partition covers " + std::to_string(partition.num_columns()) +
                          " columns but item matrix has " + std::to_string(raw.rows()) + " rows");
  }
  Eigen::MatrixXd out = raw.cwiseMax(0.0).cwiseMin(1.0);
  for (Index l = 0; l < partition.num_blocks(); ++l) {
    for (Index k = 0; k < out.cols(); ++k) {
      auto slice = out.col(k).segment(partition.begin(l), partition.size(l));
      const double s = slice.sum();
      if (!(s > 0.0)) {
        throw NumericalError("item " + std::to_string(l + 1) + " profile " + std::to_string(k + 1) +
                             " has no positive probability after clipping");
      }
      slice /= s;
    }
  }
  return out;
}

GomEstimate fit(const FlatMatrix& data, Index k, const FitConfig& cfg) {
  const auto start = Clock::now();
  const Index n = data.rows();
  const Index j = data.cols();
  if (k < 1 || k > std::min(n, j)) {
    throw ValidationError("K = " + std::to_string(k) + " outside [1, min(N, J) = " +
                          std::to_string(std::min(n, j)) + "]");
  }
  cfg.prune.check();
  if (cfg.check_input) {
    if (const auto report = validate(data); !report.ok()) throw ValidationError("invalid data: " + report.summary());
  }

  GomEstimate est;
  est.family = data.family;
  est.partition = data.partition;

  auto t = Clock::now();
  est.factors = truncated_svd(data.values, k, cfg.svd);
  est.diagnostics.seconds_svd = seconds_since(t);
  est.diagnostics.gap_warning = est.factors.gap_warning;

  t = Clock::now();
  est.vertices = hunt_vertices(est.factors.U, cfg.prune);
  est.diagnostics.seconds_vertices = seconds_since(t);
  for (Index v : est.vertices.indices) {
    if (std::binary_search(est.vertices.pruned.begin(), est.vertices.pruned.end(), v)) {
      throw NumericalError("internal error: SPA selected pruned row " + std::to_string(v + 1));
    }
  }

  t = Clock::now();
  est.memberships_raw = estimate_memberships(est.factors, est.vertices.indices, &est.diagnostics.vertex_condition);
  est.memberships = postprocess_memberships(est.memberships_raw, &est.diagnostics.degenerate_rows);
  est.item_params_raw = estimate_item_params(est.factors, est.vertices.indices);
  est.item_params = postprocess_item_params(est.item_params_raw, data.family, data.partition, cfg.epsilon);
  est.diagnostics.seconds_estimate = seconds_since(t);
  est.diagnostics.seconds_total = seconds_since(start);
  return est;
}

}  // namespace ggom

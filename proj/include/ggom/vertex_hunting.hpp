#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ggom/errors.hpp"

namespace ggom {

// Pruning of isolated high-norm rows before vertex hunting.
struct PruneConfig {
  Eigen::Index r = 10;  // neighbours averaged in the isolation score
  double q = 0.4;       // fraction of highest-norm rows eligible for pruning
  double e = 0.2;       // relative excess over the median score that triggers pruning

  void check() const {
    if (r < 1) throw UsageError("prune: r must be >= 1");
    if (!(q > 0.0 && q < 1.0)) throw UsageError("prune: q must lie in (0, 1)");
    if (!(e >= 0.0)) throw UsageError("prune: e must be >= 0");
  }

  // e = +inf never prunes.
  static PruneConfig disabled() { return PruneConfig{10, 0.4, std::numeric_limits<double>::infinity()}; }
};

// At most this fraction of rows is ever pruned.
inline constexpr double kMaxPrunedFraction = 0.2;
inline constexpr double kZeroNormTolerance = 1e-12;

struct VertexResult {
  std::vector<Eigen::Index> indices;  // selection order
  std::vector<Eigen::Index> pruned;   // sorted
};

namespace detail {

// Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace detail

// Rows of U whose norm is in the top q fraction and whose mean distance to
// their r nearest neighbours exceeds (1 + e) times the median of that score
// over the top-q rows. Returns sorted row indices.
template <typename Derived>
std::vector<Eigen::Index> prune(const Eigen::MatrixBase<Derived>& u, const PruneConfig& cfg) {
  using Eigen::Index;
  cfg.check();
  const Index n = u.rows();
  if (n <= u.cols()) throw ValidationError("prune: need more rows than columns");
  if (cfg.r >= n) throw ValidationError("prune: r = " + std::to_string(cfg.r) + " must be below N = " + std::to_string(n));
  if (std::isinf(cfg.e)) return {};

  std::vector<double> norms(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) norms[i] = static_cast<double>(u.row(i).norm());
  const double cut = detail::quantile(norms, 1.0 - cfg.q);

  std::vector<Index> top;
  for (Index i = 0; i < n; ++i) {
    if (norms[i] > cut) top.push_back(i);
  }
  if (top.empty()) return {};

  std::vector<double> score(top.size());
  std::vector<double> dist(static_cast<std::size_t>(n - 1));
  for (std::size_t t = 0; t < top.size(); ++t) {
    const Index i = top[t];
    std::size_t m = 0;
    for (Index j = 0; j < n; ++j) {
      if (j != i) dist[m++] = static_cast<double>((u.row(i) - u.row(j)).norm());
    }
    std::partial_sort(dist.begin(), dist.begin() + cfg.r, dist.end());
    score[t] = std::accumulate(dist.begin(), dist.begin() + cfg.r, 0.0) / static_cast<double>(cfg.r);
  }
  const double threshold = (1.0 + cfg.e) * detail::median(score);

  std::vector<std::size_t> flagged;
  for (std::size_t t = 0; t < top.size(); ++t) {
    if (score[t] > threshold) flagged.push_back(t);
  }
  const auto cap = static_cast<std::size_t>(std::floor(kMaxPrunedFraction * static_cast<double>(n)));
  if (flagged.size() > cap) {
    std::stable_sort(flagged.begin(), flagged.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    flagged.resize(cap);
  }
  std::vector<Index> pruned;
  pruned.reserve(flagged.size());
  for (auto t : flagged) pruned.push_back(top[t]);
  std::sort(pruned.begin(), pruned.end());
  return pruned;
}

// Successive projection: pick the candidate row of largest norm, project all
// rows onto its orthogonal complement, repeat K times. Ties go to the lowest
// index.
template <typename Derived>
VertexResult spa(const Eigen::MatrixBase<Derived>& y_in, Eigen::Index k, const std::vector<Eigen::Index>& candidates) {
  using Eigen::Index;
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  if (y_in.cols() != k) {
    throw ValidationError("spa: input has " + std::to_string(y_in.cols()) + " columns, expected K = " + std::to_string(k));
  }
  if (static_cast<Index>(candidates.size()) < k) {
    throw ValidationError("spa: " + std::to_string(candidates.size()) + " candidates for K = " + std::to_string(k));
  }
  for (Index c : candidates) {
    if (c < 0 || c >= y_in.rows()) throw ValidationError("spa: candidate index out of range");
  }
  std::vector<Index> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  Matrix y = y_in;
  VertexResult out;
  for (Index step = 0; step < k; ++step) {
    Index best = -1;
    Scalar best_norm = -1;
    for (Index i : sorted) {
      const Scalar nrm = y.row(i).norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = i;
      }
    }
    if (best_norm < Scalar(kZeroNormTolerance)) {
      throw NumericalError("spa: residual rows vanish after " + std::to_string(step) + " of " + std::to_string(k) +
                           " selections");
    }
    out.indices.push_back(best);
    const RowVector dir = y.row(best) / best_norm;
    y -= (y * dir.transpose()) * dir;
  }
  return out;
}

// Prune, then run SPA over the surviving rows.
template <typename Derived>
VertexResult hunt_vertices(const Eigen::MatrixBase<Derived>& u, const PruneConfig& cfg) {
  using Eigen::Index;
  const Index k = u.cols();
  std::vector<Index> pruned;
  if (u.rows() > k && cfg.r < u.rows()) {
    pruned = prune(u, cfg);
  } else {
    cfg.check();
  }
  std::vector<Index> candidates;
  candidates.reserve(static_cast<std::size_t>(u.rows()));
  std::size_t p = 0;
  for (Index i = 0; i < u.rows(); ++i) {
    if (p < pruned.size() && pruned[p] == i) {
      ++p;
      continue;
    }
    candidates.push_back(i);
  }
  VertexResult result = spa(u, k, candidates);
  result.pruned = std::move(pruned);
  return result;
}

}  // namespace ggom

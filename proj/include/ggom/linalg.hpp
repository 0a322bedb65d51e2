#pragma once

// Truncated SVD of dense data matrices.
//
// truncated_svd uses a randomized range finder (Halko, Martinsson & Tropp,
// Alg. 4.4) for large inputs and a one-sided Jacobi SVD otherwise. All
// randomness comes from a fixed seed, so identical inputs give bitwise
// identical factors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "ggom/errors.hpp"

namespace ggom {

template <typename Scalar>
struct SvdFactors {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix U;                // N x K
  Vector singular_values;  // nonincreasing
  Matrix V;                // J x K

  // sigma_{K+1} when it was computed (exact on the dense path, a lower
  // estimate from the sketch on the randomized path), NaN otherwise.
  Scalar next_singular_value = std::numeric_limits<Scalar>::quiet_NaN();
  // Set when sigma_K - sigma_{K+1} <= 1e-6 sigma_1; subspaces are then not
  // uniquely determined.
  bool gap_warning = false;

  Eigen::Index rank() const { return singular_values.size(); }
  Matrix reconstruct() const { return U * singular_values.asDiagonal() * V.transpose(); }
};

struct SvdOptions {
  Eigen::Index oversampling = 10;
  int power_iterations = 2;
  // Inputs with min(N, J) at or below this go straight to the dense SVD.
  Eigen::Index dense_threshold = 64;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

inline constexpr Eigen::Index kDenseOracleLimit = 500;
inline constexpr double kGapTolerance = 1e-6;

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string(what) + ": matrix has non-finite entries");
}

template <typename Matrix>
Matrix thin_q(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

// Flip column signs so the first nonzero entry of every U column is positive.
template <typename Scalar>
void fix_signs(SvdFactors<Scalar>& f) {
  for (Eigen::Index k = 0; k < f.U.cols(); ++k) {
    auto col = f.U.col(k);
    const Scalar cutoff = col.cwiseAbs().maxCoeff() * Scalar(1e-10);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > cutoff) {
        if (col(i) < 0) {
          col = -col;
          f.V.col(k) = -f.V.col(k);
        }
        break;
      }
    }
  }
}

template <typename Scalar>
void set_gap_flag(SvdFactors<Scalar>& f) {
  const auto k = f.rank();
  if (k == 0 || std::isnan(f.next_singular_value)) return;
  const Scalar s1 = f.singular_values(0);
  f.gap_warning = f.singular_values(k - 1) - f.next_singular_value <= Scalar(kGapTolerance) * s1;
}

// Full Jacobi SVD, sorted, with all min(N, J) triplets.
template <typename Derived>
SvdFactors<typename Derived::Scalar> jacobi_svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename SvdFactors<Scalar>::Matrix;
  SvdFactors<Scalar> f;
  Eigen::JacobiSVD<Matrix> svd(m.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  f.U = svd.matrixU();
  f.singular_values = svd.singularValues();
  f.V = svd.matrixV();
  return f;
}

template <typename Scalar>
SvdFactors<Scalar> leading(SvdFactors<Scalar> full, Eigen::Index k) {
  SvdFactors<Scalar> f;
  if (full.rank() > k) f.next_singular_value = full.singular_values(k);
  f.U = full.U.leftCols(k);
  f.singular_values = full.singular_values.head(k);
  f.V = full.V.leftCols(k);
  return f;
}

}  // namespace detail

// Full dense SVD for small matrices (min(N, J) <= 500). Serves as the exact
// reference for truncated_svd.
template <typename Derived>
SvdFactors<typename Derived::Scalar> dense_svd_oracle(const Eigen::MatrixBase<Derived>& m) {
  if (std::min(m.rows(), m.cols()) > kDenseOracleLimit) {
    throw ValidationError("dense_svd_oracle: min(N, J) = " + std::to_string(std::min(m.rows(), m.cols())) +
                          " exceeds the limit of " + std::to_string(kDenseOracleLimit));
  }
  detail::require_finite(m, "dense_svd_oracle");
  auto f = detail::jacobi_svd(m);
  detail::fix_signs(f);
  return f;
}

// Top-K singular triplets of m.
template <typename Derived>
SvdFactors<typename Derived::Scalar> truncated_svd(const Eigen::MatrixBase<Derived>& m, Eigen::Index k,
                                                   const SvdOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename SvdFactors<Scalar>::Matrix;
  const Eigen::Index n = m.rows();
  const Eigen::Index j = m.cols();
  const Eigen::Index min_dim = std::min(n, j);
  if (k < 1 || k > min_dim) {
    throw ValidationError("truncated_svd: rank K = " + std::to_string(k) + " outside [1, " +
                          std::to_string(min_dim) + "]");
  }
  detail::require_finite(m, "truncated_svd");

  SvdFactors<Scalar> f;
  const Eigen::Index sketch = std::min(k + opts.oversampling, min_dim);
  if (min_dim <= opts.dense_threshold || sketch == min_dim) {
    f = detail::leading(detail::jacobi_svd(m), k);
  } else {
    std::mt19937_64 gen(opts.seed);
    std::normal_distribution<double> normal;
    Matrix omega(j, sketch);
    for (Eigen::Index c = 0; c < sketch; ++c) {
      for (Eigen::Index r = 0; r < j; ++r) omega(r, c) = static_cast<Scalar>(normal(gen));
    }
    Matrix q = detail::thin_q<Matrix>(m * omega);
    for (int it = 0; it < opts.power_iterations; ++it) {
      Matrix z = detail::thin_q<Matrix>(m.transpose() * q);
      q = detail::thin_q<Matrix>(m * z);
    }
    // B^T = M^T Q is J x sketch (tall), which Jacobi handles efficiently.
    Matrix bt = m.transpose() * q;
    auto small = detail::jacobi_svd(bt);
    SvdFactors<Scalar> full;
    full.U = q * small.V;
    full.singular_values = small.singular_values;
    full.V = small.U;
    f = detail::leading(std::move(full), k);
  }
  detail::fix_signs(f);
  detail::set_gap_flag(f);
  return f;
}

// Largest singular value by power iteration on M^T M from a fixed-seed start.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m, std::uint64_t seed = 7,
                                       int max_iterations = 100000) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  detail::require_finite(m, "spectral_norm");
  if (m.size() == 0) return Scalar(0);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Vector x(m.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = static_cast<Scalar>(normal(gen));
  x.normalize();
  Scalar sigma = 0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector y = m * x;
    const Scalar next = y.norm();
    if (next == Scalar(0)) return Scalar(0);
    x = m.transpose() * y;
    x.normalize();
    if (std::abs(next - sigma) <= Scalar(1e-14) * next) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace ggom

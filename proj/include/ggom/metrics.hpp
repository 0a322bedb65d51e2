#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ggom/data_model.hpp"
#include "ggom/errors.hpp"
#include "ggom/linalg.hpp"

namespace ggom {

// A column permutation P stored as an index map: column k of B P is column
// perm[k] of B.
using Permutation = std::vector<Index>;

namespace detail {

template <typename DA, typename DB>
void require_same_shape(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

}  // namespace detail

// ||A - B||_{2,inf}: the largest row-wise Euclidean norm.
template <typename DA, typename DB>
typename DA::Scalar l2inf(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "l2inf");
  if (a.size() == 0) return 0;
  return (a - b).rowwise().norm().maxCoeff();
}

// ||A - B||_inf over entries.
template <typename DA, typename DB>
typename DA::Scalar maxabs(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "maxabs");
  if (a.size() == 0) return 0;
  return (a - b).cwiseAbs().maxCoeff();
}

template <typename DA, typename DB>
typename DA::Scalar mae(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "mae");
  if (a.size() == 0) return 0;
  return (a - b).cwiseAbs().mean();
}

// (NJ)^{-1/2} ||R* - Pi Theta^T||_F
double scaled_frobenius(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& memberships,
                        const Eigen::MatrixXd& item_params);

// Exact minimum-cost assignment (Hungarian method) on a square cost matrix;
// result[r] is the column assigned to row r.
std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost);

// The P minimizing sum_k ||A_{:,k} - (B P)_{:,k}||_1.
Permutation align_permutation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

Eigen::MatrixXd permute_columns(const Eigen::MatrixXd& b, const Permutation& perm);

struct AlignedError {
  Permutation permutation;
  double l2inf_pi = 0.0;
  double maxabs_theta = 0.0;
  double mae_pi = 0.0;
  double mae_theta = 0.0;
  double frob_scaled = 0.0;

  std::vector<std::pair<std::string, double>> named() const;
};

// Aligns truth profiles to the estimate using the membership matrices, then
// evaluates all error metrics under that permutation.
AlignedError aligned_error(const ModelParams& truth, const Eigen::MatrixXd& memberships,
                           const Eigen::MatrixXd& item_params);

struct Incoherence {
  double mu1 = 0.0;
  double mu2 = 0.0;
};

// mu1 = (N/K) ||U*||_{2,inf}^2, mu2 = (J/K) ||V*||_{2,inf}^2.
Incoherence incoherence(const Eigen::MatrixXd& u_star, const Eigen::MatrixXd& v_star);

// Sample covariance over rows of columns [begin, end) of R - Pi Theta^T.
Eigen::MatrixXd residual_covariance(const Eigen::MatrixXd& data, const Eigen::MatrixXd& memberships,
                                    const Eigen::MatrixXd& item_params, Index begin, Index end);

// Mean |entry| of a covariance matrix split into within-block and
// between-block off-diagonal entries.
struct BlockContrast {
  double within = 0.0;
  double between = 0.0;
};
BlockContrast block_contrast(const Eigen::MatrixXd& cov, Index block_size);

// Standard normal CDF and bivariate normal CDF P(X <= x, Y <= y) with
// correlation rho.
double normal_cdf(double x);
double inverse_normal_cdf(double p);
double bivariate_normal_cdf(double x, double y, double rho);

// Noise scales of a generator: sigma^2 = max Var(E_ij), sigma_tilde^2 = max
// over (subject, block) of ||Cov(E_{i,S_l})||, B bounds |E_ij|, M is the
// largest block.
struct NoiseScales {
  double sigma = 0.0;
  double sigma_tilde = 0.0;
  double bound = 0.0;
  Index max_block = 1;
};

// Closed-form scales for the simulation generators. `rho` is the AR
// parameter of the Gaussian copula (bernoulli family with blocks).
NoiseScales noise_scales(const ModelParams& truth, double rho = 0.0);

struct BoundReport {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double kappa_star = 0.0;
  double sigma_star_k = 0.0;
  double sigma = 0.0;
  double sigma_tilde = 0.0;
  double bound = 0.0;
  Index max_block = 1;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double xi3 = 0.0;
  double empirical_u = 0.0;     // ||U U^T U* - U*||_{2,inf}
  double empirical_v = 0.0;     // ||V V^T V* - V*||_{2,inf}
  double empirical_mean = 0.0;  // ||U Lambda V^T - R*||_inf
  double ratio_u = 0.0;
  double ratio_v = 0.0;
  double ratio_mean = 0.0;

  std::vector<std::pair<std::string, double>> named() const;
};

// Evaluates the two-to-infinity perturbation bounds with all absolute
// constants set to 1, alongside the realized perturbations of `observed`.
BoundReport theory_bounds(const ModelParams& truth, const NoiseScales& noise, const SvdFactors<double>& observed);

}  // namespace ggom

#include "ggom/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace ggom {

double scaled_frobenius(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& memberships,
                        const Eigen::MatrixXd& item_params) {
  if (memberships.cols() != item_params.cols() || mean.rows() != memberships.rows() ||
      mean.cols() != item_params.rows()) {
    throw ValidationError("scaled_frobenius: shape mismatch");
  }
  if (mean.size() == 0) return 0.0;
  const double nj = static_cast<double>(mean.rows()) * static_cast<double>(mean.cols());
  return (mean - memberships * item_params.transpose()).norm() / std::sqrt(nj);
}

std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw ValidationError("solve_assignment: cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Potentials formulation with 1-based sentinels at index 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> owner(n + 1, 0), way(n + 1, 0);
  for (Index row = 1; row <= n; ++row) {
    owner[0] = row;
    Index col0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const Index row0 = owner[col0];
      double delta = kInf;
      Index col1 = 0;
      for (Index col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (Index col = 0; col <= n; ++col) {
        if (used[col]) {
          u[owner[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const Index col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<Index> assignment(n);
  for (Index col = 1; col <= n; ++col) assignment[owner[col] - 1] = col - 1;
  return assignment;
}

Permutation align_permutation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  detail::require_same_shape(a, b, "align_permutation");
  const Index k = a.cols();
  Eigen::MatrixXd cost(k, k);
  for (Index r = 0; r < k; ++r) {
    for (Index c = 0; c < k; ++c) cost(r, c) = (a.col(r) - b.col(c)).lpNorm<1>();
  }
  return solve_assignment(cost);
}

Eigen::MatrixXd permute_columns(const Eigen::MatrixXd& b, const Permutation& perm) {
  if (static_cast<Index>(perm.size()) != b.cols()) throw ValidationError("permute_columns: size mismatch");
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Index k = 0; k < b.cols(); ++k) out.col(k) = b.col(perm[k]);
  return out;
}

std::vector<std::pair<std::string, double>> AlignedError::named() const {
  return {{"l2inf_pi", l2inf_pi},
          {"maxabs_theta", maxabs_theta},
          {"mae_pi", mae_pi},
          {"mae_theta", mae_theta},
          {"frob_scaled", frob_scaled}};
}

AlignedError aligned_error(const ModelParams& truth, const Eigen::MatrixXd& memberships,
                           const Eigen::MatrixXd& item_params) {
  detail::require_same_shape(memberships, truth.memberships, "aligned_error (memberships)");
  detail::require_same_shape(item_params, truth.item_params, "aligned_error (item_params)");
  AlignedError err;
  err.permutation = align_permutation(memberships, truth.memberships);
  const Eigen::MatrixXd pi_star = permute_columns(truth.memberships, err.permutation);
  const Eigen::MatrixXd theta_star = permute_columns(truth.item_params, err.permutation);
  err.l2inf_pi = l2inf(memberships, pi_star);
  err.maxabs_theta = maxabs(item_params, theta_star);
  err.mae_pi = mae(memberships, pi_star);
  err.mae_theta = mae(item_params, theta_star);
  err.frob_scaled = scaled_frobenius(truth.mean(), memberships, item_params);
  return err;
}

Incoherence incoherence(const Eigen::MatrixXd& u_star, const Eigen::MatrixXd& v_star) {
  if (u_star.cols() != v_star.cols() || u_star.cols() == 0) throw ValidationError("incoherence: rank mismatch");
  const Index k = u_star.cols();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
  if ((u_star.transpose() * u_star - eye).cwiseAbs().maxCoeff() > 1e-8 ||
      (v_star.transpose() * v_star - eye).cwiseAbs().maxCoeff() > 1e-8) {
    throw ValidationError("incoherence: singular vectors are not orthonormal");
  }
  const double kd = static_cast<double>(k);
  return {static_cast<double>(u_star.rows()) / kd * u_star.rowwise().squaredNorm().maxCoeff(),
          static_cast<double>(v_star.rows()) / kd * v_star.rowwise().squaredNorm().maxCoeff()};
}

Eigen::MatrixXd residual_covariance(const Eigen::MatrixXd& data, const Eigen::MatrixXd& memberships,
                                    const Eigen::MatrixXd& item_params, Index begin, Index end) {
  if (begin < 0 || end > data.cols() || begin >= end) {
    throw ValidationError("residual_covariance: empty or out-of-range column range [" + std::to_string(begin) +
                          ", " + std::to_string(end) + ")");
  }
  if (data.rows() < 2) throw ValidationError("residual_covariance: need at least two rows");
  const Eigen::MatrixXd resid =
      data.middleCols(begin, end - begin) - memberships * item_params.middleRows(begin, end - begin).transpose();
  const Eigen::MatrixXd centered = resid.rowwise() - resid.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(data.rows() - 1);
}

BlockContrast block_contrast(const Eigen::MatrixXd& cov, Index block_size) {
  double within = 0.0, between = 0.0;
  Index n_within = 0, n_between = 0;
  for (Index a = 0; a < cov.rows(); ++a) {
    for (Index b = 0; b < cov.cols(); ++b) {
      if (a == b) continue;
      if (a / block_size == b / block_size) {
        within += std::abs(cov(a, b));
        ++n_within;
      } else {
        between += std::abs(cov(a, b));
        ++n_between;
      }
    }
  }
  return {n_within ? within / static_cast<double>(n_within) : 0.0,
          n_between ? between / static_cast<double>(n_between) : 0.0};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("inverse_normal_cdf: p must lie in (0, 1)");
  // Acklam's rational approximation (relative error 1.15e-9) ...
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01,  -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // ... polished by one Halley step against erfc.
  const double e = (p <= 0.5) ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

namespace {

// Gauss-Legendre nodes (negative half) and weights for 6, 12 and 20 points.
constexpr std::array<std::array<double, 10>, 3> kGlWeights{{
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
    {0.04717533638651177, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659, 0.2334925365383547,
     0.2491470458134029},
    {0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475, 0.1019301198172404,
     0.1181945319615184, 0.1316886384491766, 0.1420961093183821, 0.1491729864726037, 0.1527533871307259},
}};
constexpr std::array<std::array<double, 10>, 3> kGlNodes{{
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171, -0.3678314989981802,
     -0.1252334085114692},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188, -0.7463319064601508,
     -0.6360536807265150, -0.5108670019508271, -0.3737060887154196, -0.2277858511416451, -0.07652652113349733},
}};

// Upper orthant probability P(X > h, Y > k) (Drezner-Wesolowsky as refined
// by Genz).
double upper_orthant(double h, double k, double r) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::size_t ng = 0, lg = 3;
  if (std::abs(r) >= 0.3) {
    ng = 1;
    lg = 6;
  }
  if (std::abs(r) >= 0.75) {
    ng = 2;
    lg = 10;
  }
  const auto& w = kGlWeights[ng];
  const auto& x = kGlNodes[ng];
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + normal_cdf(-h) * normal_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * normal_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < lg; ++i) {
      for (double sign : {1.0, -1.0}) {
        const double t = a * (sign * x[i] + 1.0);
        const double xs = t * t;
        const double rs = std::sqrt(1.0 - xs);
        const double asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          bvn += a * w[i] * std::exp(asr) *
                 (std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) return bvn + normal_cdf(-std::max(h, k));
  return -bvn + std::max(0.0, normal_cdf(-h) - normal_cdf(-k));
}

double max_block_eigenvalue(const Eigen::MatrixXd& cov) {
  if (cov.rows() == 1) return cov(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

double bivariate_normal_cdf(double x, double y, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("bivariate_normal_cdf: |rho| must be <= 1");
  return upper_orthant(-x, -y, rho);
}

NoiseScales noise_scales(const ModelParams& truth, double rho) {
  const Eigen::MatrixXd mean = truth.mean();
  const BlockPartition partition =
      truth.partition.num_columns() == mean.cols() ? truth.partition : BlockPartition::singletons(mean.cols());
  NoiseScales s;
  s.max_block = partition.max_block();
  double var_max = 0.0;
  double block_max = 0.0;
  switch (truth.family) {
    case DataFamily::kPoisson: {
      const double rate_max = mean.maxCoeff();
      var_max = rate_max;
      block_max = rate_max;
      const double log_d = std::log(static_cast<double>(std::max(mean.rows(), mean.cols())));
      s.bound = std::max(1.0, rate_max) * log_d;
      break;
    }
    case DataFamily::kBinomial: {
      // Halved Binomial(2, p): variance p(1-p)/2, independent entries.
      var_max = (mean.array() * (1.0 - mean.array())).maxCoeff() / 2.0;
      block_max = var_max;
      s.bound = mean.array().max(1.0 - mean.array()).maxCoeff();
      break;
    }
    case DataFamily::kPolytomous:
    case DataFamily::kBernoulli: {
      var_max = (mean.array() * (1.0 - mean.array())).maxCoeff();
      s.bound = mean.array().max(1.0 - mean.array()).maxCoeff();
      const bool onehot = truth.family == DataFamily::kPolytomous;
      for (Index l = 0; l < partition.num_blocks(); ++l) {
        const Index b0 = partition.begin(l);
        const Index m = partition.size(l);
        Eigen::MatrixXd cov(m, m);
        for (Index i = 0; i < mean.rows(); ++i) {
          const Eigen::VectorXd p = mean.row(i).segment(b0, m).transpose();
          if (onehot) {
            cov = -p * p.transpose();
            cov.diagonal() += p;
          } else {
            for (Index a = 0; a < m; ++a) {
              cov(a, a) = p(a) * (1.0 - p(a));
              for (Index b = a + 1; b < m; ++b) {
                double c = 0.0;
                if (rho != 0.0) {
                  const double corr = std::pow(rho, static_cast<double>(b - a));
                  const double pa = std::clamp(p(a), 1e-12, 1.0 - 1e-12);
                  const double pb = std::clamp(p(b), 1e-12, 1.0 - 1e-12);
                  c = bivariate_normal_cdf(inverse_normal_cdf(pa), inverse_normal_cdf(pb), corr) - pa * pb;
                }
                cov(a, b) = c;
                cov(b, a) = c;
              }
            }
          }
          block_max = std::max(block_max, max_block_eigenvalue(cov));
        }
      }
      break;
    }
  }
  s.sigma = std::sqrt(std::max(0.0, var_max));
  s.sigma_tilde = std::sqrt(std::max(0.0, block_max));
  return s;
}

std::vector<std::pair<std::string, double>> BoundReport::named() const {
  return {{"mu1", mu1},
          {"mu2", mu2},
          {"kappa_star", kappa_star},
          {"sigma_star_k", sigma_star_k},
          {"sigma", sigma},
          {"sigma_tilde", sigma_tilde},
          {"B", bound},
          {"M", static_cast<double>(max_block)},
          {"xi1", xi1},
          {"xi2", xi2},
          {"xi3", xi3},
          {"empirical_u", empirical_u},
          {"empirical_v", empirical_v},
          {"empirical_mean", empirical_mean},
          {"ratio_u", ratio_u},
          {"ratio_v", ratio_v},
          {"ratio_mean", ratio_mean}};
}

BoundReport theory_bounds(const ModelParams& truth, const NoiseScales& noise, const SvdFactors<double>& observed) {
  const Eigen::MatrixXd mean = truth.mean();
  const Index k = truth.num_profiles();
  const auto n = static_cast<double>(mean.rows());
  const auto j = static_cast<double>(mean.cols());
  if (observed.rank() != k || observed.U.rows() != mean.rows() || observed.V.rows() != mean.cols()) {
    throw ValidationError("theory_bounds: observed factors do not match the model dimensions");
  }
  const auto star = truncated_svd(mean, k);
  if (!(star.singular_values(k - 1) > 1e-10 * star.singular_values(0))) {
    throw NumericalError("theory_bounds: mean matrix is rank deficient");
  }

  BoundReport rep;
  const auto inc = incoherence(star.U, star.V);
  rep.mu1 = inc.mu1;
  rep.mu2 = inc.mu2;
  rep.sigma_star_k = star.singular_values(k - 1);
  rep.kappa_star = star.singular_values(0) / rep.sigma_star_k;
  rep.sigma = noise.sigma;
  rep.sigma_tilde = noise.sigma_tilde;
  rep.bound = noise.bound;
  rep.max_block = noise.max_block;

  const double kd = static_cast<double>(k);
  const double m = static_cast<double>(noise.max_block);
  const double log_d = std::log(std::max(n, j));
  const double sk = rep.sigma_star_k;
  const double sk2 = sk * sk;
  const double row_u = std::sqrt(rep.mu1 * kd / n);
  const double row_v = std::sqrt(rep.mu2 * kd / j);
  const double sig = noise.sigma;
  const double sig2 = sig * sig;
  const double b = noise.bound;

  rep.xi1 = noise.sigma_tilde * std::sqrt(n * log_d) / sk * row_u + rep.kappa_star * sig2 * j / sk2 * row_u +
            sig * m * b * log_d * std::sqrt(m * n + j) / sk2 * row_v;
  rep.xi2 = sig * std::sqrt(j * log_d) / sk * row_v + rep.kappa_star * sig2 * m * n / sk2 * row_v +
            sig * b * log_d * std::sqrt(m * n + j) / sk2 * row_u;
  rep.xi3 = rep.kappa_star * kd * sig * log_d * std::sqrt(rep.mu1 * rep.mu2) * std::sqrt(m / j + 1.0 / n) +
            m * b * log_d * (rep.mu2 * kd / j + rep.mu1 * kd / (m * n));

  rep.empirical_u = (observed.U * (observed.U.transpose() * star.U) - star.U).rowwise().norm().maxCoeff();
  rep.empirical_v = (observed.V * (observed.V.transpose() * star.V) - star.V).rowwise().norm().maxCoeff();
  rep.empirical_mean = (observed.reconstruct() - mean).cwiseAbs().maxCoeff();

  const auto ratio = [](double emp, double bound) {
    return bound > 0.0 ? emp / bound : std::numeric_limits<double>::infinity();
  };
  rep.ratio_u = ratio(rep.empirical_u, rep.xi1);
  rep.ratio_v = ratio(rep.empirical_v, rep.xi2);
  rep.ratio_mean = ratio(rep.empirical_mean, rep.xi3);
  return rep;
}

}  // namespace ggom

#include "ggom/gibbs.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "ggom/errors.hpp"
#include "ggom/metrics.hpp"
#include "ggom/rng.hpp"

namespace ggom {

namespace {

void draw_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& concentration, CounterRng& rng,
                    Eigen::Ref<Eigen::VectorXd> out) {
  for (;;) {
    double total = 0.0;
    for (Index c = 0; c < concentration.size(); ++c) {
      std::gamma_distribution<double> gamma(concentration(c), 1.0);
      out(c) = gamma(rng);
      total += out(c);
    }
    if (total > 0.0) {
      out /= total;
      return;
    }
  }
}

double log_likelihood(const QuasiTensor& quasi, const BlockPartition& partition, const Eigen::MatrixXd& pi,
                      const Eigen::MatrixXd& theta) {
  double ll = 0.0;
  for (Index i = 0; i < quasi.num_subjects(); ++i) {
    for (Index l = 0; l < quasi.num_items(); ++l) {
      const Index row = partition.begin(l) + quasi.responses(i, l) - 1;
      ll += std::log(pi.row(i).dot(theta.row(row)));
    }
  }
  return ll;
}

}  // namespace

void GibbsConfig::check(Index k) const {
  if (k <= 0) throw UsageError("gibbs: K must be positive");
  if (alpha.size() != k) throw UsageError("gibbs: alpha must have K entries");
  if (beta.size() == 0) throw UsageError("gibbs: beta is empty");
  if ((alpha.array() <= 0.0).any() || (beta.array() <= 0.0).any()) {
    throw UsageError("gibbs: priors must be entrywise positive");
  }
  if (burnin < 0) throw UsageError("gibbs: burnin must be >= 0");
  if (samples < 1) throw UsageError("gibbs: samples must be >= 1");
}

GibbsEstimate gibbs_fit(const QuasiTensor& quasi, Index k, const GibbsConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.check(k);
  check(quasi);
  const Index n = quasi.num_subjects();
  const Index items = quasi.num_items();
  const BlockPartition partition = BlockPartition::from_sizes(quasi.category_counts);
  const Index j = partition.num_columns();

  std::vector<Eigen::VectorXd> item_beta(static_cast<std::size_t>(items));
  for (Index l = 0; l < items; ++l) {
    const Index c = partition.size(l);
    if (cfg.beta.size() == 1) {
      item_beta[l] = Eigen::VectorXd::Constant(c, cfg.beta(0));
    } else if (cfg.beta.size() == c) {
      item_beta[l] = cfg.beta;
    } else {
      throw UsageError("gibbs: beta has " + std::to_string(cfg.beta.size()) + " entries but item " +
                       std::to_string(l + 1) + " has " + std::to_string(c) + " categories");
    }
  }

  CounterRng rng(cfg.seed);
  Eigen::MatrixXd pi(n, k);
  Eigen::MatrixXd theta(j, k);
  Eigen::VectorXd buf;
  for (Index i = 0; i < n; ++i) {
    buf.resize(k);
    draw_dirichlet(cfg.alpha, rng, buf);
    pi.row(i) = buf.transpose();
  }
  for (Index l = 0; l < items; ++l) {
    buf.resize(partition.size(l));
    for (Index c = 0; c < k; ++c) {
      draw_dirichlet(item_beta[l], rng, buf);
      theta.col(c).segment(partition.begin(l), partition.size(l)) = buf;
    }
  }

  GibbsEstimate est;
  est.partition = partition;
  est.memberships = Eigen::MatrixXd::Zero(n, k);
  est.item_params = Eigen::MatrixXd::Zero(j, k);
  est.log_likelihood.reserve(static_cast<std::size_t>(cfg.burnin + cfg.samples));

  Eigen::MatrixXd subject_counts(n, k);  // sum_l Z_ilk
  Eigen::MatrixXd category_counts(j, k);  // sum_i R_ilc Z_ilk
  Eigen::VectorXd prob(k);
  Eigen::MatrixXd reference_pi;
  const int total = cfg.burnin + cfg.samples;
  for (int sweep = 0; sweep < total; ++sweep) {
    subject_counts.setZero();
    category_counts.setZero();
    for (Index i = 0; i < n; ++i) {
      for (Index l = 0; l < items; ++l) {
        const Index row = partition.begin(l) + quasi.responses(i, l) - 1;
        prob = theta.row(row).transpose().cwiseProduct(pi.row(i).transpose());
        const double z = prob.sum();
        prob /= z;
        est.max_assignment_error = std::max(est.max_assignment_error, std::abs(prob.sum() - 1.0));
        const double u = rng.uniform();
        double acc = 0.0;
        Index label = k - 1;
        for (Index c = 0; c < k; ++c) {
          acc += prob(c);
          if (u < acc) {
            label = c;
            break;
          }
        }
        subject_counts(i, label) += 1.0;
        category_counts(row, label) += 1.0;
      }
    }
    for (Index i = 0; i < n; ++i) {
      buf.resize(k);
      draw_dirichlet(cfg.alpha + subject_counts.row(i).transpose(), rng, buf);
      pi.row(i) = buf.transpose();
    }
    for (Index l = 0; l < items; ++l) {
      const Index b0 = partition.begin(l);
      const Index c = partition.size(l);
      buf.resize(c);
      for (Index p = 0; p < k; ++p) {
        draw_dirichlet(item_beta[l] + category_counts.col(p).segment(b0, c), rng, buf);
        theta.col(p).segment(b0, c) = buf;
      }
    }
    est.log_likelihood.push_back(log_likelihood(quasi, partition, pi, theta));

    if (sweep >= cfg.burnin) {
      if (sweep == cfg.burnin) {
        reference_pi = pi;
        est.memberships += pi;
        est.item_params += theta;
      } else {
        const Permutation perm = align_permutation(reference_pi, pi);
        est.memberships += permute_columns(pi, perm);
        est.item_params += permute_columns(theta, perm);
      }
    }
  }
  est.memberships /= static_cast<double>(cfg.samples);
  est.item_params /= static_cast<double>(cfg.samples);
  est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

}  // namespace ggom

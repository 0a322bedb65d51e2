#include "ggom/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "ggom/errors.hpp"
#include "ggom/metrics.hpp"

namespace ggom {

namespace {

// Stream ids under a replication seed.
constexpr std::uint64_t kMembershipStream = 1;
constexpr std::uint64_t kItemStream = 2;
constexpr std::uint64_t kDataStream = 3;

double draw_gamma(double shape, CounterRng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return gamma(rng);
}

void dirichlet_row(const Eigen::VectorXd& alpha, CounterRng& rng, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  for (;;) {
    double total = 0.0;
    for (Index k = 0; k < alpha.size(); ++k) {
      out(k) = draw_gamma(alpha(k), rng);
      total += out(k);
    }
    // With tiny concentrations every Gamma draw can underflow; redraw.
    if (total > 0.0) {
      out /= total;
      return;
    }
  }
}

double draw_beta(double a, double b, CounterRng& rng) {
  for (;;) {
    const double x = draw_gamma(a, rng);
    const double y = draw_gamma(b, rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

void check_memberships_items(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params) {
  if (memberships.cols() != item_params.cols()) {
    throw ValidationError("memberships have " + std::to_string(memberships.cols()) + " profiles, item parameters " +
                          std::to_string(item_params.cols()));
  }
}

}  // namespace

void SimScenario::check() const {
  if (subjects < 1 || profiles < 1) throw UsageError("scenario: N and K must be positive");
  if (static_cast<Index>(alpha.size()) != profiles) {
    throw UsageError("scenario: alpha has " + std::to_string(alpha.size()) + " entries, K = " +
                     std::to_string(profiles));
  }
  if (std::any_of(alpha.begin(), alpha.end(), [](double a) { return !(a > 0.0); })) {
    throw UsageError("scenario: alpha must be entrywise positive");
  }
  if (replications < 1) throw UsageError("scenario: replications must be >= 1");
  switch (family) {
    case DataFamily::kPolytomous:
      if (items < 1 || categories < 2) throw UsageError("scenario: polytomous needs items >= 1 and C >= 2");
      if (!(dirichlet_beta > 0.0)) throw UsageError("scenario: Dirichlet beta must be positive");
      if (rho != 0.0 || block_size != 1) {
        throw UsageError("scenario: rho and M apply to the bernoulli family only");
      }
      break;
    case DataFamily::kBernoulli:
      if (columns < 1) throw UsageError("scenario: J must be positive");
      if (!(beta_a > 0.0 && beta_b > 0.0)) throw UsageError("scenario: Beta parameters must be positive");
      if (block_size < 1 || columns % block_size != 0) {
        throw UsageError("scenario: J = " + std::to_string(columns) + " not divisible by M = " +
                         std::to_string(block_size));
      }
      if (!(rho > -1.0 && rho < 1.0)) throw UsageError("scenario: rho must lie in (-1, 1)");
      break;
    case DataFamily::kPoisson:
      if (columns < 1) throw UsageError("scenario: J must be positive");
      if (!(gamma_shape > 0.0 && gamma_rate > 0.0)) throw UsageError("scenario: Gamma parameters must be positive");
      if (rho != 0.0 || block_size != 1) throw UsageError("scenario: rho and M apply to the bernoulli family only");
      break;
    case DataFamily::kBinomial:
      throw UsageError("scenario: the binomial family has no simulation design");
  }
}

Index SimScenario::num_columns() const {
  return family == DataFamily::kPolytomous ? items * categories : columns;
}

Eigen::MatrixXd sample_dirichlet(const Eigen::VectorXd& alpha, Index n, CounterRng& rng) {
  if (alpha.size() == 0 || (alpha.array() <= 0.0).any() || !alpha.allFinite()) {
    throw ValidationError("sample_dirichlet: alpha must be entrywise positive");
  }
  Eigen::MatrixXd out(n, alpha.size());
  for (Index i = 0; i < n; ++i) dirichlet_row(alpha, rng, out.row(i));
  return out;
}

Eigen::MatrixXd gen_memberships(Index n, Index k, const Eigen::VectorXd& alpha, const CounterRng& rng,
                                bool random_placement) {
  if (n < k) throw ValidationError("gen_memberships: N = " + std::to_string(n) + " < K = " + std::to_string(k));
  if (alpha.size() != k) throw ValidationError("gen_memberships: alpha length differs from K");
  std::vector<Index> pure(static_cast<std::size_t>(k));
  std::iota(pure.begin(), pure.end(), Index{0});
  if (random_placement) {
    CounterRng placement = rng.split(static_cast<std::uint64_t>(n) + 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    for (Index t = 0; t < k; ++t) {
      std::uniform_int_distribution<Index> pick(t, n - 1);
      std::swap(rows[t], rows[pick(placement)]);
    }
    std::copy(rows.begin(), rows.begin() + k, pure.begin());
  }
  Eigen::MatrixXd pi(n, k);
  for (Index i = 0; i < n; ++i) {
    CounterRng row_rng = rng.split(static_cast<std::uint64_t>(i));
    dirichlet_row(alpha, row_rng, pi.row(i));
  }
  for (Index t = 0; t < k; ++t) {
    pi.row(pure[t]).setZero();
    pi(pure[t], t) = 1.0;
  }
  return pi;
}

Eigen::MatrixXd gen_item_params(const SimScenario& scenario, const CounterRng& rng) {
  scenario.check();
  const Index k = scenario.profiles;
  const Index j = scenario.num_columns();
  Eigen::MatrixXd theta(j, k);
  switch (scenario.family) {
    case DataFamily::kPolytomous: {
      const Eigen::VectorXd beta = Eigen::VectorXd::Constant(scenario.categories, scenario.dirichlet_beta);
      for (Index l = 0; l < scenario.items; ++l) {
        CounterRng item_rng = rng.split(static_cast<std::uint64_t>(l));
        const Eigen::MatrixXd tables = sample_dirichlet(beta, k, item_rng);  // K x C
        theta.middleRows(l * scenario.categories, scenario.categories) = tables.transpose();
      }
      break;
    }
    case DataFamily::kBernoulli:
      for (Index r = 0; r < j; ++r) {
        CounterRng row_rng = rng.split(static_cast<std::uint64_t>(r));
        for (Index c = 0; c < k; ++c) theta(r, c) = draw_beta(scenario.beta_a, scenario.beta_b, row_rng);
      }
      break;
    case DataFamily::kPoisson:
      for (Index r = 0; r < j; ++r) {
        CounterRng row_rng = rng.split(static_cast<std::uint64_t>(r));
        for (Index c = 0; c < k; ++c) theta(r, c) = draw_gamma(scenario.gamma_shape, row_rng) / scenario.gamma_rate;
      }
      break;
    case DataFamily::kBinomial:
      throw UsageError("gen_item_params: the binomial family has no simulation design");
  }
  return theta;
}

QuasiTensor gen_polytomous(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                           const BlockPartition& partition, const CounterRng& rng) {
  check_memberships_items(memberships, item_params);
  if (partition.num_columns() != item_params.rows()) {
    throw ValidationError("gen_polytomous: partition does not match item parameters");
  }
  QuasiTensor quasi;
  const Index n = memberships.rows();
  const Index items = partition.num_blocks();
  quasi.responses.resize(n, items);
  quasi.category_counts.resize(static_cast<std::size_t>(items));
  for (Index l = 0; l < items; ++l) quasi.category_counts[l] = static_cast<int>(partition.size(l));
  Eigen::VectorXd prob;
  for (Index i = 0; i < n; ++i) {
    CounterRng row_rng = rng.split(static_cast<std::uint64_t>(i));
    for (Index l = 0; l < items; ++l) {
      prob = item_params.middleRows(partition.begin(l), partition.size(l)) * memberships.row(i).transpose();
      if (std::abs(prob.sum() - 1.0) > 1e-9 || (prob.array() < 0.0).any()) {
        throw ValidationError("gen_polytomous: response probabilities for subject " + std::to_string(i + 1) +
                              ", item " + std::to_string(l + 1) + " are not a distribution");
      }
      const double u = row_rng.uniform() * prob.sum();
      double acc = 0.0;
      int choice = static_cast<int>(prob.size());
      for (Index c = 0; c < prob.size(); ++c) {
        acc += prob(c);
        if (u < acc) {
          choice = static_cast<int>(c) + 1;
          break;
        }
      }
      // Round-off can leave u just above the last partial sum; fall back to
      // the last category with positive probability.
      if (choice == static_cast<int>(prob.size())) {
        while (choice > 1 && prob(choice - 1) <= 0.0) --choice;
      }
      quasi.responses(i, l) = choice;
    }
  }
  return quasi;
}

FlatMatrix gen_block_dependent_binary(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                                      Index block_size, double rho, const CounterRng& rng, Index* clamped) {
  check_memberships_items(memberships, item_params);
  const Index n = memberships.rows();
  const Index j = item_params.rows();
  if (block_size < 1 || j % block_size != 0) {
    throw ValidationError("gen_block_dependent_binary: J = " + std::to_string(j) + " not divisible by M = " +
                          std::to_string(block_size));
  }
  if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("gen_block_dependent_binary: rho must lie in (-1, 1)");
  const Eigen::MatrixXd mean = memberships * item_params.transpose();
  constexpr double kClamp = 1e-12;
  Index n_clamped = 0;
  Eigen::MatrixXd threshold(n, j);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < j; ++c) {
      double p = mean(i, c);
      if (!(p >= -kClamp && p <= 1.0 + kClamp)) {
        throw ValidationError("gen_block_dependent_binary: mean " + std::to_string(p) + " at (" +
                              std::to_string(i + 1) + ", " + std::to_string(c + 1) + ") outside (0, 1)");
      }
      if (p < kClamp || p > 1.0 - kClamp) {
        p = std::clamp(p, kClamp, 1.0 - kClamp);
        ++n_clamped;
      }
      threshold(i, c) = inverse_normal_cdf(p);
    }
  }
  if (clamped != nullptr) *clamped = n_clamped;

  FlatMatrix flat;
  flat.family = DataFamily::kBernoulli;
  flat.partition = BlockPartition::uniform(j, block_size);
  flat.values.resize(n, j);
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (Index i = 0; i < n; ++i) {
    CounterRng row_rng = rng.split(static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal;
    for (Index b0 = 0; b0 < j; b0 += block_size) {
      // Lower Cholesky factor of the AR(1) correlation, applied recursively.
      double eta = 0.0;
      for (Index t = 0; t < block_size; ++t) {
        const double z = normal(row_rng);
        eta = t == 0 ? z : rho * eta + innovation * z;
        flat.values(i, b0 + t) = eta < threshold(i, b0 + t) ? 1.0 : 0.0;
      }
    }
  }
  return flat;
}

FlatMatrix gen_bernoulli(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                         const CounterRng& rng) {
  return gen_block_dependent_binary(memberships, item_params, 1, 0.0, rng);
}

FlatMatrix gen_poisson(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params, const CounterRng& rng) {
  check_memberships_items(memberships, item_params);
  const Eigen::MatrixXd rate = memberships * item_params.transpose();
  if ((rate.array() < 0.0).any() || !rate.allFinite()) throw ValidationError("gen_poisson: negative rate");
  FlatMatrix flat;
  flat.family = DataFamily::kPoisson;
  flat.partition = BlockPartition::singletons(rate.cols());
  flat.values.resize(rate.rows(), rate.cols());
  for (Index i = 0; i < rate.rows(); ++i) {
    CounterRng row_rng = rng.split(static_cast<std::uint64_t>(i));
    for (Index c = 0; c < rate.cols(); ++c) {
      const double lambda = rate(i, c);
      if (lambda == 0.0) {
        flat.values(i, c) = 0.0;
        continue;
      }
      std::poisson_distribution<long long> poisson(lambda);
      flat.values(i, c) = static_cast<double>(poisson(row_rng));
    }
  }
  return flat;
}

SimulatedData simulate(const SimScenario& scenario, int replication) {
  scenario.check();
  const CounterRng rng(scenario.replication_seed(replication));
  SimulatedData sim;
  sim.truth.family = scenario.family;
  const Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(scenario.alpha.data(),
                                                                  static_cast<Index>(scenario.alpha.size()));
  sim.truth.memberships = gen_memberships(scenario.subjects, scenario.profiles, alpha, rng.split(kMembershipStream),
                                          scenario.random_pure_placement);
  sim.truth.item_params = gen_item_params(scenario, rng.split(kItemStream));
  const CounterRng data_rng = rng.split(kDataStream);
  switch (scenario.family) {
    case DataFamily::kPolytomous:
      sim.truth.partition = BlockPartition::uniform(scenario.num_columns(), scenario.categories);
      sim.quasi = gen_polytomous(sim.truth.memberships, sim.truth.item_params, sim.truth.partition, data_rng);
      sim.data = flatten(*sim.quasi);
      break;
    case DataFamily::kBernoulli:
      sim.truth.partition = BlockPartition::uniform(scenario.columns, scenario.block_size);
      sim.data = gen_block_dependent_binary(sim.truth.memberships, sim.truth.item_params, scenario.block_size,
                                            scenario.rho, data_rng, &sim.clamped_means);
      break;
    case DataFamily::kPoisson:
      sim.truth.partition = BlockPartition::singletons(scenario.columns);
      sim.data = gen_poisson(sim.truth.memberships, sim.truth.item_params, data_rng);
      break;
    case DataFamily::kBinomial:
      throw UsageError("simulate: the binomial family has no simulation design");
  }
  return sim;
}

std::vector<ReplicationResult> run_replications(const SimScenario& scenario, const FitConfig& cfg, int jobs) {
  scenario.check();
  std::vector<ReplicationResult> results(static_cast<std::size_t>(scenario.replications));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < scenario.replications; rep = next++) {
      ReplicationResult& res = results[static_cast<std::size_t>(rep)];
      res.replication = rep;
      try {
        const SimulatedData sim = simulate(scenario, rep);
        const GomEstimate est = fit(sim.data, scenario.profiles, cfg);
        res.seconds = est.diagnostics.seconds_total;
        res.metrics = aligned_error(sim.truth, est.memberships, est.item_params).named();
        res.ok = true;
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, scenario.replications);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

}  // namespace ggom

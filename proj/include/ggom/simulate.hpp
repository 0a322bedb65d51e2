#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ggom/data_model.hpp"
#include "ggom/estimator.hpp"
#include "ggom/rng.hpp"

namespace ggom {

// One simulation design. For the polytomous family `items` is the number of
// categorical items (J = items * categories flattened columns); for the
// bernoulli and poisson families `columns` is J directly.
struct SimScenario {
  std::string name;
  DataFamily family = DataFamily::kPolytomous;
  Index subjects = 1000;
  Index items = 200;
  Index columns = 0;
  Index profiles = 3;
  int categories = 3;
  std::vector<double> alpha{1.0, 1.0, 1.0};
  double dirichlet_beta = 0.2;              // polytomous item tables
  double beta_a = 0.2, beta_b = 0.2;        // bernoulli item parameters
  double gamma_shape = 1.0, gamma_rate = 2.0;  // poisson rates
  Index block_size = 1;                     // bernoulli copula block size M
  double rho = 0.0;                         // bernoulli copula AR parameter
  int replications = 1;
  std::uint64_t seed = 1;
  bool random_pure_placement = false;

  void check() const;
  Index num_columns() const;
  std::uint64_t replication_seed(int replication) const { return seed ^ static_cast<std::uint64_t>(replication); }
};

// Rows of independent Dirichlet(alpha) draws built from Gamma(alpha_k, 1)
// variates.
Eigen::MatrixXd sample_dirichlet(const Eigen::VectorXd& alpha, Index n, CounterRng& rng);

// Memberships with one pure subject per profile. By default rows 0..K-1 are
// the identity; with random placement the K pure rows go to distinct random
// positions.
Eigen::MatrixXd gen_memberships(Index n, Index k, const Eigen::VectorXd& alpha, const CounterRng& rng,
                                bool random_placement = false);

// Item parameters for the scenario's family: flattened Dirichlet tables,
// Beta draws or Gamma rates. Returns a J x K matrix.
Eigen::MatrixXd gen_item_params(const SimScenario& scenario, const CounterRng& rng);

// Categorical responses with P(response = c) = sum_k pi_ik theta_{l,k,c}.
QuasiTensor gen_polytomous(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                           const BlockPartition& partition, const CounterRng& rng);

// Binary data R_ij = 1(eta_ij < Phi^{-1}(mean_ij)) where eta_i has
// block-diagonal AR(rho) correlation with blocks of size M. Means are clamped
// to [1e-12, 1 - 1e-12]; the number of clamped entries goes to `clamped`.
FlatMatrix gen_block_dependent_binary(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                                      Index block_size, double rho, const CounterRng& rng,
                                      Index* clamped = nullptr);

// Independent Bernoulli data; the same stream as the M = 1 copula generator.
FlatMatrix gen_bernoulli(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params,
                         const CounterRng& rng);

FlatMatrix gen_poisson(const Eigen::MatrixXd& memberships, const Eigen::MatrixXd& item_params, const CounterRng& rng);

struct SimulatedData {
  ModelParams truth;
  FlatMatrix data;
  std::optional<QuasiTensor> quasi;  // polytomous only
  Index clamped_means = 0;
};

// Fresh parameters and data for one replication of a scenario.
SimulatedData simulate(const SimScenario& scenario, int replication);

struct ReplicationResult {
  int replication = 0;
  bool ok = false;
  std::string error;
  std::vector<std::pair<std::string, double>> metrics;
  double seconds = 0.0;  // spectral fit wall time
};

// Runs every replication (in parallel over `jobs` threads) and returns
// results ordered by replication index. Failures are recorded, not thrown.
std::vector<ReplicationResult> run_replications(const SimScenario& scenario, const FitConfig& cfg, int jobs = 1);

}  // namespace ggom

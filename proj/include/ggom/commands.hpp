#pragma once

// Subcommand implementations behind the ggom executable. Each writes its
// outputs plus a manifest.json into an output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ggom/estimator.hpp"
#include "ggom/vertex_hunting.hpp"

namespace ggom::cli {

namespace fs = std::filesystem;

struct SimulateOptions {
  fs::path scenario;
  fs::path out_dir;
  int replication = 0;
  std::optional<std::uint64_t> seed;
};

struct FitOptions {
  fs::path data;
  fs::path categories;  // polytomous only
  Index k = 0;
  std::string family = "polytomous";
  std::string prune = "10,0.4,0.2";  // "r,q,e" or "off"
  double epsilon = kDefaultPoissonFloor;
  bool mean_matrix = false;  // input is a noiseless mean matrix, not data
  std::optional<std::uint64_t> seed;
  fs::path out_dir;
};

struct EvalOptions {
  fs::path estimate_dir;
  fs::path truth_dir;
  fs::path out_dir;  // defaults to estimate_dir/eval
  bool residual_cov = false;
  Index cov_columns = 50;
};

struct BenchOptions {
  fs::path suite;
  fs::path out_dir;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

struct GibbsOptions {
  fs::path data;
  fs::path categories;
  Index k = 0;
  int burnin = 5000;
  int samples = 2000;
  std::string alpha = "1";  // scalar or comma list of K values
  std::string beta = "1";   // scalar or comma list of C values
  std::optional<std::uint64_t> seed;
  fs::path out_dir;
};

PruneConfig parse_prune(const std::string& spec);

void cmd_simulate(const SimulateOptions& opts);
void cmd_fit(const FitOptions& opts);
void cmd_eval(const EvalOptions& opts);
void cmd_bench(const BenchOptions& opts);
void cmd_gibbs(const GibbsOptions& opts);

}  // namespace ggom::cli

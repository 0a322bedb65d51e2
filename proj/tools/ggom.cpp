#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>

#include "ggom/commands.hpp"
#include "ggom/errors.hpp"
#include "ggom/io.hpp"

namespace {

// --seed as an optional value: unset unless given on the command line.
struct SeedFlag {
  std::uint64_t value = 0;
  CLI::Option* option = nullptr;

  void add(CLI::App* app) { option = app->add_option("--seed", value, "RNG seed (GGOM_SEED overrides)"); }
  std::optional<std::uint64_t> get() const {
    return option != nullptr && option->count() > 0 ? std::optional(value) : std::nullopt;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace ggom::cli;
  CLI::App app{"Spectral estimation for generalized grade-of-membership models"};
  app.set_version_flag("--version", ggom::io::kVersion);
  app.require_subcommand(1);

  SimulateOptions sim;
  SeedFlag sim_seed;
  auto* simulate = app.add_subcommand("simulate", "Generate data and ground truth from a scenario file");
  simulate->add_option("scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("out_dir", sim.out_dir, "Output directory")->required();
  simulate->add_option("--replication", sim.replication, "Replication index");
  sim_seed.add(simulate);

  FitOptions fit;
  SeedFlag fit_seed;
  auto* fit_cmd = app.add_subcommand("fit", "Run the spectral estimator");
  fit_cmd->add_option("data", fit.data, "Data CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("out_dir", fit.out_dir, "Output directory")->required();
  fit_cmd->add_option("--categories", fit.categories, "Category counts (polytomous)")->check(CLI::ExistingFile);
  fit_cmd->add_option("--k", fit.k, "Number of extreme profiles")->required();
  fit_cmd->add_option("--family", fit.family, "polytomous, bernoulli, binomial or poisson")->capture_default_str();
  fit_cmd->add_option("--prune", fit.prune, "Pruning r,q,e or 'off'")->capture_default_str();
  fit_cmd->add_option("--epsilon", fit.epsilon, "Floor for Poisson rates")->capture_default_str();
  fit_cmd->add_flag("--mean-matrix", fit.mean_matrix, "Input is a noiseless mean matrix (skips data validation)");
  fit_seed.add(fit_cmd);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare an estimate against ground truth");
  eval_cmd->add_option("estimate_dir", eval.estimate_dir, "Output of fit or gibbs")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("truth_dir", eval.truth_dir, "Output of simulate")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", eval.out_dir, "Output directory (default estimate_dir/eval)");
  eval_cmd->add_flag("--residual-cov", eval.residual_cov, "Also write the residual covariance of the first columns");
  eval_cmd->add_option("--cov-columns", eval.cov_columns, "Columns in the residual covariance")->capture_default_str();

  BenchOptions bench;
  SeedFlag bench_seed;
  auto* bench_cmd = app.add_subcommand("bench", "Run a suite of scenarios");
  bench_cmd->add_option("suite", bench.suite, "Suite JSON")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("out_dir", bench.out_dir, "Output directory")->required();
  bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->capture_default_str();
  bench_seed.add(bench_cmd);

  GibbsOptions gibbs;
  SeedFlag gibbs_seed;
  auto* gibbs_cmd = app.add_subcommand("gibbs", "Run the Gibbs sampler baseline");
  gibbs_cmd->add_option("data", gibbs.data, "Quasi-tensor CSV")->required()->check(CLI::ExistingFile);
  gibbs_cmd->add_option("out_dir", gibbs.out_dir, "Output directory")->required();
  gibbs_cmd->add_option("--categories", gibbs.categories, "Category counts")->required()->check(CLI::ExistingFile);
  gibbs_cmd->add_option("--k", gibbs.k, "Number of extreme profiles")->required();
  gibbs_cmd->add_option("--burnin", gibbs.burnin)->capture_default_str();
  gibbs_cmd->add_option("--samples", gibbs.samples)->capture_default_str();
  gibbs_cmd->add_option("--alpha", gibbs.alpha, "Membership prior, scalar or K values")->capture_default_str();
  gibbs_cmd->add_option("--beta", gibbs.beta, "Item prior, scalar or C values")->capture_default_str();
  gibbs_seed.add(gibbs_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ggom::ExitCode::kUsage);
  }

  try {
    if (simulate->parsed()) {
      sim.seed = sim_seed.get();
      cmd_simulate(sim);
    } else if (fit_cmd->parsed()) {
      fit.seed = fit_seed.get();
      cmd_fit(fit);
    } else if (eval_cmd->parsed()) {
      cmd_eval(eval);
    } else if (bench_cmd->parsed()) {
      bench.seed = bench_seed.get();
      cmd_bench(bench);
    } else if (gibbs_cmd->parsed()) {
      gibbs.seed = gibbs_seed.get();
      cmd_gibbs(gibbs);
    }
  } catch (const ggom::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    // Filesystem and JSON access failures are input problems.
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ggom::ExitCode::kValidation);
  }
  return 0;
}

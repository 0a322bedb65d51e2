#include "ggom/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ggom/errors.hpp"
#include "ggom/gibbs.hpp"
#include "ggom/io.hpp"
#include "ggom/metrics.hpp"
#include "ggom/simulate.hpp"

namespace ggom::cli {

namespace {

using io::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    if (tok.empty() || std::from_chars(tok.data(), end, v).ptr != end) {
      throw UsageError(std::string(what) + ": '" + text + "' is not a comma-separated list of numbers");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

std::vector<Index> block_sizes(const BlockPartition& p) {
  std::vector<Index> sizes;
  for (Index l = 0; l < p.num_blocks(); ++l) sizes.push_back(p.size(l));
  return sizes;
}

json one_based(const std::vector<Index>& indices) {
  json out = json::array();
  for (Index i : indices) out.push_back(i + 1);
  return out;
}

void require_dir(const fs::path& dir) {
  if (dir.empty()) throw UsageError("an output directory is required");
  fs::create_directories(dir);
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("missing file " + path.string());
}

// Reads a data file for the given family into flattened form.
FlatMatrix load_data(const fs::path& data, const fs::path& categories, DataFamily family,
                     const std::vector<int>& blocks = {}) {
  if (family == DataFamily::kPolytomous) {
    if (categories.empty()) throw UsageError("polytomous data needs a categories file");
    return flatten(io::read_quasi_tensor(data, categories));
  }
  return io::read_flat(data, family, blocks);
}

void write_estimate(const fs::path& dir, const GomEstimate& est) {
  io::write_index_csv(dir / "vertices.csv", est.vertices.indices);
  io::write_index_csv(dir / "pruned.csv", est.vertices.pruned);
  io::write_matrix_csv(dir / "memberships.csv", est.memberships);
  io::write_matrix_csv(dir / "memberships_raw.csv", est.memberships_raw);
  io::write_matrix_csv(dir / "item_params.csv", est.item_params);
  io::write_matrix_csv(dir / "item_params_raw.csv", est.item_params_raw);
  io::write_matrix_csv(dir / "singular_values.csv", est.factors.singular_values);
  io::write_matrix_csv(dir / "left_vectors.csv", est.factors.U);
  io::write_matrix_csv(dir / "right_vectors.csv", est.factors.V);
}

const std::vector<std::string> kEstimateFiles{"vertices.csv",     "pruned.csv",          "memberships.csv",
                                              "memberships_raw.csv", "item_params.csv", "item_params_raw.csv",
                                              "singular_values.csv", "left_vectors.csv", "right_vectors.csv",
                                              "fit.json"};

}  // namespace

PruneConfig parse_prune(const std::string& spec) {
  if (spec == "off" || spec == "none") return PruneConfig::disabled();
  const auto v = parse_list(spec, "--prune");
  if (v.size() != 3) throw UsageError("--prune expects r,q,e or 'off'");
  if (v[0] != static_cast<double>(static_cast<Index>(v[0]))) throw UsageError("--prune: r must be an integer");
  PruneConfig cfg;
  cfg.r = static_cast<Index>(v[0]);
  cfg.q = v[1];
  cfg.e = v[2];
  cfg.check();
  return cfg;
}

void cmd_simulate(const SimulateOptions& opts) {
  const auto t0 = Clock::now();
  SimScenario scenario = io::load_scenario(opts.scenario);
  scenario.seed = io::resolve_seed(opts.seed, scenario.seed);
  if (opts.replication < 0) throw UsageError("--replication must be >= 0");
  require_dir(opts.out_dir);

  const SimulatedData sim = simulate(scenario, opts.replication);
  const double sim_seconds = seconds_since(t0);
  std::vector<std::string> files{"data.csv", "truth_memberships.csv", "truth_item_params.csv", "truth.json"};
  if (sim.quasi) {
    io::write_int_csv(opts.out_dir / "data.csv", sim.quasi->responses);
    io::write_category_counts(opts.out_dir / "categories.txt", sim.quasi->category_counts);
    files.push_back("categories.txt");
  } else {
    io::write_matrix_csv(opts.out_dir / "data.csv", sim.data.values);
  }
  io::write_matrix_csv(opts.out_dir / "truth_memberships.csv", sim.truth.memberships);
  io::write_matrix_csv(opts.out_dir / "truth_item_params.csv", sim.truth.item_params);
  io::write_json(opts.out_dir / "truth.json", json{{"family", std::string(to_string(scenario.family))},
                                                   {"block_sizes", block_sizes(sim.truth.partition)},
                                                   {"rho", scenario.rho},
                                                   {"replication", opts.replication},
                                                   {"clamped_means", sim.clamped_means},
                                                   {"scenario", io::to_json(scenario)}});

  io::RunManifest manifest;
  manifest.command = "simulate";
  manifest.config = io::to_json(scenario);
  manifest.config["replication"] = opts.replication;
  manifest.seed = scenario.seed;
  manifest.inputs[opts.scenario.string()] = io::sha256_file(opts.scenario);
  manifest.timings["simulate"] = sim_seconds;
  manifest.timings["total"] = seconds_since(t0);
  io::write_manifest(opts.out_dir, manifest, files);
}

void cmd_fit(const FitOptions& opts) {
  const auto t0 = Clock::now();
  if (opts.k < 1) throw UsageError("--k must be a positive integer");
  const DataFamily family = parse_family(opts.family);
  FitConfig cfg;
  cfg.prune = parse_prune(opts.prune);
  if (!(opts.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
  cfg.epsilon = opts.epsilon;
  cfg.svd.seed = io::resolve_seed(opts.seed, cfg.svd.seed);
  require_dir(opts.out_dir);

  FlatMatrix data;
  if (opts.mean_matrix) {
    // A noiseless mean matrix: any real entries, blocks from the category file.
    cfg.check_input = false;
    data.values = io::read_matrix_csv(opts.data);
    data.family = family;
    data.partition = opts.categories.empty() ? BlockPartition::singletons(data.values.cols())
                                             : BlockPartition::from_sizes(io::read_category_counts(opts.categories));
    if (data.partition.num_columns() != data.values.cols()) {
      throw ValidationError("category counts cover " + std::to_string(data.partition.num_columns()) +
                            " columns but " + opts.data.string() + " has " + std::to_string(data.values.cols()));
    }
  } else {
    data = load_data(opts.data, opts.categories, family);
  }
  const double load_seconds = seconds_since(t0);
  const GomEstimate est = fit(data, opts.k, cfg);
  write_estimate(opts.out_dir, est);

  const auto& d = est.diagnostics;
  io::write_json(opts.out_dir / "fit.json",
                 json{{"family", std::string(to_string(family))},
                      {"N", data.rows()},
                      {"J", data.cols()},
                      {"K", opts.k},
                      {"block_sizes", block_sizes(data.partition)},
                      {"vertices", one_based(est.vertices.indices)},
                      {"pruned", one_based(est.vertices.pruned)},
                      {"gap_warning", d.gap_warning},
                      {"next_singular_value", std::isnan(est.factors.next_singular_value)
                                                  ? json(nullptr)
                                                  : json(est.factors.next_singular_value)},
                      {"vertex_condition", d.vertex_condition},
                      {"degenerate_rows", one_based(d.degenerate_rows)}});

  io::RunManifest manifest;
  manifest.command = "fit";
  manifest.config = json{{"k", opts.k},
                         {"family", std::string(to_string(family))},
                         {"prune", {{"r", cfg.prune.r}, {"q", cfg.prune.q}, {"e", std::isinf(cfg.prune.e) ? json("off") : json(cfg.prune.e)}}},
                         {"epsilon", cfg.epsilon},
                         {"mean_matrix", opts.mean_matrix},
                         {"oversampling", cfg.svd.oversampling},
                         {"power_iterations", cfg.svd.power_iterations}};
  manifest.seed = cfg.svd.seed;
  manifest.inputs[opts.data.string()] = io::sha256_file(opts.data);
  if (!opts.categories.empty()) manifest.inputs[opts.categories.string()] = io::sha256_file(opts.categories);
  manifest.timings = {{"load", load_seconds},
                      {"svd", d.seconds_svd},
                      {"vertex_hunting", d.seconds_vertices},
                      {"estimate", d.seconds_estimate},
                      {"total", seconds_since(t0)}};
  io::write_manifest(opts.out_dir, manifest, kEstimateFiles);
}

void cmd_eval(const EvalOptions& opts) {
  const auto t0 = Clock::now();
  const fs::path& est_dir = opts.estimate_dir;
  const fs::path& truth_dir = opts.truth_dir;
  for (const char* f : {"memberships.csv", "item_params.csv"}) require_file(est_dir / f);
  for (const char* f : {"truth_memberships.csv", "truth_item_params.csv", "truth.json"}) require_file(truth_dir / f);

  const json truth_meta = io::read_json(truth_dir / "truth.json");
  ModelParams truth;
  truth.family = parse_family(truth_meta.at("family").get<std::string>());
  truth.memberships = io::read_matrix_csv(truth_dir / "truth_memberships.csv");
  truth.item_params = io::read_matrix_csv(truth_dir / "truth_item_params.csv");
  truth.partition = BlockPartition::from_sizes(truth_meta.at("block_sizes").get<std::vector<Index>>());
  const double rho = truth_meta.value("rho", 0.0);
  const int replication = truth_meta.value("replication", 0);

  const Eigen::MatrixXd pi = io::read_matrix_csv(est_dir / "memberships.csv");
  const Eigen::MatrixXd theta = io::read_matrix_csv(est_dir / "item_params.csv");
  if (pi.rows() != truth.memberships.rows() || pi.cols() != truth.memberships.cols() ||
      theta.rows() != truth.item_params.rows() || theta.cols() != truth.item_params.cols()) {
    throw ValidationError("estimate and truth dimensions differ");
  }

  const fs::path out_dir = opts.out_dir.empty() ? est_dir / "eval" : opts.out_dir;
  require_dir(out_dir);
  std::vector<std::string> files{"metrics.csv"};
  std::vector<io::MetricRow> rows;
  const std::string family(to_string(truth.family));
  auto add = [&](const std::string& name, double value) {
    rows.push_back({replication, family, pi.rows(), theta.rows(), pi.cols(), name, value});
  };
  for (const auto& [name, value] : aligned_error(truth, pi, theta).named()) add(name, value);

  // Perturbation bounds need the fitted singular factors.
  if (fs::is_regular_file(est_dir / "left_vectors.csv") && fs::is_regular_file(est_dir / "right_vectors.csv") &&
      fs::is_regular_file(est_dir / "singular_values.csv")) {
    SvdFactors<double> f;
    f.U = io::read_matrix_csv(est_dir / "left_vectors.csv");
    f.V = io::read_matrix_csv(est_dir / "right_vectors.csv");
    f.singular_values = io::read_matrix_csv(est_dir / "singular_values.csv").col(0);
    const BoundReport bounds = theory_bounds(truth, noise_scales(truth, rho), f);
    for (const auto& [name, value] : bounds.named()) add(name, value);
  }

  if (opts.residual_cov) {
    require_file(truth_dir / "data.csv");
    const fs::path cats = truth_dir / "categories.txt";
    const FlatMatrix data = load_data(truth_dir / "data.csv", fs::is_regular_file(cats) ? cats : fs::path{},
                                      truth.family, truth_meta.at("block_sizes").get<std::vector<int>>());
    const Index end = std::min<Index>(opts.cov_columns, data.cols());
    const Eigen::MatrixXd cov = residual_covariance(data.values, pi, theta, 0, end);
    io::write_matrix_csv(out_dir / "residual_cov.csv", cov);
    files.push_back("residual_cov.csv");
    const BlockContrast bc = block_contrast(cov, truth.partition.max_block());
    add("cov_within", bc.within);
    add("cov_between", bc.between);
  }

  io::write_metrics_csv(out_dir / "metrics.csv", rows);

  io::RunManifest manifest;
  manifest.command = "eval";
  manifest.config = json{{"residual_cov", opts.residual_cov}, {"cov_columns", opts.cov_columns}};
  for (const auto& dir : {est_dir, truth_dir}) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name != "manifest.json") manifest.inputs[entry.path().string()] = io::sha256_file(entry.path());
    }
  }
  manifest.timings["total"] = seconds_since(t0);
  io::write_manifest(out_dir, manifest, files);
}

void cmd_gibbs(const GibbsOptions& opts) {
  const auto t0 = Clock::now();
  if (opts.k < 1) throw UsageError("--k must be a positive integer");
  if (opts.categories.empty()) throw UsageError("gibbs needs a categories file (polytomous data)");
  GibbsConfig cfg;
  const auto alpha = parse_list(opts.alpha, "--alpha");
  const auto beta = parse_list(opts.beta, "--beta");
  if (alpha.size() == 1) {
    cfg.alpha = Eigen::VectorXd::Constant(opts.k, alpha[0]);
  } else {
    cfg.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Index>(alpha.size()));
  }
  cfg.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Index>(beta.size()));
  cfg.burnin = opts.burnin;
  cfg.samples = opts.samples;
  cfg.seed = io::resolve_seed(opts.seed, cfg.seed);
  cfg.check(opts.k);
  require_dir(opts.out_dir);

  const QuasiTensor quasi = io::read_quasi_tensor(opts.data, opts.categories);
  const GibbsEstimate est = gibbs_fit(quasi, opts.k, cfg);
  io::write_matrix_csv(opts.out_dir / "memberships.csv", est.memberships);
  io::write_matrix_csv(opts.out_dir / "item_params.csv", est.item_params);
  io::write_matrix_csv(opts.out_dir / "log_likelihood.csv",
                       Eigen::Map<const Eigen::VectorXd>(est.log_likelihood.data(),
                                                         static_cast<Index>(est.log_likelihood.size())));
  io::write_json(opts.out_dir / "gibbs.json", json{{"N", quasi.num_subjects()},
                                                   {"J", est.partition.num_columns()},
                                                   {"K", opts.k},
                                                   {"block_sizes", block_sizes(est.partition)},
                                                   {"max_assignment_error", est.max_assignment_error}});

  io::RunManifest manifest;
  manifest.command = "gibbs";
  manifest.config = json{{"k", opts.k},
                         {"burnin", cfg.burnin},
                         {"samples", cfg.samples},
                         {"alpha", alpha},
                         {"beta", beta}};
  manifest.seed = cfg.seed;
  manifest.inputs[opts.data.string()] = io::sha256_file(opts.data);
  manifest.inputs[opts.categories.string()] = io::sha256_file(opts.categories);
  manifest.timings = {{"sampler", est.seconds}, {"total", seconds_since(t0)}};
  io::write_manifest(opts.out_dir, manifest,
                     {"memberships.csv", "item_params.csv", "log_likelihood.csv", "gibbs.json"});
}

void cmd_bench(const BenchOptions& opts) {
  const auto t0 = Clock::now();
  const json suite = io::read_json(opts.suite);
  if (!suite.is_object() || !suite.contains("scenarios") || !suite.at("scenarios").is_array()) {
    throw UsageError(opts.suite.string() + ": expected an object with a 'scenarios' array");
  }
  if (opts.jobs < 1) throw UsageError("--jobs must be >= 1");
  FitConfig cfg;
  if (suite.contains("prune")) cfg.prune = parse_prune(suite.at("prune").get<std::string>());
  require_dir(opts.out_dir);

  struct Row {
    std::string scenario, method;
    io::MetricRow metric;
  };
  std::vector<Row> rows;
  json summary = json::array();
  for (json doc : suite.at("scenarios")) {
    json gibbs_doc;
    if (doc.is_object() && doc.contains("gibbs")) {
      gibbs_doc = doc.at("gibbs");
      doc.erase("gibbs");
    }
    SimScenario scenario = io::scenario_from_json(doc);
    scenario.seed = io::resolve_seed(opts.seed, scenario.seed);
    if (scenario.name.empty()) scenario.name = "scenario" + std::to_string(summary.size() + 1);
    const std::string family(to_string(scenario.family));
    const Index n = scenario.subjects, j = scenario.num_columns(), k = scenario.profiles;

    const auto results = run_replications(scenario, cfg, opts.jobs);
    std::map<std::string, std::vector<double>> spectral;
    std::vector<double> spectral_seconds;
    json failures = json::array();
    for (const auto& r : results) {
      if (!r.ok) {
        failures.push_back({{"replication", r.replication}, {"error", r.error}});
        continue;
      }
      spectral_seconds.push_back(r.seconds);
      for (const auto& [name, value] : r.metrics) {
        rows.push_back({scenario.name, "spectral", {r.replication, family, n, j, k, name, value}});
        spectral[name].push_back(value);
      }
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    json entry{{"scenario", scenario.name},
               {"family", family},
               {"N", n},
               {"J", j},
               {"K", k},
               {"replications", scenario.replications},
               {"failures", failures},
               {"spectral_seconds_mean", mean(spectral_seconds)}};
    for (const auto& [name, values] : spectral) entry["spectral_mean"][name] = mean(values);

    if (!gibbs_doc.is_null()) {
      if (scenario.family != DataFamily::kPolytomous) throw UsageError("gibbs comparison needs a polytomous scenario");
      GibbsConfig gcfg;
      gcfg.alpha = Eigen::Map<const Eigen::VectorXd>(scenario.alpha.data(), k);
      gcfg.beta = Eigen::VectorXd::Constant(1, gibbs_doc.value("beta", scenario.dirichlet_beta));
      if (gibbs_doc.contains("alpha")) gcfg.alpha.setConstant(gibbs_doc.at("alpha").get<double>());
      gcfg.burnin = gibbs_doc.value("burnin", gcfg.burnin);
      gcfg.samples = gibbs_doc.value("samples", gcfg.samples);
      const int reps = std::min(gibbs_doc.value("replications", 1), scenario.replications);
      std::map<std::string, std::vector<double>> gibbs;
      std::vector<double> gibbs_seconds;
      for (int rep = 0; rep < reps; ++rep) {
        const SimulatedData sim = simulate(scenario, rep);
        gcfg.seed = scenario.replication_seed(rep);
        const GibbsEstimate est = gibbs_fit(*sim.quasi, k, gcfg);
        gibbs_seconds.push_back(est.seconds);
        for (const auto& [name, value] : aligned_error(sim.truth, est.memberships, est.item_params).named()) {
          rows.push_back({scenario.name, "gibbs", {rep, family, n, j, k, name, value}});
          gibbs[name].push_back(value);
        }
      }
      entry["gibbs_seconds_mean"] = mean(gibbs_seconds);
      for (const auto& [name, values] : gibbs) entry["gibbs_mean"][name] = mean(values);
      const double spectral_mean = mean(spectral_seconds);
      entry["speedup"] = spectral_mean > 0.0 ? json(mean(gibbs_seconds) / spectral_mean) : json(nullptr);
    }
    summary.push_back(entry);
  }

  {
    std::ofstream out(opts.out_dir / "bench.csv", std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (opts.out_dir / "bench.csv").string());
    out << "scenario,method,replication,family,N,J,K,metric_name,value\n";
    for (const auto& r : rows) {
      const auto& m = r.metric;
      out << r.scenario << ',' << r.method << ',' << m.replication << ',' << m.family << ',' << m.n << ',' << m.j
          << ',' << m.k << ',' << m.metric << ',' << io::format_double(m.value) << '\n';
    }
  }
  io::write_json(opts.out_dir / "summary.json", json{{"scenarios", summary}});

  io::RunManifest manifest;
  manifest.command = "bench";
  manifest.config = suite;
  manifest.config["jobs"] = opts.jobs;
  manifest.seed = opts.seed.value_or(0);
  manifest.inputs[opts.suite.string()] = io::sha256_file(opts.suite);
  manifest.timings["total"] = seconds_since(t0);
  io::write_manifest(opts.out_dir, manifest, {"bench.csv", "summary.json"});
}

}  // namespace ggom::cli

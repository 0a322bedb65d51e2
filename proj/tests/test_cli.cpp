#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ggom/io.hpp"

namespace fs = std::filesystem;
using ggom::Index;
using ggom::io::json;

namespace {

const fs::path kExe = GGOM_EXE;
const fs::path kFixtures = GGOM_FIXTURES;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ggom_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

int run(const std::string& args) {
  const std::string cmd = kExe.string() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, double> metrics(const fs::path& csv) {
  std::map<std::string, double> out;
  for (const auto& row : ggom::io::read_metrics_csv(csv)) out[row.metric] = row.value;
  return out;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("noiseless fixture is recovered exactly") {
  TempDir dir;
  const fs::path fx = kFixtures / "noiseless";
  REQUIRE(run("fit " + q(fx / "mean.csv") + " " + q(dir.path / "fit") + " --categories " +
              q(fx / "categories.txt") + " --k 3 --mean-matrix --prune off") == 0);
  REQUIRE(run("eval " + q(dir.path / "fit") + " " + q(fx)) == 0);
  const auto m = metrics(dir.path / "fit" / "eval" / "metrics.csv");
  CHECK(m.at("l2inf_pi") <= 1e-10);
  CHECK(m.at("maxabs_theta") <= 1e-10);
  CHECK(m.at("empirical_mean") <= 1e-10);
  CHECK(fs::is_regular_file(dir.path / "fit" / "manifest.json"));
  CHECK(fs::is_regular_file(dir.path / "fit" / "eval" / "manifest.json"));
}

TEST_CASE("usage errors exit with code 2") {
  TempDir dir;
  const fs::path fx = kFixtures / "noiseless";
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("fit " + q(fx / "mean.csv") + " " + q(dir.path / "o") + " --categories " + q(fx / "categories.txt") +
            " --k 0 --mean-matrix") == 2);
  CHECK(run("fit " + q(fx / "mean.csv") + " " + q(dir.path / "o") + " --k 3 --family nonsense") == 2);
  CHECK(run("fit " + q(fx / "mean.csv") + " " + q(dir.path / "o") + " --categories " + q(fx / "categories.txt") +
            " --k 3 --prune 1,2") == 2);
  CHECK(run("simulate " + q(dir.file("bad.json", "{\"N\": 10,")) + " " + q(dir.path / "s")) == 2);
  CHECK(run("simulate " + q(dir.file("rho.json", R"({"family": "polytomous", "rho": 0.5})")) + " " +
            q(dir.path / "s")) == 2);
  CHECK(run("simulate " + q(dir.path / "missing.json") + " " + q(dir.path / "s")) == 2);
}

TEST_CASE("validation errors exit with code 3") {
  TempDir dir;
  const auto cats = dir.file("cats.txt", "3,3\n");
  const auto data = dir.file("data.csv", "1,2\n4,1\n2,2\n3,3\n");
  CHECK(run("fit " + q(data) + " " + q(dir.path / "o") + " --categories " + q(cats) + " --k 2") == 3);
  const auto text = dir.file("text.csv", "1,2\n3,x\n");
  CHECK(run("fit " + q(text) + " " + q(dir.path / "o") + " --family poisson --k 1") == 3);
}

TEST_CASE("simulate is reproducible and seeds are honoured") {
  TempDir dir;
  const auto scenario = dir.file("s.json", R"({"N": 80, "L": 16, "K": 3, "seed": 5})");
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "a")) == 0);
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "b")) == 0);
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "c") + " --seed 6") == 0);
  for (const char* f : {"data.csv", "truth_memberships.csv", "truth_item_params.csv", "categories.txt"}) {
    CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
  }
  CHECK(slurp(dir.path / "a" / "data.csv") != slurp(dir.path / "c" / "data.csv"));
  ::setenv("GGOM_SEED", "5", 1);
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "d") + " --seed 6") == 0);
  ::unsetenv("GGOM_SEED");
  CHECK(slurp(dir.path / "a" / "data.csv") == slurp(dir.path / "d" / "data.csv"));

  const json manifest = ggom::io::read_json(dir.path / "a" / "manifest.json");
  CHECK(manifest.at("outputs").contains("data.csv"));
  CHECK(manifest.at("seed") == 5);
}

TEST_CASE("fit and eval on simulated data") {
  TempDir dir;
  const auto scenario = dir.file("s.json", R"({"N": 1000, "L": 200, "K": 3, "seed": 8})");
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "sim")) == 0);
  REQUIRE(run("fit " + q(dir.path / "sim" / "data.csv") + " " + q(dir.path / "fit") + " --categories " +
              q(dir.path / "sim" / "categories.txt") + " --k 3") == 0);
  REQUIRE(run("eval " + q(dir.path / "fit") + " " + q(dir.path / "sim") + " --residual-cov --cov-columns 12") == 0);
  const auto m = metrics(dir.path / "fit" / "eval" / "metrics.csv");
  CHECK(m.at("mae_theta") < 0.1);
  CHECK(m.contains("xi1"));
  CHECK(m.contains("cov_within"));
  CHECK(ggom::io::read_matrix_csv(dir.path / "fit" / "eval" / "residual_cov.csv").rows() == 12);
  const json fit = ggom::io::read_json(dir.path / "fit" / "fit.json");
  CHECK(fit.contains("family"));
}

TEST_CASE("eval is zero on the truth and invariant to profile order") {
  TempDir dir;
  const fs::path fx = kFixtures / "noiseless";
  fs::create_directories(dir.path / "est");
  fs::copy_file(fx / "truth_memberships.csv", dir.path / "est" / "memberships.csv");
  fs::copy_file(fx / "truth_item_params.csv", dir.path / "est" / "item_params.csv");
  REQUIRE(run("eval " + q(dir.path / "est") + " " + q(fx) + " --out " + q(dir.path / "e1")) == 0);
  const auto exact = metrics(dir.path / "e1" / "metrics.csv");
  CHECK(exact.at("l2inf_pi") == 0.0);
  CHECK(exact.at("maxabs_theta") == 0.0);
  CHECK(exact.at("mae_pi") == 0.0);

  // Truth with profiles reordered.
  fs::create_directories(dir.path / "perm");
  fs::copy_file(fx / "truth.json", dir.path / "perm" / "truth.json");
  for (const char* f : {"truth_memberships.csv", "truth_item_params.csv"}) {
    const Eigen::MatrixXd m = ggom::io::read_matrix_csv(fx / f);
    Eigen::MatrixXd p(m.rows(), m.cols());
    p << m.col(2), m.col(0), m.col(1);
    ggom::io::write_matrix_csv(dir.path / "perm" / f, p);
  }
  REQUIRE(run("eval " + q(dir.path / "est") + " " + q(dir.path / "perm") + " --out " + q(dir.path / "e2")) == 0);
  const auto moved = metrics(dir.path / "e2" / "metrics.csv");
  REQUIRE(moved.size() == exact.size());
  for (const auto& [name, value] : exact) CHECK(std::abs(moved.at(name) - value) <= 1e-15);
}

TEST_CASE("binomial counts are halved on load") {
  TempDir dir;
  // Two-profile Binomial(2, p) counts.
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd theta_true(60, 2);
  for (Index j = 0; j < 60; ++j) theta_true.row(j) << unif(gen), unif(gen);
  Eigen::MatrixXi raw(300, 60);
  for (Index i = 0; i < 300; ++i) {
    const double w = i < 2 ? static_cast<double>(i) : unif(gen);
    for (Index j = 0; j < 60; ++j) {
      std::binomial_distribution<int> draw(2, w * theta_true(j, 0) + (1.0 - w) * theta_true(j, 1));
      raw(i, j) = draw(gen);
    }
  }
  fs::create_directories(dir.path / "sim");
  ggom::io::write_int_csv(dir.path / "sim" / "data.csv", raw);
  CHECK(raw.maxCoeff() == 2);
  REQUIRE(run("fit " + q(dir.path / "sim" / "data.csv") + " " + q(dir.path / "fit") + " --family binomial --k 2") ==
          0);
  const Eigen::MatrixXd theta = ggom::io::read_matrix_csv(dir.path / "fit" / "item_params.csv");
  CHECK(theta.maxCoeff() <= 1.0);
  CHECK(run("fit " + q(dir.path / "sim" / "data.csv") + " " + q(dir.path / "fit2") + " --family bernoulli --k 2") ==
        3);
}

TEST_CASE("bench runs every scenario and reruns identically") {
  TempDir dir;
  const auto suite = dir.file("suite.json", R"({"scenarios": [
    {"name": "poly", "N": 100, "L": 20, "K": 3, "replications": 2, "seed": 1},
    {"name": "bern", "family": "bernoulli", "N": 100, "J": 20, "M": 10, "rho": 0.5, "replications": 2, "seed": 2},
    {"name": "pois", "family": "poisson", "N": 100, "J": 20, "replications": 2, "seed": 3}
  ]})");
  REQUIRE(run("bench " + q(suite) + " " + q(dir.path / "a") + " --jobs 2") == 0);
  REQUIRE(run("bench " + q(suite) + " " + q(dir.path / "b") + " --jobs 1") == 0);
  const std::string csv = slurp(dir.path / "a" / "bench.csv");
  CHECK(csv == slurp(dir.path / "b" / "bench.csv"));

  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "scenario,method,replication,family,N,J,K,metric_name,value");
  std::map<std::string, int> per_run;
  while (std::getline(lines, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
    ++per_run[line.substr(0, c1) + "/" + line.substr(c2 + 1, c3 - c2 - 1)];
  }
  CHECK(per_run.size() == 6);
  std::set<int> counts;
  for (const auto& [key, n] : per_run) counts.insert(n);
  CHECK(counts.size() == 1);
  CHECK(*counts.begin() >= 5);

  const json summary = ggom::io::read_json(dir.path / "a" / "summary.json");
  REQUIRE(summary.at("scenarios").size() == 3);
  for (const auto& sc : summary.at("scenarios")) CHECK(sc.at("failures").empty());
}

TEST_CASE("gibbs subcommand") {
  TempDir dir;
  const auto scenario = dir.file("s.json", R"({"N": 60, "L": 10, "K": 2, "seed": 3})");
  REQUIRE(run("simulate " + q(scenario) + " " + q(dir.path / "sim")) == 0);
  REQUIRE(run("gibbs " + q(dir.path / "sim" / "data.csv") + " " + q(dir.path / "g") + " --categories " +
              q(dir.path / "sim" / "categories.txt") + " --k 2 --burnin 20 --samples 20") == 0);
  CHECK(ggom::io::read_matrix_csv(dir.path / "g" / "memberships.csv").rows() == 60);
  CHECK(ggom::io::read_matrix_csv(dir.path / "g" / "log_likelihood.csv").rows() == 40);
  REQUIRE(run("eval " + q(dir.path / "g") + " " + q(dir.path / "sim")) == 0);
  CHECK(run("gibbs " + q(dir.path / "sim" / "data.csv") + " " + q(dir.path / "g2") + " --categories " +
            q(dir.path / "sim" / "categories.txt") + " --k 2 --alpha 1,2,3") == 2);
}

#pragma once

// File formats. All numeric CSV is written with 17 significant digits so
// doubles round-trip exactly. Category responses and subject indices are
// 1-based on disk and 0-based in memory.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ggom/data_model.hpp"
#include "ggom/simulate.hpp"

namespace ggom::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Reads a numeric CSV. A first line containing a non-numeric field is taken
// as a header and skipped. Errors carry file and line.
Eigen::MatrixXd read_matrix_csv(const fs::path& path);
Eigen::MatrixXi read_int_csv(const fs::path& path);

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m);
void write_int_csv(const fs::path& path, const Eigen::MatrixXi& m);
void write_index_csv(const fs::path& path, const std::vector<Index>& indices);  // one 1-based index per line
std::vector<Index> read_index_csv(const fs::path& path);

// Category counts: integers separated by commas or whitespace, on one line.
std::vector<int> read_category_counts(const fs::path& path);
void write_category_counts(const fs::path& path, const std::vector<int>& counts);

QuasiTensor read_quasi_tensor(const fs::path& data, const fs::path& categories);

// Flat data for the bernoulli, binomial (raw counts, halved on load) and
// poisson families. `block_sizes`, when given, attaches a column partition.
FlatMatrix read_flat(const fs::path& data, DataFamily family, const std::vector<int>& block_sizes = {});

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& doc);

SimScenario scenario_from_json(const json& doc);
json to_json(const SimScenario& scenario);
SimScenario load_scenario(const fs::path& path);

std::string sha256_file(const fs::path& path);

// Environment variable GGOM_SEED, when set, overrides the flag value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback);

struct RunManifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::map<std::string, double> timings;       // stage -> seconds

  json to_json() const;
};

// Hashes every listed output in `dir` and writes dir/manifest.json.
void write_manifest(const fs::path& dir, RunManifest manifest, const std::vector<std::string>& output_files);

// Tidy metrics table: replication,family,N,J,K,metric_name,value
struct MetricRow {
  int replication = 0;
  std::string family;
  Index n = 0, j = 0, k = 0;
  std::string metric;
  double value = 0.0;
};
void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const fs::path& path);

std::string format_double(double x);

}  // namespace ggom::io

#include "ggom/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ggom/errors.hpp"

namespace ggom::io {

namespace {

std::string where(const fs::path& path, std::size_t line) { return path.string() + ":" + std::to_string(line); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

std::vector<std::vector<double>> read_rows(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (!parse_double(fields[f], row[f])) {
        numeric = false;
        if (!rows.empty() || lineno > 1) {
          throw ValidationError(where(path, lineno) + ": field " + std::to_string(f + 1) + " ('" +
                                std::string(fields[f]) + "') is not a number");
        }
        break;
      }
    }
    if (!numeric) continue;  // header
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ValidationError(where(path, lineno) + ": expected " + std::to_string(width) + " fields, found " +
                            std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path.string() + ": no data rows");
  return rows;
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const int len = std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Eigen::MatrixXi read_int_csv(const fs::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  Eigen::MatrixXi out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      if (x != std::floor(x) || std::abs(x) > 1e9) {
        throw ValidationError(path.string() + ": entry (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                              ") is not an integer");
      }
      out(i, j) = static_cast<int>(x);
    }
  }
  return out;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
}

void write_int_csv(const fs::path& path, const Eigen::MatrixXi& m) {
  auto out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

void write_index_csv(const fs::path& path, const std::vector<Index>& indices) {
  auto out = open_out(path);
  for (Index i : indices) out << (i + 1) << '\n';
}

std::vector<Index> read_index_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Index> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    long long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || v < 1) throw ValidationError(where(path, lineno) + ": expected a positive index");
    out.push_back(static_cast<Index>(v - 1));
  }
  return out;
}

std::vector<int> read_category_counts(const fs::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream tokens(text);
  std::vector<int> counts;
  std::string tok;
  while (tokens >> tok) {
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ValidationError(path.string() + ": category count '" + tok + "' is not an integer");
    }
    counts.push_back(v);
  }
  if (counts.empty()) throw ValidationError(path.string() + ": no category counts");
  return counts;
}

void write_category_counts(const fs::path& path, const std::vector<int>& counts) {
  auto out = open_out(path);
  for (std::size_t l = 0; l < counts.size(); ++l) out << (l ? "," : "") << counts[l];
  out << '\n';
}

QuasiTensor read_quasi_tensor(const fs::path& data, const fs::path& categories) {
  QuasiTensor quasi;
  quasi.responses = read_int_csv(data);
  quasi.category_counts = read_category_counts(categories);
  check(quasi);
  return quasi;
}

FlatMatrix read_flat(const fs::path& data, DataFamily family, const std::vector<int>& block_sizes) {
  if (family == DataFamily::kPolytomous) {
    throw UsageError("polytomous data is read as a quasi-tensor with a category file");
  }
  const Eigen::MatrixXd values = read_matrix_csv(data);
  FlatMatrix flat;
  if (family == DataFamily::kBinomial) {
    flat = halve_binomial(values);
  } else {
    flat.values = values;
    flat.family = family;
  }
  flat.partition = block_sizes.empty() ? BlockPartition::singletons(values.cols())
                                       : BlockPartition::from_sizes(block_sizes);
  if (flat.partition.num_columns() != values.cols()) {
    throw ValidationError("block sizes cover " + std::to_string(flat.partition.num_columns()) + " columns but " +
                          data.string() + " has " + std::to_string(values.cols()));
  }
  if (const auto report = validate(flat); !report.ok()) {
    throw ValidationError(data.string() + ": " + report.summary());
  }
  return flat;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("scenario field '") + key + "': " + e.what());
  }
}

}  // namespace

SimScenario scenario_from_json(const json& doc) {
  static const std::set<std::string> known{"name",    "family",     "N",          "L",           "J",
                                           "K",       "C",          "alpha",      "dirichlet_beta", "beta_a",
                                           "beta_b",  "gamma_shape", "gamma_rate", "M",           "rho",
                                           "replications", "seed",  "random_pure_placement"};
  if (!doc.is_object()) throw UsageError("scenario must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw UsageError("scenario: unknown field '" + key + "'");
  }
  SimScenario s;
  s.name = get_or<std::string>(doc, "name", "");
  s.family = parse_family(get_or<std::string>(doc, "family", "polytomous"));
  s.subjects = get_or<Index>(doc, "N", s.subjects);
  s.profiles = get_or<Index>(doc, "K", s.profiles);
  if (s.family == DataFamily::kPolytomous) {
    if (doc.contains("rho") || doc.contains("M")) {
      throw UsageError("scenario: config conflict, rho/M (block dependence) given for the polytomous family");
    }
    if (doc.contains("J")) throw UsageError("scenario: polytomous designs take L (items), not J");
    s.items = get_or<Index>(doc, "L", s.items);
    s.categories = get_or<int>(doc, "C", s.categories);
  } else {
    if (doc.contains("L") || doc.contains("C")) {
      throw UsageError("scenario: config conflict, L/C given for the " + std::string(to_string(s.family)) + " family");
    }
    s.columns = get_or<Index>(doc, "J", 0);
    s.items = 0;
  }
  if (s.family == DataFamily::kPoisson && (doc.contains("rho") || doc.contains("M"))) {
    throw UsageError("scenario: config conflict, rho/M given for the poisson family");
  }
  if (doc.contains("alpha")) {
    const auto& a = doc.at("alpha");
    if (a.is_number()) {
      s.alpha.assign(static_cast<std::size_t>(s.profiles), a.get<double>());
    } else {
      s.alpha = get_or<std::vector<double>>(doc, "alpha", {});
    }
  } else {
    s.alpha.assign(static_cast<std::size_t>(s.profiles), 1.0);
  }
  s.dirichlet_beta = get_or<double>(doc, "dirichlet_beta", s.dirichlet_beta);
  s.beta_a = get_or<double>(doc, "beta_a", s.beta_a);
  s.beta_b = get_or<double>(doc, "beta_b", s.beta_b);
  s.gamma_shape = get_or<double>(doc, "gamma_shape", s.gamma_shape);
  s.gamma_rate = get_or<double>(doc, "gamma_rate", s.gamma_rate);
  s.block_size = get_or<Index>(doc, "M", s.block_size);
  s.rho = get_or<double>(doc, "rho", s.rho);
  s.replications = get_or<int>(doc, "replications", s.replications);
  s.seed = get_or<std::uint64_t>(doc, "seed", s.seed);
  s.random_pure_placement = get_or<bool>(doc, "random_pure_placement", false);
  s.check();
  return s;
}

json to_json(const SimScenario& s) {
  json doc{{"name", s.name},
           {"family", std::string(to_string(s.family))},
           {"N", s.subjects},
           {"K", s.profiles},
           {"alpha", s.alpha},
           {"replications", s.replications},
           {"seed", s.seed},
           {"random_pure_placement", s.random_pure_placement}};
  switch (s.family) {
    case DataFamily::kPolytomous:
      doc["L"] = s.items;
      doc["C"] = s.categories;
      doc["dirichlet_beta"] = s.dirichlet_beta;
      break;
    case DataFamily::kBernoulli:
      doc["J"] = s.columns;
      doc["beta_a"] = s.beta_a;
      doc["beta_b"] = s.beta_b;
      doc["M"] = s.block_size;
      doc["rho"] = s.rho;
      break;
    case DataFamily::kPoisson:
      doc["J"] = s.columns;
      doc["gamma_shape"] = s.gamma_shape;
      doc["gamma_rate"] = s.gamma_rate;
      break;
    case DataFamily::kBinomial:
      break;
  }
  return doc;
}

SimScenario load_scenario(const fs::path& path) {
  try {
    return scenario_from_json(read_json(path));
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw UsageError(path.string() + ": " + msg);
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
  if (const char* env = std::getenv("GGOM_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw UsageError("GGOM_SEED='" + std::string(s) + "' is not an unsigned integer");
    }
    return v;
  }
  return flag.value_or(fallback);
}

json RunManifest::to_json() const {
  return json{{"command", command}, {"config", config},   {"seed", seed},       {"version", kVersion},
              {"inputs", inputs},   {"outputs", outputs}, {"timings", timings}};
}

void write_manifest(const fs::path& dir, RunManifest manifest, const std::vector<std::string>& output_files) {
  for (const auto& name : output_files) manifest.outputs[name] = sha256_file(dir / name);
  write_json(dir / "manifest.json", manifest.to_json());
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  out << "replication,family,N,J,K,metric_name,value\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << r.family << ',' << r.n << ',' << r.j << ',' << r.k << ',' << r.metric << ','
        << format_double(r.value) << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<MetricRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) throw ValidationError(where(path, lineno) + ": expected 7 fields");
    MetricRow r;
    double v = 0;
    auto num = [&](std::string_view s) {
      if (!parse_double(s, v)) throw ValidationError(where(path, lineno) + ": bad number '" + std::string(s) + "'");
      return v;
    };
    r.replication = static_cast<int>(num(f[0]));
    r.family = std::string(f[1]);
    r.n = static_cast<Index>(num(f[2]));
    r.j = static_cast<Index>(num(f[3]));
    r.k = static_cast<Index>(num(f[4]));
    r.metric = std::string(f[5]);
    r.value = num(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ggom::io

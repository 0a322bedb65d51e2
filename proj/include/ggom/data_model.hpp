#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace ggom {

using Index = Eigen::Index;

// Distribution family of a data matrix. Polytomous data is carried in its
// flattened one-hot form; binomial counts are stored halved so every family
// estimates a mean matrix of the form memberships * item_params^T.
enum class DataFamily {
  kPolytomous,  // bernoulli-onehot
  kBernoulli,   // bernoulli-general
  kBinomial,    // binomial-halved
  kPoisson,
};

std::string_view to_string(DataFamily family);
DataFamily parse_family(std::string_view name);

// Contiguous partition of [0, J) into blocks S_1..S_L.
class BlockPartition {
 public:
  BlockPartition() = default;

  static BlockPartition from_sizes(const std::vector<Index>& sizes);
  static BlockPartition from_sizes(const std::vector<int>& sizes);
  static BlockPartition singletons(Index num_columns);
  static BlockPartition uniform(Index num_columns, Index block_size);

  Index num_blocks() const { return static_cast<Index>(offsets_.size()) - 1; }
  Index num_columns() const { return offsets_.empty() ? 0 : offsets_.back(); }
  Index begin(Index block) const { return offsets_[block]; }
  Index end(Index block) const { return offsets_[block + 1]; }
  Index size(Index block) const { return end(block) - begin(block); }
  Index max_block() const;
  Index block_of(Index column) const;

  const std::vector<Index>& offsets() const { return offsets_; }

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;

 private:
  explicit BlockPartition(std::vector<Index> offsets) : offsets_(std::move(offsets)) {}
  std::vector<Index> offsets_{0};
};

// N x L categorical responses. Categories are 1-based: responses(i, l) is in
// {1, ..., category_counts[l]}.
struct QuasiTensor {
  Eigen::MatrixXi responses;
  std::vector<int> category_counts;

  Index num_subjects() const { return responses.rows(); }
  Index num_items() const { return responses.cols(); }
  Index num_flat_columns() const;
};

struct FlatMatrix {
  Eigen::MatrixXd values;
  BlockPartition partition;
  DataFamily family = DataFamily::kBernoulli;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

// Ground-truth or estimated model parameters: mean matrix = memberships *
// item_params^T.
struct ModelParams {
  Eigen::MatrixXd memberships;  // N x K
  Eigen::MatrixXd item_params;  // J x K
  DataFamily family = DataFamily::kBernoulli;
  BlockPartition partition;

  Index num_profiles() const { return memberships.cols(); }
  Eigen::MatrixXd mean() const { return memberships * item_params.transpose(); }
};

struct Issue {
  std::string kind;
  Index row = -1;
  Index block = -1;
  Index column = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> violations;
  // Non-fatal findings, e.g. a category column nobody selected.
  std::vector<Issue> warnings;

  bool ok() const { return violations.empty(); }
  std::string summary(std::size_t max_items = 5) const;
};

// Checks every QuasiTensor invariant; throws ValidationError naming the first
// offending (subject, item) pair.
void check(const QuasiTensor& quasi);

// One-hot encoding of each item into a block of category_counts[l] columns.
FlatMatrix flatten(const QuasiTensor& quasi);

// Stacks per-item C_l x K probability tables (column k = profile k) into a
// J x K matrix.
Eigen::MatrixXd flatten_params(const std::vector<Eigen::MatrixXd>& tables,
                               const std::vector<int>& category_counts);

// Splits a flattened J x K matrix back into per-item tables.
std::vector<Eigen::MatrixXd> unflatten_params(const Eigen::MatrixXd& item_params,
                                              const BlockPartition& partition);

ValidationReport validate(const FlatMatrix& flat);
ValidationReport validate(const ModelParams& params, double tolerance = 1e-12);

// Raw binomial counts in {0, 1, 2} become the halved matrix in {0, .5, 1}.
FlatMatrix halve_binomial(const Eigen::MatrixXd& counts);

}  // namespace ggom

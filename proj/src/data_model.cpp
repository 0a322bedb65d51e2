#include "ggom/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ggom/errors.hpp"

namespace ggom {

std::string_view to_string(DataFamily family) {
  switch (family) {
    case DataFamily::kPolytomous:
      return "polytomous";
    case DataFamily::kBernoulli:
      return "bernoulli";
    case DataFamily::kBinomial:
      return "binomial";
    case DataFamily::kPoisson:
      return "poisson";
  }
  return "unknown";
}

DataFamily parse_family(std::string_view name) {
  if (name == "polytomous" || name == "bernoulli-onehot") return DataFamily::kPolytomous;
  if (name == "bernoulli" || name == "bernoulli-general") return DataFamily::kBernoulli;
  if (name == "binomial" || name == "binomial-halved") return DataFamily::kBinomial;
  if (name == "poisson") return DataFamily::kPoisson;
  throw UsageError("unknown family '" + std::string(name) +
                   "' (expected polytomous, bernoulli, binomial or poisson)");
}

BlockPartition BlockPartition::from_sizes(const std::vector<Index>& sizes) {
  std::vector<Index> offsets{0};
  offsets.reserve(sizes.size() + 1);
  for (Index s : sizes) {
    if (s < 1) throw ValidationError("block sizes must be positive");
    offsets.push_back(offsets.back() + s);
  }
  return BlockPartition(std::move(offsets));
}

BlockPartition BlockPartition::from_sizes(const std::vector<int>& sizes) {
  return from_sizes(std::vector<Index>(sizes.begin(), sizes.end()));
}

BlockPartition BlockPartition::singletons(Index num_columns) {
  return from_sizes(std::vector<Index>(static_cast<std::size_t>(num_columns), 1));
}

BlockPartition BlockPartition::uniform(Index num_columns, Index block_size) {
  if (block_size < 1 || num_columns % block_size != 0) {
    throw ValidationError("column count " + std::to_string(num_columns) +
                          " is not divisible by block size " + std::to_string(block_size));
  }
  return from_sizes(std::vector<Index>(static_cast<std::size_t>(num_columns / block_size), block_size));
}

Index BlockPartition::max_block() const {
  Index m = 0;
  for (Index l = 0; l < num_blocks(); ++l) m = std::max(m, size(l));
  return m;
}

Index BlockPartition::block_of(Index column) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), column);
  return static_cast<Index>(it - offsets_.begin()) - 1;
}

Index QuasiTensor::num_flat_columns() const {
  Index j = 0;
  for (int c : category_counts) j += c;
  return j;
}

std::string ValidationReport::summary(std::size_t max_items) const {
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
    os << (i == 0 ? ": " : "; ") << violations[i].message;
  }
  return os.str();
}

void check(const QuasiTensor& quasi) {
  const Index n = quasi.num_subjects();
  const Index items = quasi.num_items();
  if (n < 1 || items < 1) throw ValidationError("quasi-tensor must have N >= 1 and L >= 1");
  if (static_cast<Index>(quasi.category_counts.size()) != items) {
    throw ValidationError("category count list has " + std::to_string(quasi.category_counts.size()) +
                          " entries but there are " + std::to_string(items) + " items");
  }
  for (Index l = 0; l < items; ++l) {
    if (quasi.category_counts[l] < 2) {
      throw ValidationError("item " + std::to_string(l + 1) + " has fewer than 2 categories");
    }
  }
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < items; ++l) {
      const int c = quasi.responses(i, l);
      if (c < 1 || c > quasi.category_counts[l]) {
        throw ValidationError("response (" + std::to_string(i + 1) + ", " + std::to_string(l + 1) +
                              ") = " + std::to_string(c) + " outside [1, " +
                              std::to_string(quasi.category_counts[l]) + "]");
      }
    }
  }
}

FlatMatrix flatten(const QuasiTensor& quasi) {
  check(quasi);
  FlatMatrix flat;
  flat.family = DataFamily::kPolytomous;
  flat.partition = BlockPartition::from_sizes(quasi.category_counts);
  flat.values = Eigen::MatrixXd::Zero(quasi.num_subjects(), quasi.num_flat_columns());
  for (Index l = 0; l < quasi.num_items(); ++l) {
    const Index offset = flat.partition.begin(l);
    for (Index i = 0; i < quasi.num_subjects(); ++i) {
      flat.values(i, offset + quasi.responses(i, l) - 1) = 1.0;
    }
  }
  return flat;
}

Eigen::MatrixXd flatten_params(const std::vector<Eigen::MatrixXd>& tables,
                               const std::vector<int>& category_counts) {
  if (tables.size() != category_counts.size()) {
    throw ValidationError("got " + std::to_string(tables.size()) + " item tables for " +
                          std::to_string(category_counts.size()) + " items");
  }
  if (tables.empty()) throw ValidationError("no item tables");
  const Index k = tables.front().cols();
  Index j = 0;
  for (std::size_t l = 0; l < tables.size(); ++l) {
    if (tables[l].rows() != category_counts[l] || tables[l].cols() != k) {
      throw ValidationError("item " + std::to_string(l + 1) + " table is " +
                            std::to_string(tables[l].rows()) + "x" + std::to_string(tables[l].cols()) +
                            ", expected " + std::to_string(category_counts[l]) + "x" + std::to_string(k));
    }
    for (Index col = 0; col < k; ++col) {
      if (std::abs(tables[l].col(col).sum() - 1.0) > 1e-9) {
        throw ValidationError("item " + std::to_string(l + 1) + " profile " + std::to_string(col + 1) +
                              " probabilities do not sum to 1");
      }
    }
    j += category_counts[l];
  }
  Eigen::MatrixXd out(j, k);
  Index offset = 0;
  for (const auto& table : tables) {
    out.middleRows(offset, table.rows()) = table;
    offset += table.rows();
  }
  return out;
}

std::vector<Eigen::MatrixXd> unflatten_params(const Eigen::MatrixXd& item_params,
                                              const BlockPartition& partition) {
  if (partition.num_columns() != item_params.rows()) {
    throw ValidationError("partition covers " + std::to_string(partition.num_columns()) +
                          " columns but item matrix has " + std::to_string(item_params.rows()) + " rows");
  }
  std::vector<Eigen::MatrixXd> tables;
  tables.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (Index l = 0; l < partition.num_blocks(); ++l) {
    tables.emplace_back(item_params.middleRows(partition.begin(l), partition.size(l)));
  }
  return tables;
}

namespace {

Issue make_issue(std::string kind, Index row, Index block, Index column, std::string message) {
  return Issue{std::move(kind), row, block, column, std::move(message)};
}

}  // namespace

ValidationReport validate(const FlatMatrix& flat) {
  ValidationReport report;
  const auto& v = flat.values;
  if (flat.partition.num_columns() != v.cols()) {
    report.violations.push_back(make_issue("partition", -1, -1, -1,
                                           "partition covers " + std::to_string(flat.partition.num_columns()) +
                                               " columns, matrix has " + std::to_string(v.cols())));
    return report;
  }
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      const double x = v(i, j);
      const auto where = "(" + std::to_string(i + 1) + ", " + std::to_string(j + 1) + ")";
      if (!std::isfinite(x)) {
        report.violations.push_back(make_issue("non-finite", i, -1, j, "non-finite entry at " + where));
        continue;
      }
      switch (flat.family) {
        case DataFamily::kPolytomous:
        case DataFamily::kBernoulli:
          if (x != 0.0 && x != 1.0) {
            report.violations.push_back(make_issue("binary", i, -1, j, "non-binary entry at " + where));
          }
          break;
        case DataFamily::kBinomial:
          if (x != 0.0 && x != 0.5 && x != 1.0) {
            report.violations.push_back(
                make_issue("binomial", i, -1, j, "entry at " + where + " not in {0, 0.5, 1}"));
          }
          break;
        case DataFamily::kPoisson:
          if (x < 0.0) {
            report.violations.push_back(make_issue("nonnegative", i, -1, j, "negative count at " + where));
          } else if (x != std::floor(x)) {
            report.violations.push_back(make_issue("integer", i, -1, j, "non-integer count at " + where));
          }
          break;
      }
    }
  }
  if (flat.family == DataFamily::kPolytomous) {
    for (Index l = 0; l < flat.partition.num_blocks(); ++l) {
      const auto block = v.middleCols(flat.partition.begin(l), flat.partition.size(l));
      for (Index i = 0; i < v.rows(); ++i) {
        const double s = block.row(i).sum();
        if (s != 1.0) {
          report.violations.push_back(make_issue("block-sum", i, l, -1,
                                                 "row " + std::to_string(i + 1) + " block " +
                                                     std::to_string(l + 1) + " sums to " + std::to_string(s)));
        }
      }
      for (Index c = 0; c < block.cols(); ++c) {
        if (v.rows() > 0 && (block.col(c).array() == 0.0).all()) {
          report.warnings.push_back(make_issue("empty-category", -1, l, flat.partition.begin(l) + c,
                                               "item " + std::to_string(l + 1) + " category " +
                                                   std::to_string(c + 1) + " never observed"));
        }
      }
    }
  }
  return report;
}

ValidationReport validate(const ModelParams& params, double tolerance) {
  ValidationReport report;
  const auto& pi = params.memberships;
  const auto& theta = params.item_params;
  if (pi.cols() != theta.cols()) {
    report.violations.push_back(make_issue("shape", -1, -1, -1, "memberships and item_params disagree on K"));
    return report;
  }
  for (Index i = 0; i < pi.rows(); ++i) {
    if ((pi.row(i).array() < 0.0).any()) {
      report.violations.push_back(
          make_issue("simplex", i, -1, -1, "membership row " + std::to_string(i + 1) + " has a negative entry"));
    }
    if (std::abs(pi.row(i).sum() - 1.0) > tolerance) {
      report.violations.push_back(
          make_issue("simplex", i, -1, -1, "membership row " + std::to_string(i + 1) + " does not sum to 1"));
    }
  }
  const bool probability = params.family != DataFamily::kPoisson;
  for (Index j = 0; j < theta.rows(); ++j) {
    for (Index k = 0; k < theta.cols(); ++k) {
      const double x = theta(j, k);
      if (x < 0.0 || (probability && x > 1.0) || !std::isfinite(x)) {
        report.violations.push_back(make_issue("range", j, -1, k,
                                               "item parameter (" + std::to_string(j + 1) + ", " +
                                                   std::to_string(k + 1) + ") out of range"));
      }
    }
  }
  if (params.family == DataFamily::kPolytomous) {
    if (params.partition.num_columns() != theta.rows()) {
      report.violations.push_back(make_issue("partition", -1, -1, -1, "partition does not match item_params"));
      return report;
    }
    for (Index l = 0; l < params.partition.num_blocks(); ++l) {
      for (Index k = 0; k < theta.cols(); ++k) {
        const double s = theta.col(k).segment(params.partition.begin(l), params.partition.size(l)).sum();
        if (std::abs(s - 1.0) > tolerance) {
          report.violations.push_back(make_issue("block-sum", -1, l, k,
                                                 "item " + std::to_string(l + 1) + " profile " +
                                                     std::to_string(k + 1) + " sums to " + std::to_string(s)));
        }
      }
    }
  }
  return report;
}

FlatMatrix halve_binomial(const Eigen::MatrixXd& counts) {
  for (Index i = 0; i < counts.rows(); ++i) {
    for (Index j = 0; j < counts.cols(); ++j) {
      const double x = counts(i, j);
      if (x != 0.0 && x != 1.0 && x != 2.0) {
        throw ValidationError("binomial count at (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                              ") is not in {0, 1, 2}");
      }
    }
  }
  FlatMatrix flat;
  flat.values = 0.5 * counts;
  flat.partition = BlockPartition::singletons(counts.cols());
  flat.family = DataFamily::kBinomial;
  return flat;
}

}  // namespace ggom

#include <doctest.h>

#include <random>

#include "ggom/data_model.hpp"
#include "ggom/errors.hpp"
#include "support.hpp"

using namespace ggom;

namespace {

QuasiTensor make_quasi(std::initializer_list<std::initializer_list<int>> rows, std::vector<int> counts) {
  QuasiTensor q;
  q.responses.resize(static_cast<Index>(rows.size()), static_cast<Index>(counts.size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index l = 0;
    for (int v : row) q.responses(i, l++) = v;
    ++i;
  }
  q.category_counts = std::move(counts);
  return q;
}

// Inverse of flatten: the position of the one in each block, 1-based.
Eigen::MatrixXi argmax_blocks(const FlatMatrix& flat) {
  Eigen::MatrixXi out(flat.rows(), flat.partition.num_blocks());
  for (Index i = 0; i < flat.rows(); ++i) {
    for (Index l = 0; l < flat.partition.num_blocks(); ++l) {
      Index c = 0;
      flat.values.row(i).segment(flat.partition.begin(l), flat.partition.size(l)).maxCoeff(&c);
      out(i, l) = static_cast<int>(c) + 1;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("flatten one subject with mixed category counts") {
  const FlatMatrix flat = flatten(make_quasi({{2, 1}}, {3, 2}));
  Eigen::RowVectorXd expected(5);
  expected << 0, 1, 0, 1, 0;
  CHECK(flat.values.row(0) == expected);
  CHECK(flat.family == DataFamily::kPolytomous);
  CHECK(flat.partition.num_blocks() == 2);
  CHECK(flat.partition.size(0) == 3);
  CHECK(flat.partition.max_block() == 3);
}

TEST_CASE("flatten a single binary item is identity-like") {
  const FlatMatrix flat = flatten(make_quasi({{1}, {2}}, {2}));
  CHECK(flat.values == Eigen::Matrix2d::Identity());
}

TEST_CASE("flatten round-trips through argmax per block") {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> cat(1, 3);
  QuasiTensor q;
  q.responses.resize(5, 4);
  q.category_counts = {3, 3, 3, 3};
  for (Index i = 0; i < 5; ++i)
    for (Index l = 0; l < 4; ++l) q.responses(i, l) = cat(gen);
  const FlatMatrix flat = flatten(q);
  for (Index l = 0; l < 4; ++l) {
    CHECK((flat.values.middleCols(flat.partition.begin(l), 3).rowwise().sum().array() == 1.0).all());
  }
  CHECK(argmax_blocks(flat) == q.responses);
  CHECK(validate(flat).ok());
}

TEST_CASE("out-of-range category names the subject and item") {
  const QuasiTensor q = make_quasi({{1, 2}, {1, 4}}, {2, 3});
  CHECK_THROWS_AS(flatten(q), ValidationError);
  try {
    check(q);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("(2, 2)") != std::string::npos);
  }
  CHECK_THROWS_AS(check(make_quasi({{0}}, {2})), ValidationError);
  CHECK_THROWS_AS(check(make_quasi({{1}}, {1})), ValidationError);
}

TEST_CASE("flatten_params stacks item tables") {
  Eigen::MatrixXd t(2, 1);
  t << 0.2, 0.8;
  CHECK(flatten_params({t}, {2}) == t);

  const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(2, 1, 0.5);
  CHECK(flatten_params({u, u}, {2, 2}) == Eigen::MatrixXd::Constant(4, 1, 0.5));

  CHECK_THROWS_AS(flatten_params({u}, {3}), ValidationError);
  CHECK_THROWS_AS(flatten_params({u, u}, {2}), ValidationError);
}

TEST_CASE("flattened random tables satisfy the block-sum invariant and unflatten") {
  CounterRng rng(5);
  const std::vector<int> counts{2, 4, 3};
  std::vector<Eigen::MatrixXd> tables;
  for (int c : counts) tables.push_back(sample_dirichlet(Eigen::VectorXd::Constant(c, 0.7), 3, rng).transpose());
  ModelParams p;
  p.family = DataFamily::kPolytomous;
  p.item_params = flatten_params(tables, counts);
  p.partition = BlockPartition::from_sizes(counts);
  p.memberships = sample_dirichlet(Eigen::VectorXd::Ones(3), 10, rng);
  CHECK(validate(p).ok());

  const auto back = unflatten_params(p.item_params, p.partition);
  REQUIRE(back.size() == tables.size());
  for (std::size_t l = 0; l < tables.size(); ++l) CHECK(back[l] == tables[l]);

  // Each row-block of the mean matrix is a probability vector.
  const Eigen::MatrixXd mean = p.mean();
  for (Index l = 0; l < p.partition.num_blocks(); ++l) {
    const Eigen::VectorXd sums = mean.middleCols(p.partition.begin(l), p.partition.size(l)).rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("validate reports constructed violations") {
  FlatMatrix ok = flatten(make_quasi({{1, 2}, {2, 1}}, {2, 2}));
  CHECK(validate(ok).ok());
  CHECK(validate(ok).warnings.empty());

  FlatMatrix doubled = ok;
  doubled.values(1, 0) = 1.0;  // row 2, block 1 now sums to 2
  const auto report = validate(doubled);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].kind == "block-sum");
  CHECK(report.violations[0].row == 1);
  CHECK(report.violations[0].block == 0);

  FlatMatrix pois;
  pois.family = DataFamily::kPoisson;
  pois.values = Eigen::MatrixXd::Ones(2, 2);
  pois.values(0, 1) = -1.0;
  pois.partition = BlockPartition::singletons(2);
  const auto pr = validate(pois);
  REQUIRE(pr.violations.size() == 1);
  CHECK(pr.violations[0].kind == "nonnegative");

  pois.values(0, 1) = 0.5;
  CHECK(validate(pois).violations.at(0).kind == "integer");
}

TEST_CASE("a never-chosen category is a warning, not a violation") {
  const FlatMatrix flat = flatten(make_quasi({{1}, {1}}, {3}));
  const auto report = validate(flat);
  CHECK(report.ok());
  CHECK(report.warnings.size() == 2);
  CHECK(report.warnings[0].kind == "empty-category");
}

TEST_CASE("validate on model params") {
  ModelParams p;
  p.family = DataFamily::kBernoulli;
  p.memberships = Eigen::MatrixXd::Constant(2, 2, 0.5);
  p.item_params = Eigen::MatrixXd::Constant(3, 2, 0.3);
  p.partition = BlockPartition::singletons(3);
  CHECK(validate(p).ok());
  p.item_params(0, 0) = 1.5;
  CHECK(validate(p).violations.size() == 1);
  p.family = DataFamily::kPoisson;
  CHECK(validate(p).ok());
  p.memberships(0, 0) = 0.6;
  CHECK_FALSE(validate(p).ok());
}

TEST_CASE("binomial counts are halved") {
  Eigen::MatrixXd counts(2, 3);
  counts << 0, 1, 2, 2, 1, 0;
  const FlatMatrix flat = halve_binomial(counts);
  CHECK(flat.family == DataFamily::kBinomial);
  CHECK(flat.values == 0.5 * counts);
  CHECK(validate(flat).ok());
  counts(0, 0) = 3;
  CHECK_THROWS_AS(halve_binomial(counts), ValidationError);
}

TEST_CASE("block partitions") {
  const auto p = BlockPartition::uniform(6, 3);
  CHECK(p.num_blocks() == 2);
  CHECK(p.block_of(4) == 1);
  CHECK(p.end(1) == 6);
  CHECK(BlockPartition::singletons(4).max_block() == 1);
  CHECK(BlockPartition::from_sizes(std::vector<int>{3, 3}) == p);
  CHECK_THROWS(BlockPartition::uniform(7, 3));
}

TEST_CASE("family names") {
  for (auto f : {DataFamily::kPolytomous, DataFamily::kBernoulli, DataFamily::kBinomial, DataFamily::kPoisson}) {
    CHECK(parse_family(to_string(f)) == f);
  }
  CHECK_THROWS_AS(parse_family("gaussian"), UsageError);
}

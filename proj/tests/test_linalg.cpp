#include <doctest.h>

#include "ggom/errors.hpp"
#include "ggom/linalg.hpp"
#include "support.hpp"

using namespace ggom;
using testing::gaussian;

namespace {

double orthonormality_error(const Eigen::MatrixXd& q) {
  return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("truncated SVD of a padded diagonal") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m.diagonal().head(3) << 3, 2, 1;
  const auto f = truncated_svd(m, 2);
  CHECK(f.singular_values(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(f.singular_values(1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK((m - f.reconstruct()).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("truncated SVD of an outer product") {
  Eigen::VectorXd u(3), v(4);
  u << 0, 2, 0;     // norm 2
  v << 3, 0, 4, 0;  // norm 5
  const Eigen::MatrixXd m = u * v.transpose();
  const auto f = truncated_svd(m, 1);
  CHECK(f.singular_values(0) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK((m - f.reconstruct()).norm() < 1e-12);
  CHECK(f.U(1, 0) == doctest::Approx(1.0));  // sign convention
}

TEST_CASE("truncated SVD matches the Gram eigendecomposition on a Gaussian matrix") {
  const Eigen::MatrixXd m = gaussian(50, 30, 1);
  const auto f = truncated_svd(m, 5);
  const Eigen::VectorXd s = testing::gram_singular_values(m);
  CHECK((f.singular_values - s.head(5)).cwiseAbs().maxCoeff() <= 1e-10 * s(0));
  REQUIRE(s(4) - s(5) > 1e-3);
  const Eigen::MatrixXd diff = f.V * f.V.transpose() - testing::gram_right_projector(m, 5);
  CHECK(spectral_norm(diff) <= 1e-8);
  CHECK(orthonormality_error(f.U) <= 1e-10);
  CHECK(orthonormality_error(f.V) <= 1e-10);
  // Optimal rank-5 residual.
  const double optimal = std::sqrt(s.tail(s.size() - 5).squaredNorm());
  CHECK((m - f.reconstruct()).norm() == doctest::Approx(optimal).epsilon(1e-8));
}

TEST_CASE("randomized path agrees with the oracle on a low-rank-plus-noise matrix") {
  const Eigen::MatrixXd m = gaussian(300, 5, 2) * gaussian(5, 200, 3) * 10.0 + 0.01 * gaussian(300, 200, 4);
  const auto f = truncated_svd(m, 5);
  const auto o = dense_svd_oracle(m);
  CHECK((f.singular_values - o.singular_values.head(5)).cwiseAbs().maxCoeff() <= 1e-10 * o.singular_values(0));
  const Eigen::MatrixXd uo = o.U.leftCols(5);
  CHECK(spectral_norm(Eigen::MatrixXd(f.U * f.U.transpose() - uo * uo.transpose())) <= 1e-8);
  CHECK(orthonormality_error(f.U) <= 1e-10);
  CHECK(orthonormality_error(f.V) <= 1e-10);
  CHECK_FALSE(f.gap_warning);
  // The sketch estimates sigma_{K+1} from below.
  CHECK(f.next_singular_value <= o.singular_values(5));
  CHECK(f.next_singular_value >= 0.5 * o.singular_values(5));
}

TEST_CASE("SVD output properties") {
  const Eigen::MatrixXd m = gaussian(120, 90, 9);
  const auto a = truncated_svd(m, 6);
  const auto b = truncated_svd(m, 6);
  CHECK(a.U == b.U);  // bitwise determinism
  CHECK(a.singular_values == b.singular_values);
  for (Index k = 1; k < 6; ++k) CHECK(a.singular_values(k) <= a.singular_values(k - 1));
  CHECK(a.singular_values.minCoeff() >= 0.0);
  for (Index k = 0; k < 6; ++k) {
    Index first = 0;
    while (a.U(first, k) == 0.0) ++first;
    CHECK(a.U(first, k) > 0.0);
  }
  const auto full = truncated_svd(m, 90);
  CHECK((m - full.reconstruct()).norm() <= 1e-8 * m.norm());
}

TEST_CASE("gap warning on repeated singular values") {
  const auto f = truncated_svd(Eigen::MatrixXd::Identity(5, 5), 2);
  CHECK(f.gap_warning);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(5, 5);
  d.diagonal() << 5, 4, 3, 2, 1;
  CHECK_FALSE(truncated_svd(d, 2).gap_warning);
}

TEST_CASE("SVD input errors") {
  const Eigen::MatrixXd m = gaussian(5, 4, 1);
  CHECK_THROWS_AS(truncated_svd(m, 0), ValidationError);
  CHECK_THROWS_AS(truncated_svd(m, 5), ValidationError);
  Eigen::MatrixXd bad = m;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(truncated_svd(bad, 2), ValidationError);
  CHECK_THROWS_AS(spectral_norm(bad), ValidationError);
  CHECK_THROWS_AS(dense_svd_oracle(Eigen::MatrixXd::Zero(501, 501)), ValidationError);
}

TEST_CASE("dense oracle examples") {
  CHECK(dense_svd_oracle(Eigen::MatrixXd::Identity(3, 3)).singular_values == Eigen::Vector3d::Ones());
  CHECK(dense_svd_oracle(Eigen::MatrixXd::Zero(3, 2)).singular_values == Eigen::Vector2d::Zero());
  Eigen::MatrixXd h(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) h(i, j) = 1.0 / static_cast<double>(i + j + 1);
  CHECK((h - dense_svd_oracle(h).reconstruct()).norm() <= 1e-9 * h.norm());
}

TEST_CASE("spectral norm") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d.diagonal() << 4, 1;
  CHECK(spectral_norm(d) == doctest::Approx(4.0).epsilon(1e-8));
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(6, 1, 6), v = Eigen::VectorXd::LinSpaced(4, -2, 3);
  CHECK(spectral_norm(Eigen::MatrixXd(u * v.transpose())) == doctest::Approx(u.norm() * v.norm()).epsilon(1e-8));
  const Eigen::MatrixXd g = gaussian(40, 20, 8);
  CHECK(spectral_norm(g) == doctest::Approx(testing::gram_singular_values(g)(0)).epsilon(1e-8));
  CHECK(spectral_norm(Eigen::MatrixXd::Zero(3, 3)) == 0.0);
}

TEST_CASE("templated on scalar type") {
  const Eigen::MatrixXf m = gaussian(20, 10, 3).cast<float>();
  const auto f = truncated_svd(m, 3);
  static_assert(std::is_same_v<decltype(f.singular_values(0)), const float&> ||
                std::is_same_v<std::decay_t<decltype(f.singular_values(0))>, float>);
  CHECK(f.singular_values(0) == doctest::Approx(testing::gram_singular_values(m.cast<double>())(0)).epsilon(1e-4));
}

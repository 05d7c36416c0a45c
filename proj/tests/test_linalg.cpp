#include <doctest.h>

#include <random>

#include "lhb/linalg.hpp"
#include "lhb/rng.hpp"
#include "oracles.hpp"

using namespace lhb;

namespace {

MatrixXd gaussian_matrix(long r, long c, std::uint64_t seed) {
  KeyedRng rng(seed);
  std::normal_distribution<double> n(0, 1);
  MatrixXd m(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("block norms") {
  VectorXd x(4);
  x << 3, 4, 0, 0;
  CHECK(block_norm21(x, 2) == doctest::Approx(5));
  CHECK(block_norm2inf(x, 2) == doctest::Approx(5));
  CHECK(block_norm20(x, 2) == 1);
  CHECK(block_norm21(VectorXd::Zero(6).eval(), 3) == 0);

  // ||x||_2 <= ||x||_{2,1} <= sqrt(n) ||x||_2
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const VectorXd v = gaussian_matrix(12, 1, seed);
    for (long d : {1, 2, 3, 4, 6}) {
      const double n21 = block_norm21(v, d);
      CHECK(v.norm() <= n21 + 1e-12);
      CHECK(n21 <= std::sqrt(12.0 / d) * v.norm() + 1e-12);
    }
  }
}

TEST_CASE("BlockVector rejects a length the block size does not divide") {
  CHECK_THROWS_AS(BlockVector<double>(VectorXd::Zero(5), 2), std::invalid_argument);
}

TEST_CASE("matricize and vectorize") {
  VectorXd v(4);
  v << 1, 2, 3, 4;
  const MatrixXd m = matricize(BlockVector<double>(v, 2));
  MatrixXd expect(2, 2);
  expect << 1, 3, 2, 4;
  CHECK(m == expect);
  CHECK(vectorize(m).data() == v);

  VectorXd theta(3), w(4);
  theta << 1, -2, 0.5;
  w << 0.1, 0, 0.7, 0.2;
  VectorXd kron(12);
  for (long k = 0; k < 4; ++k) kron.segment(3 * k, 3) = w(k) * theta;
  CHECK((matricize(BlockVector<double>(kron, 3)) - theta * w.transpose()).norm() < 1e-15);
}

TEST_CASE("top singular triplet") {
  SUBCASE("exact rank one") {
    MatrixXd m(2, 3);
    m << 0, 1, 0, 0, 0, 0;
    const auto t = top_singular_triplet(m);
    CHECK(t.sigma == doctest::Approx(1));
    CHECK(t.left(0) == doctest::Approx(1));
    CHECK(std::abs(t.left(1)) < 1e-12);
  }
  SUBCASE("tied singular values") {
    const auto t = top_singular_triplet(MatrixXd::Identity(2, 2).eval());
    CHECK(t.sigma == doctest::Approx(1));
    CHECK(t.left.norm() == doctest::Approx(1));
  }
  SUBCASE("random matrix against Jacobi SVD") {
    const MatrixXd m = gaussian_matrix(5, 20, 42);
    const auto t = top_singular_triplet(m, 1e-14, 100000);
    const auto ref = oracle::jacobi_svd(m);
    CHECK(std::abs(t.sigma - ref.sigma(0)) < 1e-8);
    CHECK(sin_angle(t.left, ref.u.col(0)) < 1e-8);
    CHECK(sin_angle(t.right, ref.v.col(0)) < 1e-8);
  }
  SUBCASE("rank one input recovers theta") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const VectorXd theta = gaussian_matrix(4, 1, seed);
      const VectorXd w = gaussian_matrix(30, 1, seed + 100);
      const auto t = top_singular_triplet((theta * w.transpose()).eval());
      CHECK(sin_angle(t.left, theta) <= 1e-8);
    }
  }
  SUBCASE("degenerate input") {
    CHECK_THROWS_AS(top_singular_triplet(MatrixXd::Zero(3, 3).eval()), NumericalError);
    MatrixXd bad = MatrixXd::Ones(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(top_singular_triplet(bad), NumericalError);
  }
}

TEST_CASE("Jacobi oracle agrees with Eigen") {
  const MatrixXd m = gaussian_matrix(7, 4, 3);
  const auto ref = oracle::jacobi_svd(m);
  Eigen::JacobiSVD<MatrixXd> svd(m);
  CHECK((ref.sigma - svd.singularValues()).norm() < 1e-12);
  CHECK((ref.u * ref.sigma.asDiagonal() * ref.v.transpose() - m).norm() < 1e-12);
}

TEST_CASE("toeplitz products match the dense design") {
  SUBCASE("no memory") {
    const MatrixXd ctx = gaussian_matrix(3, 5, 1);
    const VectorXd phi = gaussian_matrix(3, 1, 2);
    const std::vector<long> times{1, 2, 3, 4, 5};
    const VectorXd out = toeplitz_matvec(ctx, BlockVector<double>(phi, 3), times);
    for (long t = 1; t <= 5; ++t) CHECK(out(t - 1) == doctest::Approx(ctx.col(t - 1).dot(phi)));
  }
  SUBCASE("zero phi") {
    const MatrixXd ctx = gaussian_matrix(2, 8, 1);
    const std::vector<long> times{3, 5, 8};
    CHECK(toeplitz_matvec(ctx, BlockVector<double>::Zero(4, 2), times).isZero());
  }
  SUBCASE("random instances") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const long d = 1 + static_cast<long>(seed % 4);
      const long h = 2 + static_cast<long>(seed % 7);
      const long rounds = 30;
      const MatrixXd ctx = gaussian_matrix(d, rounds, seed);
      std::vector<long> times;
      for (long t = 1; t <= rounds; t += 1 + static_cast<long>(seed % 3)) times.push_back(t);
      const MatrixXd dense = oracle::dense_design(ctx, times, h);
      const VectorXd phi = gaussian_matrix(h * d, 1, seed + 7);
      const VectorXd r = gaussian_matrix(static_cast<long>(times.size()), 1, seed + 9);
      const VectorXd fwd = toeplitz_matvec(ctx, BlockVector<double>(phi, d), times);
      CHECK((fwd - dense * phi).norm() <= 1e-10 * std::max(1.0, (dense * phi).norm()));
      const VectorXd adj = toeplitz_rmatvec(ctx, r, times, h).data();
      CHECK((adj - dense.transpose() * r).norm() <= 1e-10 * std::max(1.0, adj.norm()));
      CHECK((toeplitz_rows(ctx, times, h) - dense).norm() == 0);
    }
  }
  SUBCASE("small worked example") {
    const MatrixXd ctx = gaussian_matrix(2, 10, 5);
    const std::vector<long> times{2, 4, 5, 7, 9, 10};
    const VectorXd phi = gaussian_matrix(8, 1, 6);
    const VectorXd fwd = toeplitz_matvec(ctx, BlockVector<double>(phi, 2), times);
    CHECK((fwd - oracle::dense_design(ctx, times, 4) * phi).norm() < 1e-12);
  }
  SUBCASE("mismatched block size") {
    const MatrixXd ctx = gaussian_matrix(3, 4, 1);
    const std::vector<long> times{1};
    CHECK_THROWS_AS(toeplitz_matvec(ctx, BlockVector<double>::Zero(2, 2), times),
                    std::invalid_argument);
    const std::vector<long> late{9};
    CHECK_THROWS_AS(toeplitz_matvec(ctx, BlockVector<double>::Zero(2, 3), late), std::out_of_range);
  }
}

TEST_CASE("sin angle") {
  VectorXd a(2), b(2);
  a << 1, 0;
  b << -3, 0;
  CHECK(sin_angle(a, b) == 0);
  b << 0, 2;
  CHECK(sin_angle(a, b) == doctest::Approx(1));
  CHECK(sin_angle(a, VectorXd::Zero(2).eval()) == 1);
}

TEST_CASE("keyed rng is reproducible and stream-separated") {
  KeyedRng a(7, Stream::noise, 3), b(7, Stream::noise, 3), c(7, Stream::noise, 4);
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
  KeyedRng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform01();
    CHECK(v >= 0);
    CHECK(v < 1);
  }
}

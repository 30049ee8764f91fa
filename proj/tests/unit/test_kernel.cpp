#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <vector>

#include "itrbal/kernel.hpp"
#include "itrbal/rng.hpp"

using namespace itrbal;

TEST_SUITE("kernel") {

TEST_CASE("median heuristic: median of three collinear points") {
  Matrix X(3, 1);
  X << 0.0, 1.0, 3.0;  // pairwise distances {1, 2, 3}
  CHECK(median_heuristic(X) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("median heuristic: single pair") {
  Matrix X(2, 2);
  X << 0.0, 0.0, 3.0, 4.0;
  CHECK(median_heuristic(X) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("median heuristic matches the sort-all-pairs oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 20;
    Matrix X(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();

    std::vector<double> dists;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) dists.push_back((X.row(i) - X.row(j)).norm());
    std::sort(dists.begin(), dists.end());
    const size_t m = dists.size();
    const double oracle = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);

    CHECK(median_heuristic(X) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("median heuristic rejects degenerate covariates") {
  Matrix X = Matrix::Ones(4, 2);
  CHECK_THROWS_WITH_AS(median_heuristic(X), doctest::Contains("degenerate"),
                       std::invalid_argument);
}

TEST_CASE("gram diagonal is exactly one") {
  Rng rng(7);
  Matrix X(6, 2);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 2; ++j) X(i, j) = rng.normal();
  const Matrix K = gram(X, KernelSpec{KernelFamily::gaussian, 1.5});
  for (Index i = 0; i < 6; ++i) CHECK(K(i, i) == 1.0);
}

TEST_CASE("gaussian kernel closed form") {
  Vector x(2), y(2);
  x << 0.0, 0.0;
  y << 0.0, 2.0;
  const KernelSpec spec{KernelFamily::gaussian, 2.0};
  CHECK(kernel_value(spec, x, y) == doctest::Approx(0.60653065971263342).epsilon(1e-12));
}

TEST_CASE("8x8 gram minimum eigenvalue within numerical PSD tolerance") {
  Rng rng(13);
  Matrix X(8, 4);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 4; ++j) X(i, j) = rng.uniform(-2.0, 2.0);
  const Matrix K = gram(X, KernelSpec{KernelFamily::gaussian, 0.8});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("gram(X, X) equals its transpose bit-wise") {
  Rng rng(19);
  Matrix X(12, 3);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
  const Matrix K = gram(X, KernelSpec{KernelFamily::gaussian, 1.0});
  const Matrix Kt = K.transpose();
  CHECK((K - Kt).cwiseAbs().maxCoeff() == 0.0);
  // two-argument form on the same matrix is symmetric as well
  const Matrix K2 = gram(X, X, KernelSpec{KernelFamily::gaussian, 1.0});
  CHECK((K2 - Matrix(K2.transpose())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("positive semidefiniteness on random instances up to n = 50") {
  Rng rng(23);
  for (const int n : {5, 17, 50}) {
    Matrix X(n, 4);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 4; ++j) X(i, j) = rng.uniform(-2.0, 2.0);
    const Matrix K = gram(X, KernelSpec{KernelFamily::gaussian, median_heuristic(X)});
    Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("scale law: doubling the bandwidth equals halving all coordinates") {
  Rng rng(29);
  const KernelSpec narrow{KernelFamily::gaussian, 0.7};
  const KernelSpec wide{KernelFamily::gaussian, 1.4};
  for (int i = 0; i < 30; ++i) {
    Vector x(3), y(3);
    for (int j = 0; j < 3; ++j) {
      x[j] = rng.normal();
      y[j] = rng.normal();
    }
    CHECK(kernel_value(wide, x, y) ==
          doctest::Approx(kernel_value(narrow, (x / 2).eval(), (y / 2).eval())).epsilon(1e-14));
  }
}

TEST_CASE("dimension mismatch and invalid bandwidth raise") {
  Matrix A = Matrix::Zero(2, 3);
  Matrix B = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(gram(A, B, KernelSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(validate(KernelSpec{KernelFamily::gaussian, -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(KernelSpec{KernelFamily::gaussian, 0.0}), std::invalid_argument);
}

}  // TEST_SUITE

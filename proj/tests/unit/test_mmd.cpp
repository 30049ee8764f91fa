#include <doctest.h>

#include <cmath>

#include "itrbal/mmd.hpp"
#include "test_helpers.hpp"

using namespace itrbal;

namespace {

/// Independent double-loop V-statistic oracle.
double mmd_oracle(const Matrix& xp, const Vector& p, const Matrix& xq, const Vector& q,
                  const KernelSpec& spec) {
  double acc = 0.0;
  for (Index i = 0; i < xp.rows(); ++i)
    for (Index j = 0; j < xp.rows(); ++j)
      acc += p[i] * p[j] * kernel_value(spec, xp.row(i).transpose(), xp.row(j).transpose());
  for (Index i = 0; i < xq.rows(); ++i)
    for (Index j = 0; j < xq.rows(); ++j)
      acc += q[i] * q[j] * kernel_value(spec, xq.row(i).transpose(), xq.row(j).transpose());
  for (Index i = 0; i < xp.rows(); ++i)
    for (Index j = 0; j < xq.rows(); ++j)
      acc -= 2.0 * p[i] * q[j] * kernel_value(spec, xp.row(i).transpose(), xq.row(j).transpose());
  return acc;
}

WeightedSample random_sample(int m, int p, Rng& rng) {
  Matrix X(m, p);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  Vector mass(m);
  for (int i = 0; i < m; ++i) mass[i] = -std::log(1.0 - rng.uniform01());
  mass /= mass.sum();
  return WeightedSample(std::move(X), std::move(mass));
}

}  // namespace

TEST_SUITE("mmd") {

TEST_CASE("identical samples have zero discrepancy") {
  Rng rng(41);
  const WeightedSample P = random_sample(6, 2, rng);
  const WeightedSample Q = P;
  CHECK(mmd_squared(P, Q, KernelSpec{}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two atoms: 2 - 2K(x, y)") {
  Matrix xp(1, 2), xq(1, 2);
  xp << 0.5, -0.25;
  xq << -1.0, 2.0;
  const KernelSpec spec{KernelFamily::gaussian, 1.3};
  const WeightedSample P(xp, Vector::Ones(1));
  const WeightedSample Q(xq, Vector::Ones(1));
  const double expected = 2.0 - 2.0 * kernel_value(spec, xp.row(0).transpose(), xq.row(0).transpose());
  CHECK(mmd_squared(P, Q, spec) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("matches the double-loop oracle on random 5-point samples") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedSample P = random_sample(5, 3, rng);
    const WeightedSample Q = random_sample(5, 3, rng);
    const KernelSpec spec{KernelFamily::gaussian, 0.9};
    const double oracle = mmd_oracle(P.points, P.mass, Q.points, Q.mass, spec);
    CHECK(mmd_squared(P, Q, spec) == doctest::Approx(std::max(oracle, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("symmetry") {
  Rng rng(47);
  const WeightedSample P = random_sample(7, 2, rng);
  const WeightedSample Q = random_sample(4, 2, rng);
  const KernelSpec spec{KernelFamily::gaussian, 1.1};
  CHECK(mmd_squared(P, Q, spec) == doctest::Approx(mmd_squared(Q, P, spec)).epsilon(1e-14));
}

TEST_CASE("strictly positive for disjoint supports") {
  Matrix xp(3, 1), xq(3, 1);
  xp << 0.0, 0.1, 0.2;
  xq << 5.0, 5.1, 5.2;
  const WeightedSample P(xp, Vector::Constant(3, 1.0 / 3));
  const WeightedSample Q(xq, Vector::Constant(3, 1.0 / 3));
  CHECK(mmd_squared(P, Q, KernelSpec{}) > 0.1);
}

TEST_CASE("mass validation") {
  Matrix x = Matrix::Zero(2, 1);
  Vector bad(2);
  bad << 0.7, 0.4;
  CHECK_THROWS_AS(WeightedSample(x, bad), std::invalid_argument);
  bad << 1.2, -0.2;
  CHECK_THROWS_AS(WeightedSample(x, bad), std::invalid_argument);
  Matrix x3 = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(mmd_squared(WeightedSample(x, Vector::Constant(2, 0.5)),
                              WeightedSample(x3, Vector::Constant(3, 1.0 / 3)), KernelSpec{}),
                  std::invalid_argument);
}

TEST_CASE("group_mmds: treated block equal to target gives mmd_t1 = 0") {
  // treated rows and target rows share the same points; uniform weights
  Matrix X(5, 2);
  X << 0.1, 0.2, 0.9, -0.4, 0.1, 0.2, 0.9, -0.4, 0.5, 0.5;
  // rows: treated {0,1}, control {4}, target {2,3} == treated points
  const Dataset d(X, {1, 1, 0, 0, 1}, {1, 1, std::nullopt, std::nullopt, 0},
                  {0.3, 0.4, std::nullopt, std::nullopt, 0.5});
  Vector w(3);
  w << 1.5, 1.5, 3.0;  // sums: treated 3 = n_s, control 3 = n_s
  const auto mmds = group_mmds(d, w, KernelSpec{});
  CHECK(mmds[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("group_mmds: uniform weights with treated == control gives mmd_10 = 0") {
  Matrix X(5, 2);
  X << 0.1, 0.2, 0.9, -0.4, 0.1, 0.2, 0.9, -0.4, 0.5, 0.5;
  // treated {0,1}, control {2,3} with identical points, target {4}
  const Dataset d(X, {1, 1, 1, 1, 0}, {1, 1, 0, 0, std::nullopt},
                  {0.3, 0.4, 0.1, 0.2, std::nullopt});
  Vector w = Vector::Constant(4, 2.0);  // each group sums to n_s = 4
  const auto mmds = group_mmds(d, w, KernelSpec{});
  CHECK(mmds[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("group_mmds matches direct mmd_squared calls (compositional oracle)") {
  Rng rng(53);
  const Dataset d = testing::random_dataset(6, 5, 4, 59);
  const Vector w = testing::random_feasible_weights(d, rng);
  const KernelSpec spec{KernelFamily::gaussian, 1.4};
  const auto mmds = group_mmds(d, w, spec);

  const auto& g = d.groups();
  const double ns = static_cast<double>(d.n_source());
  auto block = [&](const std::vector<Index>& rows) {
    Matrix M(static_cast<Index>(rows.size()), d.dim());
    for (Index i = 0; i < M.rows(); ++i) M.row(i) = d.covariates().row(rows[static_cast<size_t>(i)]);
    return M;
  };
  Vector w1(static_cast<Index>(g.s1.size())), w0(static_cast<Index>(g.s0.size()));
  {
    Index i1 = 0, i0 = 0;
    const auto& rows = d.source_rows();
    for (Index k = 0; k < d.n_source(); ++k) {
      if (*d.treatment(rows[static_cast<size_t>(k)]) == 1) w1[i1++] = w[k];
      else w0[i0++] = w[k];
    }
  }
  const WeightedSample P1(block(g.s1), w1 / ns);
  const WeightedSample P0(block(g.s0), w0 / ns);
  const WeightedSample T(block(g.t), Vector::Constant(static_cast<Index>(g.t.size()),
                                                      1.0 / static_cast<double>(g.t.size())));
  CHECK(mmds[0] == doctest::Approx(mmd_squared(P1, T, spec)).epsilon(1e-12));
  CHECK(mmds[1] == doctest::Approx(mmd_squared(P0, T, spec)).epsilon(1e-12));
  CHECK(mmds[2] == doctest::Approx(mmd_squared(P1, P0, spec)).epsilon(1e-12));
}

TEST_CASE("triangle corollary on random weights") {
  Rng rng(61);
  const Dataset d = testing::random_dataset(8, 7, 6, 67);
  const KernelSpec spec{KernelFamily::gaussian, 1.0};
  for (int rep = 0; rep < 20; ++rep) {
    const Vector w = testing::random_feasible_weights(d, rng);
    const auto mmds = group_mmds(d, w, spec);
    CHECK(std::sqrt(mmds[2]) <= std::sqrt(mmds[0]) + std::sqrt(mmds[1]) + 1e-10);
  }
}

}  // TEST_SUITE

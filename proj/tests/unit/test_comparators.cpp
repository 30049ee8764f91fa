#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

#include "itrbal/comparators.hpp"
#include "itrbal/simulation.hpp"
#include "test_helpers.hpp"

using namespace itrbal;

namespace {

/// Plain Newton IRLS, independent of the library path: explicit inverse via
/// full-pivot LU, no step control.
Vector irls_oracle(const Matrix& X, const std::vector<int>& y, const Vector& c, double ridge,
                   double tol) {
  const Index n = X.rows(), p = X.cols();
  Matrix Z(n, p + 1);
  Z.col(0).setOnes();
  Z.rightCols(p) = X;
  Vector beta = Vector::Zero(p + 1);
  for (int it = 0; it < 200; ++it) {
    const Vector eta = Z * beta;
    Vector mu(n), s(n);
    for (Index i = 0; i < n; ++i) {
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      s[i] = c[i] * mu[i] * (1.0 - mu[i]);
    }
    Vector grad = Z.transpose() * (c.array() * (mu.array() - Eigen::Map<const Eigen::VectorXi>(y.data(), n).cast<double>().array())).matrix();
    grad.tail(p) += ridge * beta.tail(p);
    if (grad.lpNorm<Eigen::Infinity>() <= tol) return beta;
    Matrix H = Z.transpose() * s.asDiagonal() * Z;
    H.bottomRightCorner(p, p).diagonal().array() += ridge;
    beta -= Eigen::FullPivLU<Matrix>(H).inverse() * grad;
  }
  return beta;
}

}  // namespace

TEST_SUITE("comparators") {

TEST_CASE("balanced labels with zero covariates give zero coefficients") {
  Matrix X = Matrix::Zero(8, 1);
  std::vector<int> y = {0, 1, 0, 1, 0, 1, 0, 1};
  const Vector beta = fit_logistic(X, y);
  CHECK(std::abs(beta[0]) <= 1e-10);
  CHECK(std::abs(beta[1]) <= 1e-10);
}

TEST_CASE("ridge removes the separation divergence") {
  Matrix X(6, 1);
  X << -2.0, -1.1, -0.4, 0.3, 1.2, 2.5;
  std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const Vector beta = fit_logistic(X, y, nullptr, 0.1);
  CHECK(std::isfinite(beta[0]));
  CHECK(std::isfinite(beta[1]));
  CHECK(std::abs(beta[1]) < 50.0);
}

TEST_CASE("perfect separation with zero ridge raises an instructive error") {
  Matrix X(6, 1);
  X << -2.0, -1.1, -0.4, 0.3, 1.2, 2.5;
  std::vector<int> y = {0, 0, 0, 1, 1, 1};
  CHECK_THROWS_WITH_AS(fit_logistic(X, y, nullptr, 0.0), doctest::Contains("ridge"),
                       std::runtime_error);
}

TEST_CASE("matches the IRLS oracle on a six-point instance") {
  Matrix X(6, 2);
  X << 0.5, -0.2, -1.1, 0.7, 0.3, 0.9, 1.4, -0.5, -0.8, -1.2, 0.2, 0.4;
  std::vector<int> y = {1, 0, 1, 1, 0, 0};
  Vector c(6);
  c << 1.0, 2.0, 0.5, 1.5, 1.0, 0.7;
  LogisticOptions opts;
  opts.tol = 1e-12;
  const Vector beta = fit_logistic(X, y, &c, 0.3, opts);
  const Vector oracle = irls_oracle(X, y, c, 0.3, 1e-13);
  CHECK((beta - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("constant half propensity gives uniform overlap weights") {
  const Dataset d = testing::random_dataset(6, 5, 4, 271);
  const Vector pi = Vector::Constant(d.n_source(), 0.5);
  const WeightSolution ws = classical_weights(d, ClassicalKind::overlap, pi, Vector());
  CHECK((ws.w - uniform_weights(d).w).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK_NOTHROW(check_weight_invariants(ws, d));
}

TEST_CASE("constant probabilities give uniform importance weights") {
  const Dataset d = testing::random_dataset(6, 5, 4, 277);
  const Vector half = Vector::Constant(d.n_source(), 0.5);
  const WeightSolution ws = classical_weights(d, ClassicalKind::importance, half, half);
  CHECK((ws.w - uniform_weights(d).w).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("oracle probabilities reproduce the normalized importance weights") {
  const ScenarioConfig cfg{Assignment::linear, 0.4, 300, 281};
  const auto [d, oracle] = generate(cfg);
  Matrix Xs(d.n_source(), d.dim());
  const auto& rows = d.source_rows();
  for (Index k = 0; k < d.n_source(); ++k) Xs.row(k) = d.covariates().row(rows[static_cast<size_t>(k)]);
  const Vector pi = oracle.pi_all(Xs);
  const Vector rho = oracle.rho_all(Xs);
  const WeightSolution ws = classical_weights(d, ClassicalKind::importance, pi, rho);

  // direct formula, with E(S)=1/2 so the population constant is one; group
  // normalization removes it anyway
  Vector wstar(d.n_source());
  for (Index k = 0; k < d.n_source(); ++k) {
    const int a = *d.treatment(rows[static_cast<size_t>(k)]);
    wstar[k] = (a == 1 ? 1.0 / pi[k] : 1.0 / (1.0 - pi[k])) * (1.0 - rho[k]) / rho[k];
  }
  double s1 = 0.0, s0 = 0.0;
  for (Index k = 0; k < d.n_source(); ++k)
    (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0) += wstar[k];
  const double nsd = static_cast<double>(d.n_source());
  for (Index k = 0; k < d.n_source(); ++k)
    wstar[k] *= nsd / (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0);

  CHECK((ws.w - wstar).lpNorm<Eigen::Infinity>() <= 1e-12 * nsd);
}

TEST_CASE("probabilities at the boundary raise") {
  const Dataset d = testing::random_dataset(3, 3, 2, 283);
  Vector pi = Vector::Constant(d.n_source(), 0.5);
  pi[0] = 1.0;
  CHECK_THROWS_AS(classical_weights(d, ClassicalKind::ipw, pi, Vector()), std::invalid_argument);
}

TEST_CASE("ipw on randomized data stays near uniform (monitored)") {
  const ScenarioConfig cfg{Assignment::linear, 0.0, 800, 293};
  auto [d, oracle] = generate(cfg);
  const Vector pi_hat = clip_probabilities(fit_propensity_model(d).predict([&] {
    Matrix Xs(d.n_source(), d.dim());
    const auto& rows = d.source_rows();
    for (Index k = 0; k < d.n_source(); ++k) Xs.row(k) = d.covariates().row(rows[static_cast<size_t>(k)]);
    return Xs;
  }()));
  const WeightSolution ws = classical_weights(d, ClassicalKind::ipw, pi_hat, Vector());
  const double band = (ws.w - uniform_weights(d).w).cwiseAbs().maxCoeff();
  MESSAGE("ipw deviation from uniform with fitted propensity: ", band);
  WARN(band < 5.0 / std::sqrt(static_cast<double>(d.n_source())) * 10.0);
}

TEST_CASE("entropy balancing returns uniform when moments already match") {
  Matrix X(6, 1);
  X << 1.0, -1.0, 0.5, -0.5, 2.0, -2.0;  // all group means zero
  const Dataset d(X, {1, 1, 1, 1, 0, 0}, {1, 1, 0, 0, std::nullopt, std::nullopt},
                  {0.1, 0.2, 0.3, 0.4, std::nullopt, std::nullopt});
  const WeightSolution ws = entropy_balancing(d, MomentTarget::source_moments);
  CHECK((ws.w - uniform_weights(d).w).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("matches a primal projected-gradient oracle on a 5-point group") {
  // one treated group of 5, control group of 2 (kept trivial), one moment
  Matrix X(9, 1);
  X << 0.9, -0.3, 0.1, 0.7, -1.2, 0.4, -0.4, 0.65, -0.1;
  const Dataset d(X, {1, 1, 1, 1, 1, 1, 1, 0, 0},
                  {1, 1, 1, 1, 1, 0, 0, std::nullopt, std::nullopt},
                  {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, std::nullopt, std::nullopt});
  const WeightSolution ws = entropy_balancing(d, MomentTarget::target_moments);

  // primal oracle for the treated block: projected gradient on
  // sum w log w over {sum w = n_s, sum w (x - t) = 0}. The entropy optimum
  // is strictly positive, so the nonnegativity clamp only guards early
  // iterates and the closed-form affine projection is exact near the
  // solution.
  const double ns = 7.0;
  const double t = (0.65 + -0.1) / 2.0;
  Vector phi(5);
  phi << 0.9 - t, -0.3 - t, 0.1 - t, 0.7 - t, -1.2 - t;
  Matrix A(2, 5);
  A.row(0).setOnes();
  A.row(1) = phi.transpose();
  Vector rhs(2);
  rhs << ns, 0.0;
  const Matrix AAt_inv = (A * A.transpose()).inverse();
  auto project = [&](Vector v) {
    for (int sweep = 0; sweep < 500; ++sweep) {
      v -= A.transpose() * (AAt_inv * (A * v - rhs));
      v = v.cwiseMax(1e-12);
    }
    v -= A.transpose() * (AAt_inv * (A * v - rhs));
    return v;
  };
  Vector w = project(Vector::Constant(5, ns / 5.0));
  const double step = 0.05;
  for (int it = 0; it < 200000; ++it) {
    const Vector grad = w.array().log() + 1.0;
    w = project(w - step * grad.matrix());
  }

  Vector treated(5);
  const auto& rows = d.source_rows();
  Index j = 0;
  for (Index k = 0; k < d.n_source(); ++k) {
    if (*d.treatment(rows[static_cast<size_t>(k)]) == 1) treated[j++] = ws.w[k];
  }
  CHECK((treated - w).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(std::abs(treated.dot(phi)) <= 1e-7 * ns);
}

TEST_CASE("reweighted means hit the target moments on random instances") {
  for (const auto seed : {307u, 311u, 313u}) {
    const Dataset d = testing::random_dataset(12, 10, 9, seed);
    for (const MomentTarget target : {MomentTarget::source_moments, MomentTarget::target_moments}) {
      const WeightSolution ws = entropy_balancing(d, target);
      CHECK_NOTHROW(check_weight_invariants(ws, d, 1e-6));

      Vector goal = Vector::Zero(d.dim());
      if (target == MomentTarget::target_moments) {
        for (Index r : d.groups().t) goal += d.covariates().row(r);
        goal /= static_cast<double>(d.groups().t.size());
      } else {
        for (Index r : d.source_rows()) goal += d.covariates().row(r);
        goal /= static_cast<double>(d.n_source());
      }
      const auto& rows = d.source_rows();
      for (const int arm : {0, 1}) {
        Vector mean = Vector::Zero(d.dim());
        double mass = 0.0;
        for (Index k = 0; k < d.n_source(); ++k) {
          if (*d.treatment(rows[static_cast<size_t>(k)]) != arm) continue;
          mean += ws.w[k] * d.covariates().row(rows[static_cast<size_t>(k)]).transpose();
          mass += ws.w[k];
        }
        mean /= mass;
        CHECK((mean - goal).lpNorm<Eigen::Infinity>() <= 1e-7);
      }
    }
  }
}

TEST_CASE("entropy balancing dual decreases monotonically under damping") {
  const Dataset d = testing::random_dataset(15, 12, 10, 317);
  std::vector<double> trace;
  EntropyBalanceOptions opts;
  opts.dual_trace = &trace;
  entropy_balancing(d, MomentTarget::target_moments, opts);
  REQUIRE(trace.size() >= 3);
  // the trace covers two groups; at most one increase (the segment boundary)
  int increases = 0;
  for (size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] + 1e-12) ++increases;
  }
  CHECK(increases <= 1);
}

TEST_CASE("infeasible moment system raises with the violation attached") {
  // target mean far outside the convex hull of either group
  Matrix X(6, 1);
  X << 0.0, 0.1, 0.2, 0.3, 50.0, 60.0;
  const Dataset d(X, {1, 1, 1, 1, 0, 0}, {1, 1, 0, 0, std::nullopt, std::nullopt},
                  {0.1, 0.2, 0.3, 0.4, std::nullopt, std::nullopt});
  CHECK_THROWS_WITH_AS(entropy_balancing(d, MomentTarget::target_moments),
                       doctest::Contains("violation"), std::runtime_error);
}

}  // TEST_SUITE

#include "itrbal/simulation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace itrbal {

double normal_cdf(double z) {
  // 0.5 erfc(-z / sqrt(2)); erfc keeps full precision in the lower tail
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

namespace {

inline double g_link(double z) { return 0.8 * normal_cdf(z) + 0.1; }

constexpr double kNoiseSd = 0.5;

}  // namespace

Assignment assignment_from_string(const std::string& s) {
  if (s == "linear") return Assignment::linear;
  if (s == "linear_bad_overlap") return Assignment::linear_bad_overlap;
  if (s == "nonlinear") return Assignment::nonlinear;
  throw std::invalid_argument("unknown assignment scenario: " + s);
}

std::string to_string(Assignment a) {
  switch (a) {
    case Assignment::linear: return "linear";
    case Assignment::linear_bad_overlap: return "linear_bad_overlap";
    case Assignment::nonlinear: return "nonlinear";
  }
  return "?";
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.n < 4) throw std::invalid_argument("ScenarioConfig: n must be at least 4");
  if (!(cfg.kappa >= 0.0 && cfg.kappa <= 1.0)) throw std::invalid_argument("ScenarioConfig: kappa outside [0, 1]");
}

double OracleFunctions::pi(const Eigen::Ref<const Vector>& x) const {
  switch (assignment) {
    case Assignment::linear:
      return g_link(0.5 * x[0] + 0.3 * x[1] - 0.3);
    case Assignment::linear_bad_overlap:
      return g_link(1.6 * x[0] + 1.3 * x[1] - 0.8);
    case Assignment::nonlinear:
      return g_link(0.4 * x[0] * x[0] + 0.4 * x[1] * x[1] + 0.5 * x[0] * x[1] -
                    0.4 * x[0] + 0.4 * x[1] - 0.9);
  }
  return 0.5;
}

double OracleFunctions::rho(const Eigen::Ref<const Vector>& x) const {
  return g_link(x[1] - 1.2 * x[0]);
}

double OracleFunctions::m(const Eigen::Ref<const Vector>& x) const {
  return normal_cdf(-0.6 * x[0] - 0.6 * x[1] + 0.2 * x[2] + 0.5) + 0.5;
}

double OracleFunctions::tau(const Eigen::Ref<const Vector>& x) const {
  const double d = x[0] - x[1];
  const double tau_nl = normal_cdf(1.5 * x[1] + 0.8 * x[0] - 0.4 * d * d - 0.3) - 0.07 * d * d;
  const double tau_l = normal_cdf(0.4 * x[1] + 0.6 * x[0]) - 0.5;
  return kappa * tau_nl + (1.0 - kappa) * tau_l;
}

namespace {

template <typename F>
Vector apply_rows(const Matrix& X, F&& f) {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out[i] = f(X.row(i).transpose());
  return out;
}

}  // namespace

Vector OracleFunctions::pi_all(const Matrix& X) const {
  return apply_rows(X, [this](const auto& x) { return pi(x); });
}
Vector OracleFunctions::rho_all(const Matrix& X) const {
  return apply_rows(X, [this](const auto& x) { return rho(x); });
}
Vector OracleFunctions::tau_all(const Matrix& X) const {
  return apply_rows(X, [this](const auto& x) { return tau(x); });
}
Vector OracleFunctions::mu0_all(const Matrix& X) const {
  return apply_rows(X, [this](const auto& x) { return mu0(x); });
}
Vector OracleFunctions::mu1_all(const Matrix& X) const {
  return apply_rows(X, [this](const auto& x) { return mu1(x); });
}

std::pair<Dataset, OracleFunctions> generate(const ScenarioConfig& cfg) {
  validate(cfg);
  OracleFunctions oracle{cfg.assignment, cfg.kappa};

  Rng rng_x = Rng::derive(cfg.seed, stream::covariates);
  Rng rng_s = Rng::derive(cfg.seed, stream::population);
  Rng rng_a = Rng::derive(cfg.seed, stream::treatment);
  Rng rng_e = Rng::derive(cfg.seed, stream::noise);

  const Index n = cfg.n;
  Matrix X(n, 4);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 4; ++j) X(i, j) = rng_x.uniform(-2.0, 2.0);

  std::vector<int> S(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    S[static_cast<size_t>(i)] = rng_s.bernoulli(oracle.rho(X.row(i).transpose())) ? 1 : 0;
  }

  std::vector<std::optional<int>> A(static_cast<size_t>(n));
  std::vector<std::optional<double>> Y(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (S[static_cast<size_t>(i)] != 1) continue;
    const auto x = X.row(i).transpose();
    const int a = rng_a.bernoulli(oracle.pi(x)) ? 1 : 0;
    const double y = oracle.m(x) + (a - 0.5) * oracle.tau(x) + rng_e.normal(0.0, kNoiseSd);
    A[static_cast<size_t>(i)] = a;
    Y[static_cast<size_t>(i)] = y;
  }

  return {Dataset(std::move(X), std::move(S), std::move(A), std::move(Y)), oracle};
}

Matrix sample_target_covariates(int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_target_covariates: m must be positive");
  OracleFunctions oracle;  // rho does not depend on assignment/kappa
  Rng rng = Rng::derive(seed, stream::test_sample);
  Matrix X(m, 4);
  Vector x(4);
  Index filled = 0;
  while (filled < m) {
    for (Index j = 0; j < 4; ++j) x[j] = rng.uniform(-2.0, 2.0);
    if (rng.bernoulli(1.0 - oracle.rho(x))) {
      X.row(filled++) = x.transpose();
    }
  }
  return X;
}

TargetTestSample make_target_test_sample(const ScenarioConfig& cfg, int m_test,
                                         std::uint64_t seed) {
  validate(cfg);
  OracleFunctions oracle{cfg.assignment, cfg.kappa};
  TargetTestSample s;
  s.X = sample_target_covariates(m_test, seed);
  s.tau = oracle.tau_all(s.X);
  s.mu0 = oracle.mu0_all(s.X);
  s.mu1 = oracle.mu1_all(s.X);
  return s;
}

namespace {

constexpr int kThetaGrid = 720;
constexpr double kBMin = -3.0;
constexpr double kBMax = 3.0;
constexpr double kBStep = 0.01;
constexpr double kTwoPi = 6.283185307179586477;

/// For one theta, the value sum(tau_i 1{z_i >= -b}) over the b grid, via
/// bucketed prefix sums: point i enters at the smallest k with b_k >= -z_i.
void best_b_for_theta(const Vector& z, const Vector& tau, double b_min, double b_step,
                      int b_count, double& best_value, double& best_b) {
  std::vector<double> bucket(static_cast<size_t>(b_count) + 1, 0.0);
  for (Index i = 0; i < z.size(); ++i) {
    const double pos = (-z[i] - b_min) / b_step;
    Index k = static_cast<Index>(std::ceil(pos));
    if (k < 0) k = 0;
    if (k >= b_count) continue;  // never treated on this b range
    bucket[static_cast<size_t>(k)] += tau[i];
  }
  double run = 0.0;
  best_value = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < b_count; ++k) {
    run += bucket[static_cast<size_t>(k)];
    if (run > best_value) {
      best_value = run;
      best_b = b_min + b_step * k;
    }
  }
}

GridRule search_grid(const TargetTestSample& sample, double theta_lo, double theta_step,
                     int theta_count, double b_min, double b_step, int b_count) {
  GridRule best;
  best.value = -std::numeric_limits<double>::infinity();
  const Vector& x1 = sample.X.col(0);
  const Vector& x2 = sample.X.col(1);
  for (int tindex = 0; tindex < theta_count; ++tindex) {
    const double theta = theta_lo + theta_step * tindex;
    const Vector z = std::cos(theta) * x1 + std::sin(theta) * x2;
    double value = 0.0, b = b_min;
    best_b_for_theta(z, sample.tau, b_min, b_step, b_count, value, b);
    if (value > best.value) {
      best.value = value;
      best.theta = theta;
      best.b = b;
    }
  }
  best.rule.beta0 = best.b;
  best.rule.beta = Vector::Zero(sample.X.cols());
  best.rule.beta[0] = std::cos(best.theta);
  best.rule.beta[1] = std::sin(best.theta);
  return best;
}

}  // namespace

GridRule optimal_linear_rule_on(const TargetTestSample& sample) {
  if (sample.X.cols() < 2) throw std::invalid_argument("optimal_linear_rule: need at least 2 covariates");
  const double theta_step = kTwoPi / kThetaGrid;
  const int b_count = static_cast<int>(std::lround((kBMax - kBMin) / kBStep)) + 1;
  GridRule coarse = search_grid(sample, 0.0, theta_step, kThetaGrid, kBMin, kBStep, b_count);

  // one refinement pass at 10x resolution around the incumbent
  const double fine_tstep = theta_step / 10.0;
  const double fine_bstep = kBStep / 10.0;
  GridRule fine = search_grid(sample, coarse.theta - theta_step, fine_tstep, 21,
                              std::max(kBMin, coarse.b - kBStep), fine_bstep, 21);
  return fine.value >= coarse.value ? fine : coarse;
}

LinearRule optimal_linear_rule(const ScenarioConfig& cfg, int m_test, std::uint64_t seed) {
  if (m_test < 10000) throw std::invalid_argument("optimal_linear_rule: m_test must be at least 10^4");
  return optimal_linear_rule_on(make_target_test_sample(cfg, m_test, seed)).rule;
}

RuleEvaluation evaluate_rule_on(const LinearRule& rule, const LinearRule& ref,
                                const TargetTestSample& sample) {
  const Vector d = rule.decide_all(sample.X);
  const Vector dref = ref.decide_all(sample.X);
  const double m = static_cast<double>(sample.X.rows());
  RuleEvaluation ev;
  ev.value = (d.array() * sample.mu1.array() + (1.0 - d.array()) * sample.mu0.array()).mean();
  const double ref_value =
      (dref.array() * sample.mu1.array() + (1.0 - dref.array()) * sample.mu0.array()).mean();
  ev.regret = ref_value - ev.value;
  ev.accuracy = (d.array() == dref.array()).cast<double>().sum() / m;
  ev.value2 = ((2.0 * d.array() - 1.0) * sample.tau.array()).mean();
  return ev;
}

RuleEvaluation evaluate_rule(const LinearRule& rule, const ScenarioConfig& cfg,
                             const LinearRule& ref, int m_test, std::uint64_t seed) {
  return evaluate_rule_on(rule, ref, make_target_test_sample(cfg, m_test, seed));
}

}  // namespace itrbal

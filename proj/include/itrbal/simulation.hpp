#pragma once

#include <cstdint>
#include <utility>

#include "itrbal/dataset.hpp"
#include "itrbal/rng.hpp"
#include "itrbal/types.hpp"

namespace itrbal {

/// Standard normal CDF.
double normal_cdf(double z);

enum class Assignment { linear, linear_bad_overlap, nonlinear };

Assignment assignment_from_string(const std::string& s);
std::string to_string(Assignment a);

/// Simulation design: covariates X ~ U[-2,2]^4, participation
/// rho(x) = G(x2 - 1.2 x1) with G(z) = 0.8 Phi(z) + 0.1, one of three
/// propensity models, and Y = m(X) + (A - 0.5) tau(X) + N(0, 0.5^2)
/// with tau = kappa tau_NL + (1 - kappa) tau_L.
struct ScenarioConfig {
  Assignment assignment = Assignment::linear;
  double kappa = 0.0;  ///< in [0, 1]
  int n = 1600;
  std::uint64_t seed = 1;
};

void validate(const ScenarioConfig& cfg);

/// True design functions of a scenario; mu0 = m - tau/2, mu1 = m + tau/2.
struct OracleFunctions {
  Assignment assignment = Assignment::linear;
  double kappa = 0.0;

  double pi(const Eigen::Ref<const Vector>& x) const;
  double rho(const Eigen::Ref<const Vector>& x) const;
  double m(const Eigen::Ref<const Vector>& x) const;
  double tau(const Eigen::Ref<const Vector>& x) const;
  double mu0(const Eigen::Ref<const Vector>& x) const { return m(x) - 0.5 * tau(x); }
  double mu1(const Eigen::Ref<const Vector>& x) const { return m(x) + 0.5 * tau(x); }

  Vector pi_all(const Matrix& X) const;
  Vector rho_all(const Matrix& X) const;
  Vector tau_all(const Matrix& X) const;
  Vector mu0_all(const Matrix& X) const;
  Vector mu1_all(const Matrix& X) const;
};

/// Draws one dataset. Covariates, participation, treatment and noise use
/// independent seed streams, so the covariate draw is unchanged across
/// assignment mechanisms under the same seed.
std::pair<Dataset, OracleFunctions> generate(const ScenarioConfig& cfg);

/// Covariates distributed as X | S = 0, via rejection sampling with
/// acceptance probability 1 - rho(x).
Matrix sample_target_covariates(int m, std::uint64_t seed);

/// Target test sample with oracle responses precomputed.
struct TargetTestSample {
  Matrix X;
  Vector mu0, mu1, tau;
};

TargetTestSample make_target_test_sample(const ScenarioConfig& cfg, int m_test,
                                         std::uint64_t seed);

struct GridRule {
  LinearRule rule;
  double theta = 0.0;
  double b = 0.0;
  double value = 0.0;  ///< sum of tau over treated test points at the optimum
};

/// Best rule of the form 1{cos(theta) x1 + sin(theta) x2 + b >= 0} on a
/// target test sample: theta on a 720-point grid, b on [-3, 3] step 0.01,
/// refined once at 10x resolution around the incumbent.
GridRule optimal_linear_rule_on(const TargetTestSample& sample);
LinearRule optimal_linear_rule(const ScenarioConfig& cfg, int m_test, std::uint64_t seed);

struct RuleEvaluation {
  double value = 0.0;     ///< mean[d mu1 + (1-d) mu0]
  double regret = 0.0;    ///< value(ref) - value(rule)
  double accuracy = 0.0;  ///< agreement with ref
  double value2 = 0.0;    ///< mean[(2d - 1) tau]
};

RuleEvaluation evaluate_rule_on(const LinearRule& rule, const LinearRule& ref,
                                const TargetTestSample& sample);

/// Evaluation on a fresh target test sample drawn from the scenario.
RuleEvaluation evaluate_rule(const LinearRule& rule, const ScenarioConfig& cfg,
                             const LinearRule& ref, int m_test, std::uint64_t seed);

}  // namespace itrbal

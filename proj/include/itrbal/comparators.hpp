#pragma once

#include "itrbal/dataset.hpp"
#include "itrbal/types.hpp"

namespace itrbal {

struct LogisticOptions {
  double tol = 1e-8;  ///< infinity norm of the penalized score at the solution
  int max_iter = 100;
};

/// Weighted ridge logistic regression (intercept unpenalized). X carries no
/// intercept column; the returned vector is [intercept, slopes...]. y takes
/// values in {0, 1}. Throws on separation when ridge == 0 and on
/// non-convergence.
Vector fit_logistic(const Matrix& X, const std::vector<int>& y,
                    const Vector* sample_weight = nullptr, double ridge = 0.0,
                    const LogisticOptions& opts = {});

inline double sigmoid(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                    : std::exp(eta) / (1.0 + std::exp(eta));
}

enum class ProbabilityKind { propensity, participation };

struct ProbabilityModel {
  ProbabilityKind kind;
  Vector coefficients;  ///< [intercept, slopes...]

  /// sigmoid(intercept + X beta) per row; raw, without clipping.
  Vector predict(const Matrix& X) const;
};

/// Clamp probabilities to [eps, 1 - eps]; reports how many were clipped.
Vector clip_probabilities(Vector p, double eps = 1e-6, int* n_clipped = nullptr);

/// Propensity fit on source rows (A ~ X); participation fit on the pooled
/// sample (S ~ X). Main effects plus intercept, ridge for numerical safety.
ProbabilityModel fit_propensity_model(const Dataset& d, double ridge = 1e-6);
ProbabilityModel fit_participation_model(const Dataset& d, double ridge = 1e-6);

enum class ClassicalKind { ipw, importance, overlap };

/// IPW, importance, or overlap weights from per-source-row probabilities
/// (aligned with Dataset::source_rows()), group-normalized to sum n_s.
/// rho_hat is ignored for ipw and overlap.
WeightSolution classical_weights(const Dataset& d, ClassicalKind kind,
                                 const Vector& pi_hat, const Vector& rho_hat);

enum class MomentTarget { source_moments, target_moments };

struct EntropyBalanceOptions {
  bool include_squares = false;  ///< add second moments to the basis
  double tol = 1e-8;             ///< max moment violation at the solution
  int max_iter = 200;
  /// When set, receives the dual objective after each accepted Newton step
  /// (treated group first, then control).
  std::vector<double>* dual_trace = nullptr;
};

/// Minimum Kullback-Leibler (to uniform) weights per treatment group with
/// reweighted covariate means matched to the chosen moment target; solved in
/// the dual by damped Newton.
WeightSolution entropy_balancing(const Dataset& d, MomentTarget target,
                                 const EntropyBalanceOptions& opts = {});

}  // namespace itrbal

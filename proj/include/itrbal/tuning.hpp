#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "itrbal/balance.hpp"
#include "itrbal/dataset.hpp"
#include "itrbal/kernel.hpp"
#include "itrbal/mmd.hpp"
#include "itrbal/qp.hpp"

namespace itrbal {

/// Grid-search configuration for the hyperparameter selection procedure:
/// lambda per alpha by subsampled treatment-control balance, then alpha by a
/// regression-based target value estimate.
struct TuningConfig {
  std::vector<double> alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                    0.6, 0.7, 0.8, 0.9, 1.0};
  /// 11 log-spaced points from 1e-3 to 1e2.
  std::vector<double> lambda_grid = default_lambda_grid();
  double subsample_fraction = 0.8;
  int n_subsamples = 50;
  std::uint64_t seed = 0;
  /// Refit the weights on every subsample instead of restricting the
  /// full-sample weights (sensitivity mode; much slower).
  bool refit_subsamples = false;
  std::vector<double> krr_ridge_grid = {1e-3, 1e-2, 1e-1, 1.0};
  double learn_ridge = 1e-4;
  QpOptions qp;

  static std::vector<double> default_lambda_grid();
};

void validate(const TuningConfig& cfg);

/// Kernel ridge regressor with unpenalized intercept:
/// f(x) = beta0 + sum_i c_i K(x, x_i), with (K + ridge I) c + beta0 1 = y
/// and sum_i c_i = 0.
class KernelRidge {
 public:
  KernelRidge(Matrix points, const Vector& y, const KernelSpec& spec, double ridge);

  Vector predict(const Matrix& X) const;
  double predict_one(const Eigen::Ref<const Vector>& x) const;
  /// Infinity norm of the residual of the fitted linear system.
  double fit_residual() const { return fit_residual_; }
  double ridge() const { return ridge_; }

 private:
  Matrix points_;
  Vector coef_;
  double intercept_ = 0.0;
  double fit_residual_ = 0.0;
  double ridge_ = 0.0;
  KernelSpec spec_;
};

/// Per-arm outcome regression on source rows (arm = 0 or 1).
KernelRidge fit_outcome_regression(const Dataset& d, int arm, const KernelSpec& spec,
                                   double ridge);

/// Same, with the ridge chosen by 5-fold cross-validation over
/// cfg.krr_ridge_grid (folds assigned round-robin within the arm).
KernelRidge fit_outcome_regression_cv(const Dataset& d, int arm, const KernelSpec& spec,
                                      const std::vector<double>& ridge_grid);

struct LambdaScore {
  double lambda = 0.0;
  double score = 0.0;  ///< mean subsampled treated-control MMD^2
  bool failed = false;
};

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<LambdaScore> scores;  ///< in lambda-grid order
};

/// Index of the minimizing score; ties resolve to the smaller lambda.
/// Failed entries are skipped; returns -1 if all failed.
int pick_lambda_index(const std::vector<LambdaScore>& scores);

LambdaSelection select_lambda(const Dataset& d, const KernelSpec& spec, double alpha,
                              const TuningConfig& cfg);

struct AlphaRecord {
  double alpha = 0.0;
  double lambda = 0.0;
  double value = 0.0;  ///< plug-in target value of the learned rule
  double ess = 0.0;
  bool failed = false;
};

struct TuningResult {
  double alpha = 0.0;
  double lambda = 0.0;
  std::vector<AlphaRecord> report;  ///< one record per alpha in grid order
  WeightSolution weights;           ///< solution at the selected pair
  LinearRule rule;                  ///< rule learned at the selected pair
};

/// Index of the maximizing value; ties resolve to the larger alpha.
/// Failed entries are skipped; returns -1 if all failed.
int pick_alpha_index(const std::vector<AlphaRecord>& report);

/// Pluggable outcome predictors for the value-based alpha selection; maps a
/// covariate matrix to predicted outcomes under each arm. Defaults to the
/// cross-validated kernel ridge fits.
struct OutcomePredictors {
  std::function<Vector(const Matrix&)> mu0;
  std::function<Vector(const Matrix&)> mu1;
};

TuningResult select_alpha(const Dataset& d, const KernelSpec& spec, const TuningConfig& cfg,
                          const OutcomePredictors* predictors = nullptr);

}  // namespace itrbal

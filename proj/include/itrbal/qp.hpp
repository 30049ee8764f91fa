#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "itrbal/types.hpp"

namespace itrbal {

/// minimize w'Qw - 2b'w + constant
/// subject to sum_{i in g} w_i = rhs for each group g, and w >= 0.
struct QpProblem {
  Matrix Q;  ///< symmetric positive definite
  Vector b;
  std::vector<std::vector<Index>> eq_groups;  ///< disjoint, cover all indices
  double rhs = 0.0;
  double constant = 0.0;  ///< reported in the objective only
};

struct QpOptions {
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  int max_iter = 50000;
  double rho = 0.0;  ///< ADMM penalty; 0 selects automatically
  bool adaptive_rho = true;
  double over_relax = 1.6;
  /// When set, receives the objective at each feasible iterate (for
  /// monotonicity diagnostics). Slows the solve; leave null in production.
  std::vector<double>* objective_trace = nullptr;
};

struct QpSolution {
  Vector w;
  double objective = 0.0;
  double primal_residual = 0.0;  ///< max equality/bound violation of w
  double dual_residual = 0.0;    ///< max of stationarity and complementarity violation
  int iterations = 0;
};

/// Consensus variables for warm starting a related solve.
struct QpWarmStart {
  Vector z, u;
};

class QpError : public std::runtime_error {
 public:
  QpError(const std::string& msg, double primal, double dual)
      : std::runtime_error(msg), primal_residual(primal), dual_residual(dual) {}
  double primal_residual;
  double dual_residual;
};

/// Euclidean projection onto {w : sum w = rhs, w >= 0}. The shift parameter
/// is located by bisection and then snapped to the exact active-set value.
Vector project_sum_nonneg(const Vector& v, double rhs);

/// Operator-splitting solve: proximal step on the quadratic alternating with
/// exact projection onto the constraint set. Throws QpError on
/// non-convergence.
QpSolution solve_qp(const QpProblem& p, const QpOptions& opts = {},
                    const QpWarmStart* warm = nullptr,
                    QpWarmStart* warm_out = nullptr);

}  // namespace itrbal

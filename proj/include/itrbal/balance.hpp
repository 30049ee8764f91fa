#pragma once

#include "itrbal/dataset.hpp"
#include "itrbal/kernel.hpp"
#include "itrbal/mmd.hpp"
#include "itrbal/qp.hpp"

namespace itrbal {

/// alpha in [0, 1] trades target balance against treated-control balance;
/// lambda > 0 penalizes weight dispersion.
struct BalanceHyperparams {
  double alpha = 1.0;
  double lambda = 1.0;
};

void validate(const BalanceHyperparams& h);

/// Quadratic program of the three-way balancing objective. Variables are
/// stacked treated-then-control; both groups share the right-hand side n_s.
QpProblem assemble_qp(const GramCache& g, const BalanceHyperparams& h);
QpProblem assemble_qp(const Dataset& d, const KernelSpec& spec,
                      const BalanceHyperparams& h);

/// Solves the balancing program and returns group-renormalized weights in
/// source-row order with MMD and ESS diagnostics attached.
WeightSolution solve_balancing_weights(const GramCache& g,
                                       const BalanceHyperparams& h,
                                       const QpOptions& opts = {},
                                       const QpWarmStart* warm = nullptr,
                                       QpWarmStart* warm_out = nullptr);
WeightSolution solve_balancing_weights(const Dataset& d, const KernelSpec& spec,
                                       const BalanceHyperparams& h,
                                       const QpOptions& opts = {},
                                       const QpWarmStart* warm = nullptr,
                                       QpWarmStart* warm_out = nullptr);

}  // namespace itrbal

#pragma once

#include "itrbal/comparators.hpp"
#include "itrbal/dataset.hpp"

namespace itrbal {

/// Weighted value estimate
/// (1/n_s) [sum_{S1} w_i d(X_i) Y_i + sum_{S0} w_i (1 - d(X_i)) Y_i].
double estimate_value(const LinearRule& rule, const WeightSolution& w,
                      const Dataset& d);

/// The weighted-classification form of the value objective: labels
/// A~_i sign(w_i Y_i) with A~ in {-1,+1}, case weights |w_i Y_i|; rows with
/// w_i Y_i = 0 are dropped.
struct ClassificationView {
  std::vector<Index> rows;  ///< dataset row indices retained
  Vector labels;            ///< +1 / -1
  Vector case_weights;      ///< positive
};

ClassificationView classification_view(const WeightSolution& w, const Dataset& d);

/// Linear rule from weighted ridge-logistic regression on the
/// classification view. Case weights are normalized to mean one, which
/// makes the fit invariant to their positive rescaling.
LinearRule learn_linear_rule(const WeightSolution& w, const Dataset& d,
                             double ridge = 1e-4,
                             const LogisticOptions& opts = {});

}  // namespace itrbal

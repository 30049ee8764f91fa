#pragma once

#include <array>

#include "itrbal/dataset.hpp"
#include "itrbal/kernel.hpp"
#include "itrbal/types.hpp"

namespace itrbal {

/// Discrete probability distribution: point masses on sample rows.
struct WeightedSample {
  Matrix points;  ///< m x p
  Vector mass;    ///< nonnegative, sums to 1 (tolerance 1e-10)

  WeightedSample(Matrix pts, Vector m);
};

/// Squared maximum mean discrepancy between two weighted samples,
/// p'Kp + q'Kq - 2 p'Kq, clamped at zero from below.
double mmd_squared(const WeightedSample& P, const WeightedSample& Q,
                   const KernelSpec& spec);

/// Kernel blocks for one dataset, computed once and shared across all
/// hyperparameter evaluations.
struct GramCache {
  KernelSpec spec;
  Index n_s = 0, n_t = 0, n1 = 0, n0 = 0;
  Matrix x1, x0, xt;        ///< covariate blocks in group order
  Matrix k11, k00, k10;     ///< source blocks
  Matrix k1t, k0t;          ///< source x target blocks
  double ktt_sum = 0.0;     ///< grand sum of the target block
  GroupIndex idx;           ///< dataset row indices per group
  std::vector<Index> pos1, pos0;  ///< positions of s1/s0 within source order

  static GramCache build(const Dataset& d, const KernelSpec& spec);

  /// Split a source-order weight vector into stacked (treated, control).
  void split(const Vector& w_source, Vector& w1, Vector& w0) const;
  /// Inverse of split.
  Vector join(const Vector& w1, const Vector& w0) const;
};

/// The three MMD^2 terms of the balancing objective for weights w (source
/// order): treated vs target, control vs target, treated vs control.
/// Masses are w_i / n_s on the source groups and 1/n_t on the target.
std::array<double, 3> group_mmds(const Dataset& d, const Vector& w,
                                 const KernelSpec& spec);
std::array<double, 3> group_mmds(const GramCache& g, const Vector& w);

}  // namespace itrbal

#pragma once

#include "itrbal/types.hpp"

namespace itrbal {

enum class KernelFamily { gaussian };

/// Positive-definite kernel with the convention
/// K(x, x') = exp(-||x - x'||^2 / (2 bandwidth^2)).
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;
};

void validate(const KernelSpec& spec);

double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y);

/// Cross Gram matrix, entry (i, j) = K(row i of A, row j of B).
Matrix gram(const Matrix& A, const Matrix& B, const KernelSpec& spec);

/// Symmetric Gram matrix with exact unit diagonal.
Matrix gram(const Matrix& A, const KernelSpec& spec);

/// Median of the Euclidean distances over all unordered distinct row pairs.
/// Even pair counts average the two middle order statistics. Throws if the
/// median is zero (degenerate covariates).
double median_heuristic(const Matrix& X);

}  // namespace itrbal

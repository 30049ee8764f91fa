#include "itrbal/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace itrbal {

void validate(const KernelSpec& spec) {
  if (!(spec.bandwidth > 0.0)) throw std::invalid_argument("KernelSpec: bandwidth must be positive");
}

double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y) {
  validate(spec);
  if (x.size() != y.size()) throw std::invalid_argument("kernel_value: dimension mismatch");
  const double d2 = (x - y).squaredNorm();
  return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
}

Matrix gram(const Matrix& A, const Matrix& B, const KernelSpec& spec) {
  validate(spec);
  if (A.cols() != B.cols()) throw std::invalid_argument("gram: dimension mismatch");
  const double inv2s2 = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  Matrix K(A.rows(), B.rows());
  for (Index j = 0; j < B.rows(); ++j) {
    for (Index i = 0; i < A.rows(); ++i) {
      K(i, j) = std::exp(-(A.row(i) - B.row(j)).squaredNorm() * inv2s2);
    }
  }
  return K;
}

Matrix gram(const Matrix& A, const KernelSpec& spec) {
  validate(spec);
  const double inv2s2 = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  const Index n = A.rows();
  Matrix K(n, n);
  for (Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(A.row(i) - A.row(j)).squaredNorm() * inv2s2);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

double median_heuristic(const Matrix& X) {
  const Index n = X.rows();
  if (n < 2) throw std::invalid_argument("median_heuristic: need at least 2 rows");
  std::vector<double> d2;
  d2.reserve(static_cast<size_t>(n) * static_cast<size_t>(n - 1) / 2);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d2.push_back((X.row(i) - X.row(j)).squaredNorm());
    }
  }
  const size_t m = d2.size();
  const size_t hi = m / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(hi), d2.end());
  double med2 = d2[hi];
  if (m % 2 == 0) {
    // even count: average the two middle distances (not squared distances)
    const double lo2 = *std::max_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(hi));
    med2 = std::pow(0.5 * (std::sqrt(lo2) + std::sqrt(med2)), 2);
  }
  const double med = std::sqrt(med2);
  if (!(med > 0.0)) throw std::invalid_argument("median_heuristic: degenerate covariates");
  return med;
}

}  // namespace itrbal

#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "itrbal/types.hpp"

namespace itrbal {

/// Row indices of the treated source group, control source group and the
/// target sample, in dataset order.
struct GroupIndex {
  std::vector<Index> s1, s0, t;
};

/// Immutable sample of covariates X, population indicator S (1 = source),
/// and treatment/outcome observed on source rows only. Construction
/// validates all structural invariants; instances are safe to share across
/// threads.
class Dataset {
 public:
  Dataset(Matrix X, std::vector<int> S, std::vector<std::optional<int>> A,
          std::vector<std::optional<double>> Y);

  Index n() const { return X_.rows(); }
  Index dim() const { return X_.cols(); }
  Index n_source() const { return static_cast<Index>(source_rows_.size()); }
  Index n_target() const { return n() - n_source(); }

  const Matrix& covariates() const { return X_; }
  int population(Index i) const { return S_[static_cast<size_t>(i)]; }
  bool is_source(Index i) const { return S_[static_cast<size_t>(i)] == 1; }
  const std::optional<int>& treatment(Index i) const {
    return A_[static_cast<size_t>(i)];
  }
  const std::optional<double>& outcome(Index i) const {
    return Y_[static_cast<size_t>(i)];
  }

  /// Dataset row indices with S=1, ascending; weight vectors are aligned
  /// with this ordering.
  const std::vector<Index>& source_rows() const { return source_rows_; }
  const GroupIndex& groups() const { return groups_; }

 private:
  Matrix X_;
  std::vector<int> S_;
  std::vector<std::optional<int>> A_;
  std::vector<std::optional<double>> Y_;
  std::vector<Index> source_rows_;
  GroupIndex groups_;
};

/// Partition of dataset rows into (treated, control, target).
GroupIndex group_indices(const Dataset& d);

struct ColumnSchema {
  std::string s = "S";
  std::string a = "A";
  std::string y = "Y";
  char delimiter = ',';
};

/// Reads a delimited text file with header. The S/A/Y columns are mapped by
/// name; every remaining column is a covariate, kept in file order. A and Y
/// are masked on target rows regardless of file content.
Dataset load_dataset(const std::string& path, const ColumnSchema& schema = {});

/// Writes a dataset in the load_dataset layout. Covariates round-trip
/// bit-exactly; masked cells are written as NA.
void save_dataset(const Dataset& d, const std::string& path,
                  const ColumnSchema& schema = {});

/// Returns a copy with covariates centered and scaled to unit standard
/// deviation, computed on the pooled sample.
Dataset standardize(const Dataset& d);

/// Per-source-unit weights with group normalization plus the diagnostics
/// attached by the solvers. Fields that a producer does not define are NaN.
struct WeightSolution {
  Vector w;  ///< aligned with Dataset::source_rows()
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double mmd_t1 = std::numeric_limits<double>::quiet_NaN();
  double mmd_t0 = std::numeric_limits<double>::quiet_NaN();
  double mmd_10 = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
};

/// (sum w)^2 / sum w^2.
double effective_sample_size(const Vector& w);

/// Throws if w is negative, group sums deviate from n_s by more than
/// rel_tol, or the stored ESS is inconsistent.
void check_weight_invariants(const WeightSolution& ws, const Dataset& d,
                             double rel_tol = 1e-8);

/// Uniform weights (1 per source unit); sums to n_s in each group after
/// group normalization only when groups are balanced, so they are
/// normalized here explicitly.
WeightSolution uniform_weights(const Dataset& d);

/// Linear treatment rule d(x) = 1{beta0 + x'beta >= 0}.
struct LinearRule {
  double beta0 = 0.0;
  Vector beta;

  bool decide(const Eigen::Ref<const Vector>& x) const {
    return beta0 + beta.dot(x) >= 0.0;
  }
  /// 0/1 decisions for each row of X.
  Vector decide_all(const Matrix& X) const {
    return ((X * beta).array() + beta0 >= 0.0).cast<double>();
  }
};

}  // namespace itrbal

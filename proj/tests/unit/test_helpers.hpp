#pragma once

#include <optional>
#include <vector>

#include "itrbal/dataset.hpp"
#include "itrbal/rng.hpp"

namespace itrbal::testing {

/// Dataset with random covariates, n1 treated / n0 control source rows
/// followed by nt target rows; outcomes standard normal.
inline Dataset random_dataset(int n1, int n0, int nt, std::uint64_t seed, int p = 3) {
  Rng rng(seed);
  const int n = n1 + n0 + nt;
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  std::vector<int> S;
  std::vector<std::optional<int>> A;
  std::vector<std::optional<double>> Y;
  for (int i = 0; i < n1 + n0; ++i) {
    S.push_back(1);
    A.emplace_back(i < n1 ? 1 : 0);
    Y.emplace_back(rng.normal());
  }
  for (int i = 0; i < nt; ++i) {
    S.push_back(0);
    A.emplace_back(std::nullopt);
    Y.emplace_back(std::nullopt);
  }
  return Dataset(std::move(X), std::move(S), std::move(A), std::move(Y));
}

/// Random feasible weights: positive draws scaled so each group sums to n_s.
inline Vector random_feasible_weights(const Dataset& d, Rng& rng) {
  const Index ns = d.n_source();
  Vector w(ns);
  double s1 = 0.0, s0 = 0.0;
  const auto& rows = d.source_rows();
  for (Index k = 0; k < ns; ++k) {
    w[k] = -std::log(1.0 - rng.uniform01());  // Exp(1)
    (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0) += w[k];
  }
  const double nsd = static_cast<double>(ns);
  for (Index k = 0; k < ns; ++k) {
    w[k] *= nsd / (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0);
  }
  return w;
}

}  // namespace itrbal::testing

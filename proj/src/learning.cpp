#include "itrbal/learning.hpp"

#include <cmath>
#include <stdexcept>

namespace itrbal {

double estimate_value(const LinearRule& rule, const WeightSolution& w, const Dataset& d) {
  const auto& rows = d.source_rows();
  const Index ns = d.n_source();
  if (w.w.size() != ns) throw std::invalid_argument("estimate_value: weight length != n_s");
  double acc = 0.0;
  for (Index k = 0; k < ns; ++k) {
    const Index r = rows[static_cast<size_t>(k)];
    const bool treat = rule.decide(d.covariates().row(r).transpose());
    const int a = *d.treatment(r);
    if (a == 1 && treat) acc += w.w[k] * *d.outcome(r);
    else if (a == 0 && !treat) acc += w.w[k] * *d.outcome(r);
  }
  return acc / static_cast<double>(ns);
}

ClassificationView classification_view(const WeightSolution& w, const Dataset& d) {
  const auto& rows = d.source_rows();
  const Index ns = d.n_source();
  if (w.w.size() != ns) throw std::invalid_argument("classification_view: weight length != n_s");
  ClassificationView view;
  std::vector<double> labels, weights;
  for (Index k = 0; k < ns; ++k) {
    const Index r = rows[static_cast<size_t>(k)];
    const double wy = w.w[k] * *d.outcome(r);
    if (wy == 0.0) continue;
    const double a_pm = *d.treatment(r) == 1 ? 1.0 : -1.0;
    labels.push_back(wy > 0.0 ? a_pm : -a_pm);
    weights.push_back(std::abs(wy));
    view.rows.push_back(r);
  }
  if (view.rows.empty()) throw std::invalid_argument("classification_view: all case weights are zero");
  view.labels = Eigen::Map<Vector>(labels.data(), static_cast<Index>(labels.size()));
  view.case_weights = Eigen::Map<Vector>(weights.data(), static_cast<Index>(weights.size()));
  return view;
}

LinearRule learn_linear_rule(const WeightSolution& w, const Dataset& d, double ridge,
                             const LogisticOptions& opts) {
  const ClassificationView view = classification_view(w, d);
  const Index m = static_cast<Index>(view.rows.size());

  LinearRule rule;
  rule.beta = Vector::Zero(d.dim());
  // single-class view: any rule classifying every point as that class is
  // optimal; return the constant rule
  if (view.labels.minCoeff() > 0.0) {
    rule.beta0 = 1.0;
    return rule;
  }
  if (view.labels.maxCoeff() < 0.0) {
    rule.beta0 = -1.0;
    return rule;
  }

  Matrix X(m, d.dim());
  std::vector<int> y(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) {
    X.row(i) = d.covariates().row(view.rows[static_cast<size_t>(i)]);
    y[static_cast<size_t>(i)] = view.labels[i] > 0.0 ? 1 : 0;
  }
  Vector cw = view.case_weights * (static_cast<double>(m) / view.case_weights.sum());
  const Vector coef = fit_logistic(X, y, &cw, ridge, opts);
  rule.beta0 = coef[0];
  rule.beta = coef.tail(d.dim());
  return rule;
}

}  // namespace itrbal

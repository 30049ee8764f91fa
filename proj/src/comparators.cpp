#include "itrbal/comparators.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace itrbal {

namespace {

double weighted_nll(const Vector& eta, const std::vector<int>& y, const Vector& c) {
  // -sum c_i [y_i log p_i + (1-y_i) log(1-p_i)], stable via log1p
  double nll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(-|e|)) + max(0, -(2y-1) e)
    const double margin = (y[static_cast<size_t>(i)] == 1) ? e : -e;
    const double loss = margin >= 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    nll += c[i] * loss;
  }
  return nll;
}

}  // namespace

Vector fit_logistic(const Matrix& X, const std::vector<int>& y, const Vector* sample_weight,
                    double ridge, const LogisticOptions& opts) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (static_cast<Index>(y.size()) != n) throw std::invalid_argument("fit_logistic: label size mismatch");
  if (ridge < 0.0) throw std::invalid_argument("fit_logistic: negative ridge");
  Vector c = sample_weight ? *sample_weight : Vector::Ones(n);
  if (c.size() != n) throw std::invalid_argument("fit_logistic: weight size mismatch");
  if ((c.array() < 0.0).any()) throw std::invalid_argument("fit_logistic: negative sample weight");

  bool pos = false, neg = false;
  for (Index i = 0; i < n; ++i) {
    const int yi = y[static_cast<size_t>(i)];
    if (yi != 0 && yi != 1) throw std::invalid_argument("fit_logistic: labels must be 0/1");
    if (c[i] > 0.0) (yi == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw std::invalid_argument("fit_logistic: need both classes with positive weight");

  Matrix Z(n, p + 1);
  Z.col(0).setOnes();
  Z.rightCols(p) = X;

  Vector beta = Vector::Zero(p + 1);
  Vector eta = Vector::Zero(n);
  double nll = weighted_nll(eta, y, c) ;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector prob(n), wirls(n), resid(n);
    for (Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      wirls[i] = c[i] * prob[i] * (1.0 - prob[i]);
      resid[i] = c[i] * (prob[i] - static_cast<double>(y[static_cast<size_t>(i)]));
    }
    Vector grad = Z.transpose() * resid;
    grad.tail(p) += ridge * beta.tail(p);
    if (grad.lpNorm<Eigen::Infinity>() <= opts.tol) {
      return beta;
    }

    Matrix H = Z.transpose() * wirls.asDiagonal() * Z;
    H.bottomRightCorner(p, p).diagonal().array() += ridge;
    // tiny jitter keeps the Newton system solvable when curvature vanishes
    H.diagonal().array() += 1e-12;
    const Vector step = Eigen::LLT<Matrix>(H).solve(-grad);

    double t = 1.0;
    Vector beta_new, eta_new;
    double nll_new;
    for (int halvings = 0;; ++halvings) {
      beta_new = beta + t * step;
      eta_new = Z * beta_new;
      nll_new = weighted_nll(eta_new, y, c) + 0.5 * ridge * beta_new.tail(p).squaredNorm();
      if (nll_new <= nll + 1e-14 * std::abs(nll) || halvings >= 60) break;
      t *= 0.5;
    }
    beta = beta_new;
    eta = eta_new;
    nll = nll_new;

    if (ridge == 0.0 && beta.lpNorm<Eigen::Infinity>() > 1e3) {
      bool separated = true;
      for (Index i = 0; i < n && separated; ++i) {
        if (c[i] > 0.0 && (y[static_cast<size_t>(i)] == 1 ? eta[i] : -eta[i]) < 0.0) separated = false;
      }
      if (separated) {
        throw std::runtime_error("fit_logistic: perfect separation with ridge = 0; set ridge > 0");
      }
    }
  }
  throw std::runtime_error("fit_logistic: no convergence within max iterations");
}

Vector ProbabilityModel::predict(const Matrix& X) const {
  if (X.cols() + 1 != coefficients.size()) throw std::invalid_argument("ProbabilityModel: dimension mismatch");
  Vector eta = (X * coefficients.tail(coefficients.size() - 1)).array() + coefficients[0];
  for (Index i = 0; i < eta.size(); ++i) eta[i] = sigmoid(eta[i]);
  return eta;
}

Vector clip_probabilities(Vector p, double eps, int* n_clipped) {
  int count = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] < eps) {
      p[i] = eps;
      ++count;
    } else if (p[i] > 1.0 - eps) {
      p[i] = 1.0 - eps;
      ++count;
    }
  }
  if (n_clipped) *n_clipped = count;
  return p;
}

ProbabilityModel fit_propensity_model(const Dataset& d, double ridge) {
  const auto& rows = d.source_rows();
  const Index ns = d.n_source();
  Matrix X(ns, d.dim());
  std::vector<int> y(static_cast<size_t>(ns));
  for (Index k = 0; k < ns; ++k) {
    const Index r = rows[static_cast<size_t>(k)];
    X.row(k) = d.covariates().row(r);
    y[static_cast<size_t>(k)] = *d.treatment(r);
  }
  return ProbabilityModel{ProbabilityKind::propensity, fit_logistic(X, y, nullptr, ridge)};
}

ProbabilityModel fit_participation_model(const Dataset& d, double ridge) {
  std::vector<int> y(static_cast<size_t>(d.n()));
  for (Index i = 0; i < d.n(); ++i) y[static_cast<size_t>(i)] = d.population(i);
  return ProbabilityModel{ProbabilityKind::participation,
                          fit_logistic(d.covariates(), y, nullptr, ridge)};
}

WeightSolution classical_weights(const Dataset& d, ClassicalKind kind, const Vector& pi_hat,
                                 const Vector& rho_hat) {
  const Index ns = d.n_source();
  if (pi_hat.size() != ns) throw std::invalid_argument("classical_weights: pi_hat length != n_s");
  if (kind == ClassicalKind::importance && rho_hat.size() != ns) {
    throw std::invalid_argument("classical_weights: rho_hat length != n_s");
  }
  for (Index i = 0; i < ns; ++i) {
    if (!(pi_hat[i] > 0.0 && pi_hat[i] < 1.0)) throw std::invalid_argument("classical_weights: propensity at 0 or 1");
  }
  if (kind == ClassicalKind::importance) {
    for (Index i = 0; i < ns; ++i) {
      if (!(rho_hat[i] > 0.0 && rho_hat[i] < 1.0)) throw std::invalid_argument("classical_weights: participation at 0 or 1");
    }
  }

  const auto& rows = d.source_rows();
  Vector w(ns);
  for (Index k = 0; k < ns; ++k) {
    const int a = *d.treatment(rows[static_cast<size_t>(k)]);
    const double pi = pi_hat[k];
    switch (kind) {
      case ClassicalKind::ipw:
        w[k] = a == 1 ? 1.0 / pi : 1.0 / (1.0 - pi);
        break;
      case ClassicalKind::importance:
        w[k] = (a == 1 ? 1.0 / pi : 1.0 / (1.0 - pi)) * (1.0 - rho_hat[k]) / rho_hat[k];
        break;
      case ClassicalKind::overlap:
        w[k] = a == 1 ? 1.0 - pi : pi;
        break;
    }
  }

  // group normalization to the Hajek convention
  double s1 = 0.0, s0 = 0.0;
  for (Index k = 0; k < ns; ++k) {
    (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0) += w[k];
  }
  const double nsd = static_cast<double>(ns);
  for (Index k = 0; k < ns; ++k) {
    w[k] *= nsd / (*d.treatment(rows[static_cast<size_t>(k)]) == 1 ? s1 : s0);
  }

  WeightSolution ws;
  ws.w = std::move(w);
  ws.ess = effective_sample_size(ws.w);
  return ws;
}

namespace {

Matrix moment_basis(const Matrix& X, bool squares) {
  if (!squares) return X;
  Matrix Phi(X.rows(), 2 * X.cols());
  Phi.leftCols(X.cols()) = X;
  Phi.rightCols(X.cols()) = X.array().square();
  return Phi;
}

/// Dual of the per-group entropy program: minimize log sum exp(theta'(phi_i - t)).
Vector entropy_group_weights(const Matrix& phi, const Vector& target, double group_total,
                             const EntropyBalanceOptions& opts) {
  const Index m = phi.rows();
  const Index q = phi.cols();
  Matrix centered = phi.rowwise() - target.transpose();
  Vector theta = Vector::Zero(q);

  auto dual_and_probs = [&](const Vector& th, Vector& probs) {
    Vector s = centered * th;
    const double smax = s.maxCoeff();
    probs = (s.array() - smax).exp();
    const double z = probs.sum();
    probs /= z;
    return smax + std::log(z);
  };

  Vector probs(m);
  double dual = dual_and_probs(theta, probs);
  if (opts.dual_trace) opts.dual_trace->push_back(dual);
  double viol = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector grad = centered.transpose() * probs;
    viol = grad.lpNorm<Eigen::Infinity>();
    if (viol <= opts.tol) return group_total * probs;

    Matrix H = centered.transpose() * probs.asDiagonal() * centered;
    H -= grad * grad.transpose();
    H.diagonal().array() += 1e-12;
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success) break;
    const Vector step = ldlt.solve(-grad);
    if (!step.allFinite()) break;

    double t = 1.0;
    Vector theta_new;
    Vector probs_new(m);
    double dual_new;
    int halvings = 0;
    for (;; ++halvings) {
      theta_new = theta + t * step;
      dual_new = dual_and_probs(theta_new, probs_new);
      if (dual_new <= dual + 1e-14 * std::abs(dual) || halvings >= 60) break;
      t *= 0.5;
    }
    if (halvings >= 60) break;  // no descent direction left
    theta = theta_new;
    probs = probs_new;
    dual = dual_new;
    if (opts.dual_trace) opts.dual_trace->push_back(dual);
    if (theta.lpNorm<Eigen::Infinity>() > 1e4) break;  // moments unreachable
  }
  throw std::runtime_error(
      "entropy_balancing: infeasible or ill-conditioned moment system (max constraint violation " +
      std::to_string(viol) + ")");
}

}  // namespace

WeightSolution entropy_balancing(const Dataset& d, MomentTarget target,
                                 const EntropyBalanceOptions& opts) {
  const Matrix basis_all = moment_basis(d.covariates(), opts.include_squares);
  const auto& g = d.groups();
  const Index ns = d.n_source();

  Vector t(basis_all.cols());
  if (target == MomentTarget::target_moments) {
    t.setZero();
    for (Index r : g.t) t += basis_all.row(r);
    t /= static_cast<double>(g.t.size());
  } else {
    t.setZero();
    for (Index r : d.source_rows()) t += basis_all.row(r);
    t /= static_cast<double>(ns);
  }

  auto take = [&basis_all](const std::vector<Index>& rows) {
    Matrix M(static_cast<Index>(rows.size()), basis_all.cols());
    for (Index i = 0; i < M.rows(); ++i) M.row(i) = basis_all.row(rows[static_cast<size_t>(i)]);
    return M;
  };

  const Vector w1 = entropy_group_weights(take(g.s1), t, static_cast<double>(ns), opts);
  const Vector w0 = entropy_group_weights(take(g.s0), t, static_cast<double>(ns), opts);

  WeightSolution ws;
  ws.w.resize(ns);
  const auto& rows = d.source_rows();
  Index i1 = 0, i0 = 0;
  for (Index k = 0; k < ns; ++k) {
    if (*d.treatment(rows[static_cast<size_t>(k)]) == 1) ws.w[k] = w1[i1++];
    else ws.w[k] = w0[i0++];
  }
  ws.ess = effective_sample_size(ws.w);
  return ws;
}

}  // namespace itrbal

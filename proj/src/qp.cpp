#include "itrbal/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace itrbal {

Vector project_sum_nonneg(const Vector& v, double rhs) {
  const Index m = v.size();
  if (m == 0) throw std::invalid_argument("project_sum_nonneg: empty group");
  if (!(rhs > 0.0)) throw std::invalid_argument("project_sum_nonneg: rhs must be positive");
  if (m == 1) {
    Vector w(1);
    w[0] = rhs;
    return w;
  }
  const double vmax = v.maxCoeff();
  double lo = v.minCoeff() - rhs / static_cast<double>(m);
  double hi = vmax;
  auto mass = [&](double theta) {
    double s = 0.0;
    for (Index i = 0; i < m; ++i) s += std::max(v[i] - theta, 0.0);
    return s;
  };
  // sum(max(v - theta, 0)) is decreasing in theta; bracket is [lo, hi]
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(vmax)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= rhs) lo = mid;
    else hi = mid;
  }
  // snap to the exact shift for the identified active set
  double sum_active = 0.0;
  Index k = 0;
  for (Index i = 0; i < m; ++i) {
    if (v[i] > lo) {
      sum_active += v[i];
      ++k;
    }
  }
  if (k == 0) {  // all mass on the max element (degenerate bracket)
    Vector w = Vector::Zero(m);
    Index arg = 0;
    v.maxCoeff(&arg);
    w[arg] = rhs;
    return w;
  }
  const double theta = (sum_active - rhs) / static_cast<double>(k);
  Vector w(m);
  for (Index i = 0; i < m; ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

namespace {

void validate_problem(const QpProblem& p) {
  const Index n = p.Q.rows();
  if (p.Q.cols() != n || n == 0) throw std::invalid_argument("solve_qp: Q must be square and non-empty");
  if (p.b.size() != n) throw std::invalid_argument("solve_qp: b size mismatch");
  if (!(p.rhs > 0.0)) throw std::invalid_argument("solve_qp: rhs must be positive");
  const double scale = std::max(1.0, p.Q.cwiseAbs().maxCoeff());
  if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("solve_qp: Q not symmetric");
  }
  if (p.eq_groups.empty()) throw std::invalid_argument("solve_qp: no equality groups");
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (const auto& g : p.eq_groups) {
    if (g.empty()) throw std::invalid_argument("solve_qp: infeasible empty equality group");
    for (Index i : g) {
      if (i < 0 || i >= n) throw std::invalid_argument("solve_qp: group index out of range");
      if (seen[static_cast<size_t>(i)]) throw std::invalid_argument("solve_qp: groups overlap");
      seen[static_cast<size_t>(i)] = 1;
    }
  }
  for (char c : seen)
    if (!c) throw std::invalid_argument("solve_qp: groups do not cover all variables");
}

Vector project_groups(const QpProblem& p, const Vector& v) {
  Vector z(v.size());
  for (const auto& g : p.eq_groups) {
    Vector vg(static_cast<Index>(g.size()));
    for (size_t i = 0; i < g.size(); ++i) vg[static_cast<Index>(i)] = v[g[i]];
    const Vector wg = project_sum_nonneg(vg, p.rhs);
    for (size_t i = 0; i < g.size(); ++i) z[g[i]] = wg[static_cast<Index>(i)];
  }
  return z;
}

struct KktResidual {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double max() const { return std::max(stationarity, complementarity); }
};

/// Per-group multipliers are recovered as the weight-averaged gradient; at
/// the optimum every coordinate with z_i > 0 shares the group gradient.
KktResidual kkt_residual(const QpProblem& p, const Matrix& Qs, const Vector& z) {
  const Vector grad = 2.0 * (Qs * z) - 2.0 * p.b;
  KktResidual r;
  for (const auto& g : p.eq_groups) {
    double num = 0.0, den = 0.0;
    for (Index i : g) {
      num += z[i] * grad[i];
      den += z[i];
    }
    const double nu = den > 0.0 ? num / den : 0.0;
    for (Index i : g) {
      const double mu = grad[i] - nu;
      if (mu < 0.0) r.stationarity = std::max(r.stationarity, -mu);
      else r.complementarity = std::max(r.complementarity, mu * z[i]);
    }
  }
  return r;
}

double primal_violation(const QpProblem& p, const Vector& z) {
  double v = std::max(0.0, -z.minCoeff());
  for (const auto& g : p.eq_groups) {
    double s = 0.0;
    for (Index i : g) s += z[i];
    v = std::max(v, std::abs(s - p.rhs));
  }
  return v;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, const QpOptions& opts, const QpWarmStart* warm,
                    QpWarmStart* warm_out) {
  validate_problem(p);
  const Index n = p.Q.rows();
  const Matrix Qs = 0.5 * (p.Q + p.Q.transpose());

  double rho = opts.rho > 0.0 ? opts.rho : std::max(1e-10, 2.0 * Qs.diagonal().mean());
  Eigen::LLT<Matrix> llt((2.0 * Qs + rho * Matrix::Identity(n, n)).eval());
  if (llt.info() != Eigen::Success) throw QpError("solve_qp: factorization failed", 0.0, 0.0);

  Vector z = warm ? warm->z : project_groups(p, Vector::Zero(n));
  Vector u = warm ? warm->u : Vector::Zero(n);
  if (warm && (z.size() != n || u.size() != n)) throw std::invalid_argument("solve_qp: warm start size mismatch");

  const double relax = opts.over_relax;
  double r_primal = std::numeric_limits<double>::infinity();
  double r_dual = std::numeric_limits<double>::infinity();
  double tol_consensus = std::max(opts.tol_primal, opts.tol_dual);
  int iter = 0;

  auto objective_at = [&](const Vector& x) { return x.dot(Qs * x) - 2.0 * p.b.dot(x) + p.constant; };

  KktResidual kkt;
  bool converged = false;
  while (iter < opts.max_iter) {
    ++iter;
    const Vector w = llt.solve(2.0 * p.b + rho * (z - u));
    const Vector wr = relax * w + (1.0 - relax) * z;
    const Vector z_new = project_groups(p, wr + u);
    u += wr - z_new;

    r_primal = (w - z_new).lpNorm<Eigen::Infinity>();
    r_dual = rho * (z_new - z).lpNorm<Eigen::Infinity>();
    z = z_new;

    if (opts.objective_trace) opts.objective_trace->push_back(objective_at(z));

    if (r_primal <= std::min(opts.tol_primal, tol_consensus) &&
        r_dual <= std::min(opts.tol_dual, tol_consensus)) {
      kkt = kkt_residual(p, Qs, z);
      if (kkt.max() <= opts.tol_dual) {
        converged = true;
        break;
      }
      tol_consensus *= 0.25;  // consensus met but KKT not yet; keep iterating
    }

    if (opts.adaptive_rho && iter % 100 == 0 && r_dual > 0.0 && r_primal > 0.0) {
      const double ratio = r_primal / r_dual;
      if (ratio > 10.0 || ratio < 0.1) {
        const double factor = std::clamp(std::sqrt(ratio), 0.1, 10.0);
        rho = std::clamp(rho * factor, 1e-12, 1e8);
        llt.compute((2.0 * Qs + rho * Matrix::Identity(n, n)).eval());
        if (llt.info() != Eigen::Success) throw QpError("solve_qp: refactorization failed", r_primal, r_dual);
      }
    }
  }

  if (!converged) {
    kkt = kkt_residual(p, Qs, z);
    if (kkt.max() > opts.tol_dual) {
      throw QpError("solve_qp: no convergence within max iterations (primal " +
                        std::to_string(r_primal) + ", dual " + std::to_string(kkt.max()) + ")",
                    r_primal, kkt.max());
    }
  }

  if (warm_out) {
    warm_out->z = z;
    warm_out->u = u;
  }

  QpSolution sol;
  sol.w = z;  // the projected iterate is feasible up to round-off
  sol.objective = objective_at(z);
  sol.primal_residual = primal_violation(p, z);
  sol.dual_residual = kkt.max();
  sol.iterations = iter;
  return sol;
}

}  // namespace itrbal

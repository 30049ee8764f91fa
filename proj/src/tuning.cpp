#include "itrbal/tuning.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "itrbal/learning.hpp"
#include "itrbal/rng.hpp"

namespace itrbal {

std::vector<double> TuningConfig::default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(std::pow(10.0, -3.0 + 0.5 * k));
  return grid;
}

void validate(const TuningConfig& cfg) {
  auto check_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw std::invalid_argument(std::string("TuningConfig: empty ") + name);
    for (size_t i = 1; i < g.size(); ++i) {
      if (!(g[i] > g[i - 1])) throw std::invalid_argument(std::string("TuningConfig: ") + name + " not ascending");
    }
  };
  check_grid(cfg.alpha_grid, "alpha_grid");
  check_grid(cfg.lambda_grid, "lambda_grid");
  if (!(cfg.alpha_grid.front() >= 0.0 && cfg.alpha_grid.back() <= 1.0)) {
    throw std::invalid_argument("TuningConfig: alpha_grid outside [0, 1]");
  }
  if (!(cfg.lambda_grid.front() > 0.0)) throw std::invalid_argument("TuningConfig: lambda_grid must be positive");
  if (!(cfg.subsample_fraction > 0.0 && cfg.subsample_fraction < 1.0)) {
    throw std::invalid_argument("TuningConfig: subsample_fraction outside (0, 1)");
  }
  if (cfg.n_subsamples < 1) throw std::invalid_argument("TuningConfig: n_subsamples must be positive");
  if (cfg.krr_ridge_grid.empty()) throw std::invalid_argument("TuningConfig: empty krr_ridge_grid");
}

namespace {

struct KrrCoef {
  Vector c;
  double b0 = 0.0;
  double residual = 0.0;
};

/// Solves (K + ridge I) c + b0 1 = y with 1'c = 0 via the Schur complement
/// on the positive definite part.
KrrCoef krr_solve(const Matrix& K, const Vector& y, double ridge) {
  const Index n = K.rows();
  Matrix A = K;
  A.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("kernel ridge: factorization failed");
  const Vector cy = llt.solve(y);
  const Vector c1 = llt.solve(Vector::Ones(n));
  KrrCoef out;
  out.b0 = cy.sum() / c1.sum();
  out.c = cy - out.b0 * c1;
  out.residual = (A * out.c + Vector::Constant(n, out.b0) - y).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace

KernelRidge::KernelRidge(Matrix points, const Vector& y, const KernelSpec& spec, double ridge)
    : points_(std::move(points)), ridge_(ridge), spec_(spec) {
  if (!(ridge > 0.0)) throw std::invalid_argument("KernelRidge: ridge must be positive");
  if (points_.rows() == 0) throw std::invalid_argument("KernelRidge: empty training set");
  if (points_.rows() != y.size()) throw std::invalid_argument("KernelRidge: size mismatch");
  const KrrCoef sol = krr_solve(gram(points_, spec), y, ridge);
  coef_ = sol.c;
  intercept_ = sol.b0;
  fit_residual_ = sol.residual;
}

Vector KernelRidge::predict(const Matrix& X) const {
  return (gram(X, points_, spec_) * coef_).array() + intercept_;
}

double KernelRidge::predict_one(const Eigen::Ref<const Vector>& x) const {
  double acc = intercept_;
  for (Index i = 0; i < points_.rows(); ++i) {
    acc += coef_[i] * kernel_value(spec_, x, points_.row(i).transpose());
  }
  return acc;
}

namespace {

void arm_rows(const Dataset& d, int arm, Matrix& X, Vector& y) {
  const auto& g = d.groups();
  const auto& rows = arm == 1 ? g.s1 : g.s0;
  X.resize(static_cast<Index>(rows.size()), d.dim());
  y.resize(static_cast<Index>(rows.size()));
  for (Index i = 0; i < X.rows(); ++i) {
    const Index r = rows[static_cast<size_t>(i)];
    X.row(i) = d.covariates().row(r);
    y[i] = *d.outcome(r);
  }
}

}  // namespace

KernelRidge fit_outcome_regression(const Dataset& d, int arm, const KernelSpec& spec, double ridge) {
  if (arm != 0 && arm != 1) throw std::invalid_argument("fit_outcome_regression: arm must be 0 or 1");
  Matrix X;
  Vector y;
  arm_rows(d, arm, X, y);
  return KernelRidge(std::move(X), y, spec, ridge);
}

KernelRidge fit_outcome_regression_cv(const Dataset& d, int arm, const KernelSpec& spec,
                                      const std::vector<double>& ridge_grid) {
  if (ridge_grid.empty()) throw std::invalid_argument("fit_outcome_regression_cv: empty ridge grid");
  Matrix X;
  Vector y;
  arm_rows(d, arm, X, y);
  const Index n = X.rows();
  const int folds = static_cast<int>(std::min<Index>(5, n));

  double best_ridge = ridge_grid.front();
  if (folds >= 2 && ridge_grid.size() > 1) {
    const Matrix K = gram(X, spec);
    double best_sse = std::numeric_limits<double>::infinity();
    for (const double ridge : ridge_grid) {
      double sse = 0.0;
      for (int f = 0; f < folds; ++f) {
        std::vector<Index> tr, ho;
        for (Index i = 0; i < n; ++i) ((i % folds == f) ? ho : tr).push_back(i);
        Matrix Ktr(static_cast<Index>(tr.size()), static_cast<Index>(tr.size()));
        for (size_t a = 0; a < tr.size(); ++a)
          for (size_t b = 0; b < tr.size(); ++b) Ktr(static_cast<Index>(a), static_cast<Index>(b)) = K(tr[a], tr[b]);
        Vector ytr(static_cast<Index>(tr.size()));
        for (size_t a = 0; a < tr.size(); ++a) ytr[static_cast<Index>(a)] = y[tr[a]];
        const KrrCoef cf = krr_solve(Ktr, ytr, ridge);
        for (Index h : ho) {
          double pred = cf.b0;
          for (size_t a = 0; a < tr.size(); ++a) pred += cf.c[static_cast<Index>(a)] * K(h, tr[a]);
          const double e = pred - y[h];
          sse += e * e;
        }
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_ridge = ridge;
      }
    }
  }
  return KernelRidge(std::move(X), y, spec, best_ridge);
}

namespace {

/// 0/1 mask per group for each subsample, drawn once from the tuning seed;
/// identical across all grid points so the scores are comparable.
struct SubsampleMasks {
  Matrix m1, m0;  ///< n1 x B and n0 x B
  int count = 0;
};

SubsampleMasks draw_masks(const GramCache& g, const TuningConfig& cfg) {
  SubsampleMasks masks;
  masks.count = cfg.n_subsamples;
  masks.m1 = Matrix::Zero(g.n1, cfg.n_subsamples);
  masks.m0 = Matrix::Zero(g.n0, cfg.n_subsamples);
  const int ns = static_cast<int>(g.n_s);
  const int k = std::max(2, static_cast<int>(std::lround(cfg.subsample_fraction * ns)));

  // map source-order index -> (group, position inside group)
  std::vector<std::pair<int, Index>> where(static_cast<size_t>(ns));
  for (Index i = 0; i < g.n1; ++i) where[static_cast<size_t>(g.pos1[static_cast<size_t>(i)])] = {1, i};
  for (Index i = 0; i < g.n0; ++i) where[static_cast<size_t>(g.pos0[static_cast<size_t>(i)])] = {0, i};

  Rng rng = Rng::derive(cfg.seed, stream::subsample);
  for (int s = 0; s < cfg.n_subsamples; ++s) {
    for (int idx : rng.sample_without_replacement(ns, std::min(k, ns))) {
      const auto [grp, pos] = where[static_cast<size_t>(idx)];
      if (grp == 1) masks.m1(pos, s) = 1.0;
      else masks.m0(pos, s) = 1.0;
    }
  }
  return masks;
}

/// Mean over subsamples of the treated-control MMD^2 of the full-sample
/// weights restricted to each subsample and renormalized per group.
double restricted_tc_score(const GramCache& g, const SubsampleMasks& masks, const Vector& w1,
                           const Vector& w0) {
  const Matrix V1 = masks.m1.array().colwise() * w1.array();
  const Matrix V0 = masks.m0.array().colwise() * w0.array();
  const Eigen::RowVectorXd s1 = V1.colwise().sum();
  const Eigen::RowVectorXd s0 = V0.colwise().sum();
  const Eigen::RowVectorXd t11 = (V1.array() * (g.k11 * V1).array()).colwise().sum();
  const Eigen::RowVectorXd t00 = (V0.array() * (g.k00 * V0).array()).colwise().sum();
  const Eigen::RowVectorXd t10 = (V1.array() * (g.k10 * V0).array()).colwise().sum();

  double total = 0.0;
  int valid = 0;
  for (int s = 0; s < masks.count; ++s) {
    if (!(s1[s] > 0.0) || !(s0[s] > 0.0)) continue;
    const double v = t11[s] / (s1[s] * s1[s]) + t00[s] / (s0[s] * s0[s]) -
                     2.0 * t10[s] / (s1[s] * s0[s]);
    total += std::max(v, 0.0);
    ++valid;
  }
  if (valid == 0) throw std::runtime_error("tuning: no subsample with both groups present");
  return total / static_cast<double>(valid);
}

/// Sensitivity mode: refit the balancing program on each subsample and
/// score the refit solution's treated-control MMD^2.
double refit_tc_score(const GramCache& g, const SubsampleMasks& masks,
                      const BalanceHyperparams& h, const QpOptions& qp_opts,
                      const Vector& w1_full, const Vector& w0_full) {
  double total = 0.0;
  int valid = 0;
  for (int s = 0; s < masks.count; ++s) {
    std::vector<Index> i1, i0;
    for (Index i = 0; i < g.n1; ++i)
      if (masks.m1(i, s) > 0.0) i1.push_back(i);
    for (Index i = 0; i < g.n0; ++i)
      if (masks.m0(i, s) > 0.0) i0.push_back(i);
    if (i1.empty() || i0.empty()) continue;
    const Index m1 = static_cast<Index>(i1.size()), m0 = static_cast<Index>(i0.size());
    const Index ms = m1 + m0;
    const double msd = static_cast<double>(ms);
    const double ntd = static_cast<double>(g.n_t);

    QpProblem p;
    p.Q.resize(ms, ms);
    p.b.resize(ms);
    for (Index a = 0; a < m1; ++a) {
      for (Index b = 0; b < m1; ++b) p.Q(a, b) = g.k11(i1[static_cast<size_t>(a)], i1[static_cast<size_t>(b)]);
      for (Index b = 0; b < m0; ++b) p.Q(a, m1 + b) = (h.alpha - 1.0) * g.k10(i1[static_cast<size_t>(a)], i0[static_cast<size_t>(b)]);
    }
    for (Index a = 0; a < m0; ++a) {
      for (Index b = 0; b < m0; ++b) p.Q(m1 + a, m1 + b) = g.k00(i0[static_cast<size_t>(a)], i0[static_cast<size_t>(b)]);
    }
    p.Q.bottomLeftCorner(m0, m1) = p.Q.topRightCorner(m1, m0).transpose();
    p.Q.diagonal().array() += h.lambda;
    p.Q /= msd * msd;
    for (Index a = 0; a < m1; ++a) p.b[a] = g.k1t.row(i1[static_cast<size_t>(a)]).sum();
    for (Index a = 0; a < m0; ++a) p.b[m1 + a] = g.k0t.row(i0[static_cast<size_t>(a)]).sum();
    p.b *= h.alpha / (msd * ntd);
    p.rhs = msd;
    p.eq_groups.resize(2);
    for (Index a = 0; a < m1; ++a) p.eq_groups[0].push_back(a);
    for (Index a = 0; a < m0; ++a) p.eq_groups[1].push_back(m1 + a);

    // restricted full-sample solution as warm start
    QpWarmStart warm;
    warm.z.resize(ms);
    for (Index a = 0; a < m1; ++a) warm.z[a] = w1_full[i1[static_cast<size_t>(a)]];
    for (Index a = 0; a < m0; ++a) warm.z[m1 + a] = w0_full[i0[static_cast<size_t>(a)]];
    warm.z.head(m1) *= msd / warm.z.head(m1).sum();
    warm.z.tail(m0) *= msd / warm.z.tail(m0).sum();
    warm.u = Vector::Zero(ms);

    const QpSolution sol = solve_qp(p, qp_opts, &warm);
    const Vector p1 = sol.w.head(m1) / sol.w.head(m1).sum();
    const Vector p0 = sol.w.tail(m0) / sol.w.tail(m0).sum();
    double t11 = 0.0, t00 = 0.0, t10 = 0.0;
    for (Index a = 0; a < m1; ++a)
      for (Index b = 0; b < m1; ++b) t11 += p1[a] * p1[b] * g.k11(i1[static_cast<size_t>(a)], i1[static_cast<size_t>(b)]);
    for (Index a = 0; a < m0; ++a)
      for (Index b = 0; b < m0; ++b) t00 += p0[a] * p0[b] * g.k00(i0[static_cast<size_t>(a)], i0[static_cast<size_t>(b)]);
    for (Index a = 0; a < m1; ++a)
      for (Index b = 0; b < m0; ++b) t10 += p1[a] * p0[b] * g.k10(i1[static_cast<size_t>(a)], i0[static_cast<size_t>(b)]);
    total += std::max(t11 + t00 - 2.0 * t10, 0.0);
    ++valid;
  }
  if (valid == 0) throw std::runtime_error("tuning: no subsample with both groups present");
  return total / static_cast<double>(valid);
}

struct LambdaSweep {
  LambdaSelection selection;
  std::vector<WeightSolution> solutions;  ///< per grid point; empty weights if failed
  int picked = -1;
};

LambdaSweep sweep_lambda(const GramCache& g, const SubsampleMasks& masks, double alpha,
                         const TuningConfig& cfg) {
  const size_t L = cfg.lambda_grid.size();
  LambdaSweep sweep;
  sweep.selection.scores.resize(L);
  sweep.solutions.resize(L);

  // descending lambda: heavily penalized solves are easy and chain well
  QpWarmStart warm;
  bool have_warm = false;
  for (size_t j = L; j-- > 0;) {
    const BalanceHyperparams h{alpha, cfg.lambda_grid[j]};
    LambdaScore& entry = sweep.selection.scores[j];
    entry.lambda = h.lambda;
    try {
      QpWarmStart warm_out;
      const WeightSolution ws = solve_balancing_weights(
          g, h, cfg.qp, have_warm ? &warm : nullptr, &warm_out);
      warm = warm_out;
      have_warm = true;
      Vector w1, w0;
      g.split(ws.w, w1, w0);
      entry.score = cfg.refit_subsamples
                        ? refit_tc_score(g, masks, h, cfg.qp, w1, w0)
                        : restricted_tc_score(g, masks, w1, w0);
      sweep.solutions[j] = ws;
    } catch (const std::exception&) {
      entry.failed = true;
      have_warm = false;
    }
  }
  sweep.picked = pick_lambda_index(sweep.selection.scores);
  if (sweep.picked >= 0) sweep.selection.lambda = cfg.lambda_grid[static_cast<size_t>(sweep.picked)];
  return sweep;
}

}  // namespace

int pick_lambda_index(const std::vector<LambdaScore>& scores) {
  int best = -1;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (scores[j].failed) continue;
    if (best < 0 || scores[j].score < scores[static_cast<size_t>(best)].score) {
      best = static_cast<int>(j);  // strict: ties keep the smaller lambda
    }
  }
  return best;
}

int pick_alpha_index(const std::vector<AlphaRecord>& report) {
  int best = -1;
  for (size_t j = 0; j < report.size(); ++j) {
    if (report[j].failed) continue;
    if (best < 0 || report[j].value >= report[static_cast<size_t>(best)].value) {
      best = static_cast<int>(j);  // non-strict: ties keep the larger alpha
    }
  }
  return best;
}

LambdaSelection select_lambda(const Dataset& d, const KernelSpec& spec, double alpha,
                              const TuningConfig& cfg) {
  validate(cfg);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("select_lambda: alpha outside [0, 1]");
  const GramCache g = GramCache::build(d, spec);
  const SubsampleMasks masks = draw_masks(g, cfg);
  LambdaSweep sweep = sweep_lambda(g, masks, alpha, cfg);
  if (sweep.picked < 0) throw std::runtime_error("select_lambda: every lambda grid point failed");
  return std::move(sweep.selection);
}

TuningResult select_alpha(const Dataset& d, const KernelSpec& spec, const TuningConfig& cfg,
                          const OutcomePredictors* predictors) {
  validate(cfg);
  const GramCache g = GramCache::build(d, spec);
  const SubsampleMasks masks = draw_masks(g, cfg);

  Matrix Xt(g.n_t, d.dim());
  for (Index i = 0; i < g.n_t; ++i) Xt.row(i) = d.covariates().row(g.idx.t[static_cast<size_t>(i)]);

  Vector mu0_t, mu1_t;
  if (predictors) {
    mu0_t = predictors->mu0(Xt);
    mu1_t = predictors->mu1(Xt);
  } else {
    mu0_t = fit_outcome_regression_cv(d, 0, spec, cfg.krr_ridge_grid).predict(Xt);
    mu1_t = fit_outcome_regression_cv(d, 1, spec, cfg.krr_ridge_grid).predict(Xt);
  }

  TuningResult result;
  result.report.resize(cfg.alpha_grid.size());
  std::vector<WeightSolution> weights(cfg.alpha_grid.size());
  std::vector<LinearRule> rules(cfg.alpha_grid.size());

  for (size_t j = 0; j < cfg.alpha_grid.size(); ++j) {
    AlphaRecord& rec = result.report[j];
    rec.alpha = cfg.alpha_grid[j];
    try {
      LambdaSweep sweep = sweep_lambda(g, masks, rec.alpha, cfg);
      if (sweep.picked < 0) throw std::runtime_error("all lambda grid points failed");
      const WeightSolution& ws = sweep.solutions[static_cast<size_t>(sweep.picked)];
      rec.lambda = sweep.selection.lambda;
      rec.ess = ws.ess;
      const LinearRule rule = learn_linear_rule(ws, d, cfg.learn_ridge);
      const Vector dec = rule.decide_all(Xt);
      rec.value = (dec.array() * mu1_t.array() + (1.0 - dec.array()) * mu0_t.array()).mean();
      weights[j] = ws;
      rules[j] = rule;
    } catch (const std::exception&) {
      rec.failed = true;
    }
  }

  const int pick = pick_alpha_index(result.report);
  if (pick < 0) throw std::runtime_error("select_alpha: every alpha grid point failed");
  const size_t jp = static_cast<size_t>(pick);
  result.alpha = result.report[jp].alpha;
  result.lambda = result.report[jp].lambda;
  result.weights = weights[jp];
  result.rule = rules[jp];
  return result;
}

}  // namespace itrbal

#include "itrbal/balance.hpp"

#include <cmath>
#include <stdexcept>

namespace itrbal {

void validate(const BalanceHyperparams& h) {
  if (!(h.alpha >= 0.0 && h.alpha <= 1.0)) throw std::invalid_argument("BalanceHyperparams: alpha outside [0, 1]");
  if (!(h.lambda > 0.0)) throw std::invalid_argument("BalanceHyperparams: lambda must be positive");
}

QpProblem assemble_qp(const GramCache& g, const BalanceHyperparams& h) {
  validate(h);
  const Index n1 = g.n1, n0 = g.n0, ns = g.n_s;
  const double nsd = static_cast<double>(ns);
  const double ntd = static_cast<double>(g.n_t);
  const double inv_ns2 = 1.0 / (nsd * nsd);

  QpProblem p;
  p.Q.resize(ns, ns);
  p.Q.topLeftCorner(n1, n1) = inv_ns2 * g.k11;
  p.Q.topLeftCorner(n1, n1).diagonal().array() += inv_ns2 * h.lambda;
  p.Q.bottomRightCorner(n0, n0) = inv_ns2 * g.k00;
  p.Q.bottomRightCorner(n0, n0).diagonal().array() += inv_ns2 * h.lambda;
  p.Q.topRightCorner(n1, n0) = (inv_ns2 * (h.alpha - 1.0)) * g.k10;
  p.Q.bottomLeftCorner(n0, n1) = p.Q.topRightCorner(n1, n0).transpose();

  p.b.resize(ns);
  const double bscale = h.alpha / (nsd * ntd);
  p.b.head(n1) = bscale * g.k1t.rowwise().sum();
  p.b.tail(n0) = bscale * g.k0t.rowwise().sum();

  p.constant = 2.0 * h.alpha / (ntd * ntd) * g.ktt_sum;

  p.eq_groups.resize(2);
  p.eq_groups[0].resize(static_cast<size_t>(n1));
  p.eq_groups[1].resize(static_cast<size_t>(n0));
  for (Index i = 0; i < n1; ++i) p.eq_groups[0][static_cast<size_t>(i)] = i;
  for (Index i = 0; i < n0; ++i) p.eq_groups[1][static_cast<size_t>(i)] = n1 + i;
  p.rhs = nsd;
  return p;
}

QpProblem assemble_qp(const Dataset& d, const KernelSpec& spec, const BalanceHyperparams& h) {
  return assemble_qp(GramCache::build(d, spec), h);
}

WeightSolution solve_balancing_weights(const GramCache& g, const BalanceHyperparams& h,
                                       const QpOptions& opts, const QpWarmStart* warm,
                                       QpWarmStart* warm_out) {
  const QpProblem p = assemble_qp(g, h);
  const QpSolution sol = solve_qp(p, opts, warm, warm_out);

  // exact group renormalization; the solver meets the sums only to tolerance
  const double nsd = static_cast<double>(g.n_s);
  Vector w1 = sol.w.head(g.n1);
  Vector w0 = sol.w.tail(g.n0);
  w1 *= nsd / w1.sum();
  w0 *= nsd / w0.sum();

  Vector stacked(g.n_s);
  stacked << w1, w0;

  WeightSolution ws;
  ws.w = g.join(w1, w0);
  ws.alpha = h.alpha;
  ws.lambda = h.lambda;
  ws.objective = stacked.dot(p.Q * stacked) - 2.0 * p.b.dot(stacked) + p.constant;
  const auto mmds = group_mmds(g, ws.w);
  ws.mmd_t1 = mmds[0];
  ws.mmd_t0 = mmds[1];
  ws.mmd_10 = mmds[2];
  ws.ess = effective_sample_size(ws.w);
  return ws;
}

WeightSolution solve_balancing_weights(const Dataset& d, const KernelSpec& spec,
                                       const BalanceHyperparams& h, const QpOptions& opts,
                                       const QpWarmStart* warm, QpWarmStart* warm_out) {
  return solve_balancing_weights(GramCache::build(d, spec), h, opts, warm, warm_out);
}

}  // namespace itrbal

#include "itrbal/mmd.hpp"

#include <cmath>
#include <stdexcept>

namespace itrbal {

WeightedSample::WeightedSample(Matrix pts, Vector m)
    : points(std::move(pts)), mass(std::move(m)) {
  if (points.rows() != mass.size()) throw std::invalid_argument("WeightedSample: size mismatch");
  if (points.rows() == 0) throw std::invalid_argument("WeightedSample: empty sample");
  if ((mass.array() < 0.0).any()) throw std::invalid_argument("WeightedSample: negative mass");
  if (std::abs(mass.sum() - 1.0) > 1e-10) throw std::invalid_argument("WeightedSample: mass does not sum to 1");
}

namespace {

inline double clamp_mmd(double v) { return v < 0.0 ? 0.0 : v; }

}  // namespace

double mmd_squared(const WeightedSample& P, const WeightedSample& Q, const KernelSpec& spec) {
  if (P.points.cols() != Q.points.cols()) throw std::invalid_argument("mmd_squared: dimension mismatch");
  const Matrix kpp = gram(P.points, spec);
  const Matrix kqq = gram(Q.points, spec);
  const Matrix kpq = gram(P.points, Q.points, spec);
  const double v = P.mass.dot(kpp * P.mass) + Q.mass.dot(kqq * Q.mass) -
                   2.0 * P.mass.dot(kpq * Q.mass);
  return clamp_mmd(v);
}

GramCache GramCache::build(const Dataset& d, const KernelSpec& spec) {
  validate(spec);
  GramCache g;
  g.spec = spec;
  g.idx = d.groups();
  g.n1 = static_cast<Index>(g.idx.s1.size());
  g.n0 = static_cast<Index>(g.idx.s0.size());
  g.n_t = static_cast<Index>(g.idx.t.size());
  g.n_s = g.n1 + g.n0;

  const Matrix& X = d.covariates();
  auto take = [&X](const std::vector<Index>& rows) {
    Matrix M(static_cast<Index>(rows.size()), X.cols());
    for (Index i = 0; i < M.rows(); ++i) M.row(i) = X.row(rows[static_cast<size_t>(i)]);
    return M;
  };
  g.x1 = take(g.idx.s1);
  g.x0 = take(g.idx.s0);
  g.xt = take(g.idx.t);

  g.k11 = gram(g.x1, spec);
  g.k00 = gram(g.x0, spec);
  g.k10 = gram(g.x1, g.x0, spec);
  g.k1t = gram(g.x1, g.xt, spec);
  g.k0t = gram(g.x0, g.xt, spec);

  // grand sum of the target block, accumulated without storing it
  const double inv2s2 = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  double s = static_cast<double>(g.n_t);  // diagonal
  for (Index i = 0; i < g.n_t; ++i) {
    for (Index j = i + 1; j < g.n_t; ++j) {
      s += 2.0 * std::exp(-(g.xt.row(i) - g.xt.row(j)).squaredNorm() * inv2s2);
    }
  }
  g.ktt_sum = s;

  // positions of each group inside the source-order weight vector
  const auto& src = d.source_rows();
  g.pos1.reserve(static_cast<size_t>(g.n1));
  g.pos0.reserve(static_cast<size_t>(g.n0));
  for (Index k = 0; k < static_cast<Index>(src.size()); ++k) {
    if (*d.treatment(src[static_cast<size_t>(k)]) == 1) g.pos1.push_back(k);
    else g.pos0.push_back(k);
  }
  return g;
}

void GramCache::split(const Vector& w_source, Vector& w1, Vector& w0) const {
  if (w_source.size() != n_s) throw std::invalid_argument("GramCache::split: weight length != n_s");
  w1.resize(n1);
  w0.resize(n0);
  for (Index i = 0; i < n1; ++i) w1[i] = w_source[pos1[static_cast<size_t>(i)]];
  for (Index i = 0; i < n0; ++i) w0[i] = w_source[pos0[static_cast<size_t>(i)]];
}

Vector GramCache::join(const Vector& w1, const Vector& w0) const {
  Vector w(n_s);
  for (Index i = 0; i < n1; ++i) w[pos1[static_cast<size_t>(i)]] = w1[i];
  for (Index i = 0; i < n0; ++i) w[pos0[static_cast<size_t>(i)]] = w0[i];
  return w;
}

std::array<double, 3> group_mmds(const GramCache& g, const Vector& w) {
  Vector w1, w0;
  g.split(w, w1, w0);
  const double ns = static_cast<double>(g.n_s);
  const double nt = static_cast<double>(g.n_t);
  const Vector p = w1 / ns;
  const Vector q = w0 / ns;
  const double t_self = g.ktt_sum / (nt * nt);
  const double one_over_nt = 1.0 / nt;

  const double pp = p.dot(g.k11 * p);
  const double qq = q.dot(g.k00 * q);
  const double pq = p.dot(g.k10 * q);
  const double pt = p.dot(g.k1t.rowwise().sum()) * one_over_nt;
  const double qt = q.dot(g.k0t.rowwise().sum()) * one_over_nt;

  const double mmd_t1 = pp + t_self - 2.0 * pt;
  const double mmd_t0 = qq + t_self - 2.0 * qt;
  const double mmd_10 = pp + qq - 2.0 * pq;
  auto clamp = [](double v) { return v < 0.0 ? 0.0 : v; };
  return {clamp(mmd_t1), clamp(mmd_t0), clamp(mmd_10)};
}

std::array<double, 3> group_mmds(const Dataset& d, const Vector& w, const KernelSpec& spec) {
  return group_mmds(GramCache::build(d, spec), w);
}

}  // namespace itrbal

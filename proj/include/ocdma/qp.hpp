#pragma once

// Primal-dual interior-point method (Mehrotra predictor-corrector) for dense
// convex QPs
//
//     minimize   1/2 x'Qx + g'x
//     subject to A x >= b,  lo <= x <= hi
//
// Simple bounds are carried as diagonal terms in the normal equations. With
// elastic_penalty > 0 every general row gets a slack s >= 0, A x + s >= b, priced
// at elastic_penalty * sum(s); an inconsistent linearization then still yields a
// solution, flagged as relaxed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ocdma/core.hpp"
#include "ocdma/metrics.hpp"

namespace ocdma {

struct QpProblem {
  Matrix Q;
  Vector g;
  Matrix A;
  Vector b;
  Vector lo;  // may hold -inf
  Vector hi;  // may hold +inf

  Eigen::Index variables() const { return g.size(); }
  Eigen::Index rows() const { return b.size(); }

  double objective(const Vector& x) const { return 0.5 * x.dot(Q * x) + g.dot(x); }
};

struct QpOptions {
  double gap_tol = 1e-8;       // on the total complementarity w'z
  double residual_tol = 1e-8;  // relative primal/dual residuals
  int max_iters = 100;
  double elastic_penalty = 0.0;
  double relaxed_tol = 1e-9;
};

struct QpSolution {
  Vector x;
  Vector multipliers;  // one per general row, >= 0
  Vector elastic;      // empty unless elastic_penalty > 0
  bool relaxed = false;
  int iterations = 0;
  double objective = 0.0;
  double gap = 0.0;
};

namespace detail {

struct BoundSet {
  std::vector<Eigen::Index> index;
  std::vector<double> value;
  double sign = 1.0;  // +1: x_i >= value, -1: -x_i >= -value
};

inline double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

}  // namespace detail

inline QpSolution ip_qp_solve(const QpProblem& qp, const QpOptions& opts = {},
                              FlopCounter* flops = nullptr) {
  const Eigen::Index n0 = qp.variables();
  const Eigen::Index m = qp.rows();
  if (qp.Q.rows() != n0 || qp.Q.cols() != n0 || qp.A.cols() != n0 || qp.A.rows() != m ||
      qp.lo.size() != n0 || qp.hi.size() != n0)
    throw Error(ErrorCode::LengthMismatch, "inconsistent QP dimensions");

  const bool elastic = opts.elastic_penalty > 0.0 && m > 0;
  const Eigen::Index n = elastic ? n0 + m : n0;

  Matrix Q = Matrix::Zero(n, n);
  Q.topLeftCorner(n0, n0) = qp.Q;
  Vector g(n);
  g.head(n0) = qp.g;
  Matrix A(m, n);
  A.leftCols(n0) = qp.A;
  Vector lo(n), hi(n);
  lo.head(n0) = qp.lo;
  hi.head(n0) = qp.hi;
  if (elastic) {
    g.tail(m).setConstant(opts.elastic_penalty);
    A.rightCols(m).setIdentity();
    lo.tail(m).setZero();
    hi.tail(m).setConstant(std::numeric_limits<double>::infinity());
  }

  detail::BoundSet lower, upper;
  upper.sign = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(lo(i))) { lower.index.push_back(i); lower.value.push_back(lo(i)); }
    if (std::isfinite(hi(i))) { upper.index.push_back(i); upper.value.push_back(hi(i)); }
    if (std::isfinite(lo(i)) && std::isfinite(hi(i)) && lo(i) > hi(i))
      throw Error(ErrorCode::InvalidArgument, "QP bound lo > hi");
  }
  const auto nl = static_cast<Eigen::Index>(lower.index.size());
  const auto nu = static_cast<Eigen::Index>(upper.index.size());
  const Eigen::Index mt = m + nl + nu;

  // C x - w = c with C = [A; I_L; -I_U]
  auto apply_c = [&](const Vector& x) {
    Vector r(mt);
    r.head(m) = A * x;
    for (Eigen::Index k = 0; k < nl; ++k) r(m + k) = x(lower.index[k]);
    for (Eigen::Index k = 0; k < nu; ++k) r(m + nl + k) = -x(upper.index[k]);
    return r;
  };
  auto apply_ct = [&](const Vector& y) {
    Vector r = A.transpose() * y.head(m);
    for (Eigen::Index k = 0; k < nl; ++k) r(lower.index[k]) += y(m + k);
    for (Eigen::Index k = 0; k < nu; ++k) r(upper.index[k]) -= y(m + nl + k);
    return r;
  };
  Vector c(mt);
  c.head(m) = qp.b;
  for (Eigen::Index k = 0; k < nl; ++k) c(m + k) = lower.value[k];
  for (Eigen::Index k = 0; k < nu; ++k) c(m + nl + k) = -upper.value[k];

  // Start inside the bounds; slacks and duals at a common scale.
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool fl = std::isfinite(lo(i));
    const bool fu = std::isfinite(hi(i));
    if (fl && fu) x(i) = 0.5 * (lo(i) + hi(i));
    else if (fl) x(i) = std::max(0.0, lo(i) + 1.0);
    else if (fu) x(i) = std::min(0.0, hi(i) - 1.0);
    else x(i) = 0.0;
  }
  if (elastic) {
    const Vector ax = qp.A * x.head(n0);
    for (Eigen::Index r = 0; r < m; ++r) x(n0 + r) = std::max(1.0, qp.b(r) - ax(r) + 1.0);
  }
  Vector w = (apply_c(x) - c).cwiseMax(1.0);
  Vector z = Vector::Ones(mt);

  const double c_scale = 1.0 + (mt > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0);
  const double g_scale = 1.0 + g.lpNorm<Eigen::Infinity>();

  QpSolution sol;
  for (int it = 0;; ++it) {
    const Vector rd = Q * x + g - apply_ct(z);
    const Vector rp = apply_c(x) - w - c;
    const double gap = w.dot(z);
    sol.iterations = it;
    sol.gap = gap;
    if (gap <= opts.gap_tol && rp.lpNorm<Eigen::Infinity>() <= opts.residual_tol * c_scale &&
        rd.lpNorm<Eigen::Infinity>() <= opts.residual_tol * g_scale)
      break;
    if (it == opts.max_iters || !x.allFinite() || !z.allFinite())
      throw Error(ErrorCode::NumericalFailure,
                  "interior point stalled after " + std::to_string(it) + " iterations (gap " +
                      format_g(gap) + ")");

    const Vector dz_w = z.cwiseQuotient(w);
    Matrix normal = Q;
    normal.noalias() += A.transpose() * dz_w.head(m).asDiagonal() * A;
    for (Eigen::Index k = 0; k < nl; ++k) normal(lower.index[k], lower.index[k]) += dz_w(m + k);
    for (Eigen::Index k = 0; k < nu; ++k) normal(upper.index[k], upper.index[k]) += dz_w(m + nl + k);
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success) {
      normal.diagonal().array() += 1e-12 * (1.0 + normal.diagonal().cwiseAbs().maxCoeff());
      llt.compute(normal);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::NumericalFailure, "normal equations not positive definite");
    }
    if (flops != nullptr) {
      flops->add(2 * m * n * n + 4 * mt * n)
          .charge(Kernel::Cholesky, {n, 0})
          .charge(Kernel::MatVec, {m, n})
          .charge(Kernel::MatVec, {n, n});
    }

    // Solves the reduced Newton system for a complementarity target `comp`.
    auto newton = [&](const Vector& comp, Vector& dx, Vector& dw, Vector& dz) {
      const Vector rhs = -rd + apply_ct((comp - z.cwiseProduct(rp)).cwiseQuotient(w));
      dx = llt.solve(rhs);
      dw = apply_c(dx) + rp;
      dz = (comp - z.cwiseProduct(dw)).cwiseQuotient(w);
    };

    const double mu = gap / static_cast<double>(mt);
    Vector dx, dw, dz;
    newton(-w.cwiseProduct(z), dx, dw, dz);
    const double ap_aff = detail::max_step(w, dw);
    const double ad_aff = detail::max_step(z, dz);
    const double mu_aff = (w + ap_aff * dw).dot(z + ad_aff * dz) / static_cast<double>(mt);
    const double sigma = std::pow(mu_aff / mu, 3);

    const Vector comp =
        -w.cwiseProduct(z) - dw.cwiseProduct(dz) + Vector::Constant(mt, sigma * mu);
    newton(comp, dx, dw, dz);
    const double ap = std::min(1.0, 0.995 * detail::max_step(w, dw));
    const double ad = std::min(1.0, 0.995 * detail::max_step(z, dz));
    x += ap * dx;
    w += ap * dw;
    z += ad * dz;
  }

  sol.x = x.head(n0);
  sol.multipliers = z.head(m);
  if (elastic) {
    sol.elastic = x.tail(m).cwiseMax(0.0);
    sol.relaxed = (sol.elastic.array() > opts.relaxed_tol * (1.0 + qp.b.cwiseAbs().array())).any();
  }
  sol.objective = qp.objective(sol.x);
  return sol;
}

}  // namespace ocdma

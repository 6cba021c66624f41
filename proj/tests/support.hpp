#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except for
// instance generation and plain data types.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ocdma/ocdma.hpp"

namespace testsupport {

using ocdma::Matrix;
using ocdma::NetworkInstance;
using ocdma::PowerVector;
using ocdma::Vector;

using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// CIR in extended precision, straight from the definition.
inline LVector cir_long(const NetworkInstance& inst, const LVector& p) {
  LVector out(inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    long double d = inst.noise(i);
    for (Eigen::Index j = 0; j < inst.K; ++j)
      if (j != i) d += static_cast<long double>(inst.G(i, j)) * p(j);
    out(i) = static_cast<long double>(inst.G(i, i)) * p(i) / d;
  }
  return out;
}

/// Step for coordinate j: relative to p_j, but never so small that the change
/// in anyone's interference drowns in rounding.
inline long double fd_step(const NetworkInstance& inst, long double pj, long double rel) {
  const long double floor = inst.noise.minCoeff() / inst.G.maxCoeff();
  return rel * std::max(pj, floor);
}

/// Central-difference CIR Jacobian evaluated in long double.
inline Matrix cir_jacobian_fd(const NetworkInstance& inst, const PowerVector& p, long double rel = 1e-6L) {
  const LVector base = p.cast<long double>();
  Matrix jac(inst.K, inst.K);
  for (Eigen::Index j = 0; j < inst.K; ++j) {
    const long double h = fd_step(inst, base(j), rel);
    LVector a = base, b = base;
    a(j) += h;
    b(j) -= h;
    const LVector d = (cir_long(inst, a) - cir_long(inst, b)) / (2.0L * h);
    jac.col(j) = d.cast<double>();
  }
  return jac;
}

/// A_rho, classical form, in long double.
inline long double aug_lagrangian_long(const NetworkInstance& inst, const LVector& p, const Vector& mu, double rho) {
  const LVector g = cir_long(inst, p);
  long double a = p.sum();
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    const long double shift = mu(i) / static_cast<long double>(rho);
    const long double v = inst.cir_target(i) - g(i) + shift;
    const long double pos = v > 0 ? v : 0;
    a += 0.5L * rho * (pos * pos - shift * shift);
  }
  return a;
}

inline Vector aug_lagrangian_grad_fd(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                                     double rho, long double rel = 1e-7L) {
  const LVector base = p.cast<long double>();
  Vector g(inst.K);
  for (Eigen::Index j = 0; j < inst.K; ++j) {
    const long double h = fd_step(inst, base(j), rel);
    LVector a = base, b = base;
    a(j) += h;
    b(j) -= h;
    g(j) = static_cast<double>((aug_lagrangian_long(inst, a, mu, rho) - aug_lagrangian_long(inst, b, mu, rho)) /
                               (2.0L * h));
  }
  return g;
}

/// Uniform in dBm over the instance's power box.
inline PowerVector random_point(const NetworkInstance& inst, std::mt19937_64& rng) {
  const double lo = 10.0 * std::log10(inst.p_min) + 30.0;
  const double hi = 10.0 * std::log10(inst.p_max) + 30.0;
  std::uniform_real_distribution<double> u(lo, hi);
  PowerVector p(inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) p(i) = ocdma::dbm_to_watt(u(rng));
  return p;
}

struct EnumeratedQp {
  Vector x;
  double objective = std::numeric_limits<double>::infinity();
  bool found = false;
};

/// Brute-force optimum of min 1/2 x'Qx + g'x s.t. A x >= b, lo <= x <= hi for
/// strictly convex Q: every variable is free, at lo or at hi, every row active
/// or not; each guess gives an equality-constrained QP solved through its KKT
/// system. The optimum is the best primal-feasible candidate.
inline EnumeratedQp enumerate_qp(const ocdma::QpProblem& qp, double feas_tol = 1e-10) {
  const Eigen::Index n = qp.variables();
  const Eigen::Index m = qp.rows();
  EnumeratedQp best;
  std::int64_t var_states = 1;
  for (Eigen::Index i = 0; i < n; ++i) var_states *= 3;
  for (std::int64_t vs = 0; vs < var_states; ++vs) {
    std::vector<int> state(static_cast<std::size_t>(n));
    std::int64_t code = vs;
    bool usable = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(code % 3);
      code /= 3;
      const int s = state[static_cast<std::size_t>(i)];
      if ((s == 1 && !std::isfinite(qp.lo(i))) || (s == 2 && !std::isfinite(qp.hi(i)))) usable = false;
    }
    if (!usable) continue;
    for (std::int64_t rows = 0; rows < (std::int64_t{1} << m); ++rows) {
      std::vector<Eigen::Index> active;
      for (Eigen::Index r = 0; r < m; ++r)
        if (rows & (std::int64_t{1} << r)) active.push_back(r);
      std::vector<Eigen::Index> fixed;
      for (Eigen::Index i = 0; i < n; ++i)
        if (state[static_cast<std::size_t>(i)] != 0) fixed.push_back(i);
      const Eigen::Index e = static_cast<Eigen::Index>(active.size() + fixed.size());
      Matrix kkt = Matrix::Zero(n + e, n + e);
      Vector rhs = Vector::Zero(n + e);
      kkt.topLeftCorner(n, n) = qp.Q;
      rhs.head(n) = -qp.g;
      Eigen::Index row = n;
      for (Eigen::Index r : active) {
        kkt.block(row, 0, 1, n) = qp.A.row(r);
        kkt.block(0, row, n, 1) = qp.A.row(r).transpose();
        rhs(row) = qp.b(r);
        ++row;
      }
      for (Eigen::Index i : fixed) {
        kkt(row, i) = 1.0;
        kkt(i, row) = 1.0;
        rhs(row) = state[static_cast<std::size_t>(i)] == 1 ? qp.lo(i) : qp.hi(i);
        ++row;
      }
      Eigen::FullPivLU<Matrix> lu(kkt);
      if (!lu.isInvertible()) continue;
      const Vector x = lu.solve(rhs).head(n);
      bool feasible = true;
      for (Eigen::Index i = 0; i < n && feasible; ++i)
        feasible = x(i) >= qp.lo(i) - feas_tol && x(i) <= qp.hi(i) + feas_tol;
      if (feasible && m > 0) feasible = ((qp.A * x - qp.b).array() >= -feas_tol).all();
      if (!feasible) continue;
      const double f = qp.objective(x);
      if (f < best.objective) {
        best.objective = f;
        best.x = x;
        best.found = true;
      }
    }
  }
  return best;
}

/// Random strictly convex QP in n variables with m rows, feasible by construction.
inline ocdma::QpProblem random_qp(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    Matrix out(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) out(i, j) = u(rng);
    return out;
  };
  ocdma::QpProblem qp;
  const Matrix b = rnd(n, n);
  qp.Q = b * b.transpose() + 0.5 * Matrix::Identity(n, n);
  qp.g = rnd(n, 1);
  qp.A = rnd(m, n);
  qp.lo = Vector::Constant(n, -1.0);
  qp.hi = Vector::Constant(n, 1.0);
  // A point strictly inside the box, with every row satisfied at it.
  const Vector x0 = 0.5 * rnd(n, 1);
  qp.b = qp.A * x0 - 0.2 * (rnd(m, 1).cwiseAbs());
  return qp;
}

}  // namespace testsupport

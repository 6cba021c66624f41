#pragma once

// Modified Hopfield network for the minimum-power problem.
//
// The state is v = (p, q): K powers and K CIR slacks. The CIR inequalities are
// rewritten as the equality h(v) = Gamma(p) - Gamma* - q = 0 with q >= 0, and the
// network alternates three steps:
//   (I)   gradient step on the objective, p <- p - dt (q untouched, df/dq = 0)
//   (II)  confinement onto h(v) = 0 by iterated minimum-norm Newton projection
//   (III) a saturating ramp activation that enforces the power box and q >= 0
// (II) and (III) are repeated until the activated state stays on the manifold.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ocdma/core.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"
#include "ocdma/trace.hpp"

namespace ocdma {

struct ConstraintEval {
  Vector h;
  Matrix jac;
};

/// h(v) and its K x 2K Jacobian [dGamma/dp, -I].
inline ConstraintEval constraint_map(const NetworkInstance& inst, const Vector& v) {
  require_same_length(v.size(), 2 * inst.K, "constraint_map");
  const Eigen::Index k = inst.K;
  const PowerVector p = v.head(k);
  ConstraintEval out;
  out.h = cir(inst, p) - inst.cir_target - v.tail(k);
  out.jac.resize(k, 2 * k);
  out.jac.leftCols(k) = cir_jacobian(inst, p);
  out.jac.rightCols(k) = -Matrix::Identity(k, k);
  return out;
}

struct ConfineOptions {
  double tol = 1e-10;
  int max_iters = 50;
  double max_condition = 1e12;
};

struct ConfineResult {
  Vector v;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton projection v <- v - J^T (J J^T)^{-1} h(v), repeated until ||h|| <= tol.
/// `map(v)` must return a ConstraintEval.
template <class ConstraintFn>
ConfineResult confine(const ConstraintFn& map, Vector v, const ConfineOptions& opts = {},
                      FlopCounter* flops = nullptr) {
  ConfineResult out;
  for (int it = 0;; ++it) {
    const ConstraintEval c = map(v);
    out.residual = c.h.norm();
    out.iterations = it;
    if (out.residual <= opts.tol) break;
    if (it == opts.max_iters)
      throw Error(ErrorCode::NoConvergence,
                  "confinement residual " + std::to_string(out.residual) + " after " +
                      std::to_string(it) + " projections");
    const Matrix jjt = c.jac * c.jac.transpose();
    Eigen::LLT<Matrix> llt(jjt);
    if (llt.info() != Eigen::Success || !(llt.rcond() * opts.max_condition > 1.0))
      throw Error(ErrorCode::RankDeficient, "constraint Jacobian is numerically rank deficient");
    v -= c.jac.transpose() * llt.solve(c.h);
    if (flops != nullptr) {
      const std::int64_t m = c.jac.rows();
      const std::int64_t n = c.jac.cols();
      flops->add(cir_eval_flops(m) + 2 * m * m + 2 * m * m * n)
          .charge(Kernel::Cholesky, {m, 0})
          .charge(Kernel::MatVec, {n, m})
          .charge(Kernel::Axpy, {n, 0});
    }
  }
  out.v = std::move(v);
  return out;
}

inline ConfineResult confine(const NetworkInstance& inst, Vector v, const ConfineOptions& opts = {},
                             FlopCounter* flops = nullptr) {
  return confine([&inst](const Vector& x) { return constraint_map(inst, x); }, std::move(v), opts, flops);
}

/// Box for the Hopfield state: powers in [p_min, p_max], slacks in [0, q_max].
struct HopfieldBox {
  double p_min = 0.0;
  double p_max = 0.0;
  double q_max = 0.0;
};

/// q_max: ten times the largest CIR reachable with every laser at p_max.
inline HopfieldBox hopfield_box(const NetworkInstance& inst) {
  const Vector full = cir(inst, PowerVector::Constant(inst.K, inst.p_max));
  return {inst.p_min, inst.p_max, 10.0 * full.maxCoeff()};
}

inline Vector activate(const Vector& v, const HopfieldBox& box) {
  const Eigen::Index k = v.size() / 2;
  Vector out(v.size());
  out.head(k) = v.head(k).cwiseMax(box.p_min).cwiseMin(box.p_max);
  out.tail(k) = v.tail(k).cwiseMax(0.0).cwiseMin(box.q_max);
  return out;
}

/// p <- p + dt (W_opt p + iota_opt) with W_opt = 0 and iota_opt = -grad(1^T p).
inline Vector optimize_step(const Vector& v, double dt) {
  const Eigen::Index k = v.size() / 2;
  Vector out = v;
  out.head(k).array() -= dt;
  return out;
}

struct HopfieldOptions {
  double dt = 0.1;
  ConfineOptions confinement;
  int max_alternations = 50;
  RunOptions run;
};

inline SolveResult solve_hopfield(const NetworkInstance& inst, const PowerVector& p0,
                                  const HopfieldOptions& opts = {}) {
  inst.validate();
  require_same_length(p0.size(), inst.K, "solve_hopfield");
  if (!(opts.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  opts.run.criterion.validate();

  const Eigen::Index k = inst.K;
  const HopfieldBox box = hopfield_box(inst);
  FlopCounter flops;
  RunRecorder rec("mH-NN", inst, opts.run, flops);

  Vector v(2 * k);
  v.head(k) = p0;
  v.tail(k).setZero();
  v = activate(v, box);
  rec.start(v.head(k));

  const auto map = [&inst](const Vector& x) { return constraint_map(inst, x); };
  for (int it = 1; it <= opts.run.criterion.max_iters; ++it) {
    v = activate(optimize_step(v, opts.dt), box);
    flops.charge(Kernel::Elementwise, {4 * k, 0});
    int rounds = 0;
    try {
      for (; rounds < opts.max_alternations; ++rounds) {
        const ConfineResult c = confine(map, v, opts.confinement, &flops);
        v = activate(c.v, box);
        flops.charge(Kernel::Elementwise, {4 * k, 0}).add(cir_eval_flops(k));
        if (map(v).h.norm() <= opts.confinement.tol) {
          ++rounds;
          break;
        }
      }
    } catch (const Error& e) {
      return rec.finish(false, SolverStatus::NumericalFailure, e.what());
    }
    PowerVector p = v.head(k);
    const bool done = rec.record(it, p, rounds);
    v.head(k) = p;
    if (done) return rec.finish(true, SolverStatus::Converged);
  }
  return rec.finish(false, SolverStatus::MaxIterations);
}

}  // namespace ocdma

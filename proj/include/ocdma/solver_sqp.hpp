#pragma once

// Sequential quadratic programming with box projection. Each iteration
// linearizes the CIR constraints, models the Lagrangian quadratically and
// solves the resulting convex QP by interior points; the step is globalized by
// backtracking on an l1 merit function.

#include <algorithm>
#include <cmath>
#include <string>

#include "ocdma/core.hpp"
#include "ocdma/fd.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"
#include "ocdma/qp.hpp"
#include "ocdma/trace.hpp"

namespace ocdma {

/// grad of sum_i w_i Gamma_i(p), analytic, O(K^2).
inline Vector weighted_cir_gradient(const NetworkInstance& inst, const PowerVector& p, const Vector& w) {
  const Vector d = interference(inst, p);
  const Vector gd = inst.G.diagonal();
  const Vector gamma = gd.cwiseProduct(p).cwiseQuotient(d);
  const Vector t = w.cwiseProduct(gamma).cwiseQuotient(d);
  Vector grad = -(inst.G.transpose() * t);
  grad += gd.cwiseProduct(t);  // undo the diagonal term of G^T t
  grad += w.cwiseProduct(gd).cwiseQuotient(d);
  return grad;
}

/// Hessian of the Lagrangian J - sum mu_i (Gamma_i - Gamma_i*), by central
/// differences of its analytic gradient, symmetrized. Exactly zero when mu = 0.
inline Matrix lagrangian_hessian(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                                 const FdOptions& fd = {}) {
  const Eigen::Index k = inst.K;
  Matrix h = Matrix::Zero(k, k);
  if (!(mu.array() != 0.0).any()) return h;
  PowerVector probe = p;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double step = fd.step_for(p(j));
    probe(j) = p(j) + step;
    const Vector gp = weighted_cir_gradient(inst, probe, mu);
    probe(j) = p(j) - step;
    const Vector gm = weighted_cir_gradient(inst, probe, mu);
    probe(j) = p(j);
    h.col(j) = -(gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

/// Smallest shift making a symmetric matrix strictly diagonally dominant, plus 1e-8.
inline double gershgorin_shift(const Matrix& m) {
  double need = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double off = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    need = std::max(need, off - m(i, i));
  }
  return need + 1e-8;
}

/// Smallest shift making a symmetric matrix positive definite: max(0, -lambda_min) + 1e-8.
inline double eigen_shift(const Matrix& m) {
  if (m.size() == 0) return 1e-8;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return std::max(0.0, -es.eigenvalues()(0)) + 1e-8;
}

enum class HessianShift { Eigen, Gershgorin };

struct SqpSubproblem {
  QpProblem qp;
  Matrix hessian;  // before the shift
  double shift = 0.0;
  Vector cir;
};

/// Step subproblem at p_k in the variable d = p - p_k:
///   minimize 1'd + 1/2 d'(H + shift I)d
///   s.t.     grad Gamma_i' d >= Gamma_i* - Gamma_i(p_k),  p_min - p_k <= d <= p_max - p_k
inline SqpSubproblem build_qp(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                              const FdOptions& fd = {}, HessianShift shift = HessianShift::Eigen) {
  require_same_length(p.size(), inst.K, "build_qp");
  require_same_length(mu.size(), inst.K, "build_qp");
  if (!inst.box().contains(p)) throw Error(ErrorCode::InvalidArgument, "build_qp needs p inside the box");
  const Eigen::Index k = inst.K;
  SqpSubproblem sub;
  sub.cir = cir(inst, p);
  sub.hessian = lagrangian_hessian(inst, p, mu, fd);
  sub.shift = shift == HessianShift::Eigen ? eigen_shift(sub.hessian) : gershgorin_shift(sub.hessian);
  sub.qp.Q = sub.hessian;
  sub.qp.Q.diagonal().array() += sub.shift;
  sub.qp.g = Vector::Ones(k);
  sub.qp.A = fd_cir_jacobian(inst, p, fd);
  sub.qp.b = inst.cir_target - sub.cir;
  sub.qp.lo = Vector::Constant(k, inst.p_min) - p;
  sub.qp.hi = Vector::Constant(k, inst.p_max) - p;
  return sub;
}

struct SqpOptions {
  FdOptions fd;
  HessianShift shift = HessianShift::Eigen;
  QpOptions qp{1e-8, 1e-8, 100, 1e6, 1e-9};
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  // Second-order corrections per iteration: re-solve the QP with the constraint
  // right-hand side evaluated at the trial point p + d.
  int corrections = 1;
  RunOptions run;
};

struct SqpState {
  PowerVector p;
  Vector mu;
  double merit_weight = 1.0;
  double step_alpha = 1.0;
  double shift = 0.0;
  bool relaxed = false;
};

inline double l1_merit(const NetworkInstance& inst, const PowerVector& p, double weight) {
  return objective(p) + weight * (inst.cir_target - cir(inst, p)).cwiseMax(0.0).sum();
}

inline SolveResult solve_sqp(const NetworkInstance& inst, const PowerVector& p0, const SqpOptions& opts = {}) {
  inst.validate();
  require_same_length(p0.size(), inst.K, "solve_sqp");
  opts.run.criterion.validate();
  if (!(opts.fd.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "fd step must be positive");

  const Eigen::Index k = inst.K;
  const PowerBox box = inst.box();
  FlopCounter flops;
  RunRecorder rec("SQP", inst, opts.run, flops);

  SqpState st;
  st.p = box.project(p0);
  st.mu = Vector::Zero(k);
  rec.start(st.p);

  const std::int64_t cir_cost = cir_eval_flops(k);
  for (int it = 1; it <= opts.run.criterion.max_iters; ++it) {
    int qp_iterations = 0;
    try {
      SqpSubproblem sub = build_qp(inst, st.p, st.mu, opts.fd, opts.shift);
      flops.add(cir_cost)
          .charge(Kernel::FdGradient, {2 * k, 4 * k})
          .charge(Kernel::FdGradient, {(st.mu.array() != 0.0).any() ? 2 * k : 0, 2 * cir_cost});
      st.shift = sub.shift;
      // Symmetric tridiagonalization plus QR sweeps, about 9K^3 for eigenvalues only.
      if (opts.shift == HessianShift::Eigen && (st.mu.array() != 0.0).any()) flops.add(9 * k * k * k);

      // Rows scaled to unit diagonal sensitivity; the IP then sees O(1) data.
      const Vector scale = sub.qp.A.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseInverse();
      const Vector unscaled_rhs = sub.qp.b;
      sub.qp.A = scale.asDiagonal() * sub.qp.A;
      sub.qp.b = scale.cwiseProduct(sub.qp.b);
      QpSolution qs = ip_qp_solve(sub.qp, opts.qp, &flops);
      qp_iterations = qs.iterations;
      st.relaxed = qs.relaxed;
      const Vector d = qs.x;

      const double violation = unscaled_rhs.cwiseMax(0.0).sum();
      const double residual = qs.elastic.size() > 0 ? qs.elastic.cwiseQuotient(scale).sum() : 0.0;
      const double phi0_slope_d = d.sum();

      // Corrected step: same model, rhs Gamma* - Gamma(p + d) + J d.
      Vector d_corr = d;
      bool corrected = false;
      for (int c = 0; c < opts.corrections; ++c) {
        const PowerVector q = box.project(st.p + d_corr);
        sub.qp.b = scale.cwiseProduct(inst.cir_target - cir(inst, q)) + sub.qp.A * d_corr;
        flops.add(cir_cost).charge(Kernel::MatVec, {k, k});
        try {
          QpSolution qc = ip_qp_solve(sub.qp, opts.qp, &flops);
          qp_iterations += qc.iterations;
          // A correction that needs the elastic slack is not worth taking.
          if (qc.relaxed && !qs.relaxed) break;
          d_corr = qc.x;
          qs = std::move(qc);
          corrected = true;
        } catch (const Error&) {
          break;
        }
      }

      const Vector mu_next = scale.cwiseProduct(qs.multipliers).cwiseMax(0.0);
      st.merit_weight = std::max(st.merit_weight, mu_next.lpNorm<Eigen::Infinity>() + 1.0);
      const double slope = phi0_slope_d - st.merit_weight * (violation - residual);
      const double phi0 = l1_merit(inst, st.p, st.merit_weight);
      auto sufficient = [&](double phi, double alpha) {
        const double bound = slope < 0.0 ? phi0 + opts.armijo * alpha * slope
                                         : phi0 + 1e-14 * std::max(1.0, std::abs(phi0));
        return phi <= bound;
      };

      double alpha = 1.0;
      bool accepted = false;
      PowerVector trial;
      if (corrected) {
        trial = box.project(st.p + d_corr);
        flops.add(cir_cost);
        accepted = sufficient(l1_merit(inst, trial, st.merit_weight), 1.0);
      }
      for (int bt = 0; !accepted && bt <= opts.max_backtracks; ++bt, alpha *= opts.backtrack) {
        trial = box.project(st.p + alpha * d);
        flops.add(cir_cost);
        if (sufficient(l1_merit(inst, trial, st.merit_weight), alpha)) {
          accepted = true;
          break;
        }
      }
      st.step_alpha = accepted ? alpha : 0.0;
      if (accepted) st.p = trial;
      st.mu = mu_next;
    } catch (const Error& e) {
      return rec.finish(false, SolverStatus::NumericalFailure, e.what());
    }
    if (rec.record(it, st.p, qp_iterations)) return rec.finish(true, SolverStatus::Converged);
    st.p = rec.last();
  }
  return rec.finish(false, SolverStatus::MaxIterations);
}

}  // namespace ocdma

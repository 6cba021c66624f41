#pragma once

// Augmented Lagrangian method: an outer loop of multiplier and penalty updates
// around a box-constrained projected quasi-Newton minimization of A_rho.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "ocdma/core.hpp"
#include "ocdma/fd.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"
#include "ocdma/solver_sqp.hpp"
#include "ocdma/trace.hpp"

namespace ocdma {

/// Classical: (rho/2) sum [max(0, v + mu/rho)^2 - (mu/rho)^2].
/// Literal:   (rho/2) sum (max(0, v) + mu/rho)^2.      v = Gamma* - Gamma
enum class PenaltyForm { Classical, Literal };

inline double penalty_term(double v, double mu, double rho, PenaltyForm form) {
  const double shift = mu / rho;
  if (form == PenaltyForm::Classical) {
    const double a = std::max(0.0, v + shift);
    return 0.5 * rho * (a * a - shift * shift);
  }
  const double a = std::max(0.0, v) + shift;
  return 0.5 * rho * a * a;
}

namespace detail {

inline void check_alm_args(const NetworkInstance& inst, const PowerVector& p, const Vector& mu, double rho) {
  require_same_length(p.size(), inst.K, "aug_lagrangian");
  require_same_length(mu.size(), inst.K, "aug_lagrangian");
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "penalty parameter must be positive");
  if ((mu.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "multipliers must be nonnegative");
}

}  // namespace detail

inline double aug_lagrangian(const NetworkInstance& inst, const PowerVector& p, const Vector& mu, double rho,
                             PenaltyForm form = PenaltyForm::Classical) {
  detail::check_alm_args(inst, p, mu, rho);
  const Vector v = inst.cir_target - cir(inst, p);
  double a = objective(p);
  for (Eigen::Index i = 0; i < inst.K; ++i) a += penalty_term(v(i), mu(i), rho, form);
  return a;
}

/// Analytic gradient of A_rho.
inline Vector aug_lagrangian_gradient(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                                      double rho, PenaltyForm form = PenaltyForm::Classical) {
  detail::check_alm_args(inst, p, mu, rho);
  const Vector v = inst.cir_target - cir(inst, p);
  Vector w(inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    w(i) = form == PenaltyForm::Classical ? std::max(0.0, mu(i) + rho * v(i))
                                          : (v(i) > 0.0 ? mu(i) + rho * v(i) : 0.0);
  }
  return Vector::Ones(inst.K) - weighted_cir_gradient(inst, p, w);
}

/// penalty_term(v + dv) - penalty_term(v), factored where both sides lie on
/// the same smooth branch.
inline double penalty_change(double v, double dv, double mu, double rho, PenaltyForm form) {
  const double shift = mu / rho;
  const double w = v + dv;
  if (form == PenaltyForm::Classical) {
    const double a = v + shift;
    const double b = w + shift;
    if (a > 0.0 && b > 0.0) return 0.5 * rho * dv * (a + b);
    if (a <= 0.0 && b <= 0.0) return 0.0;
  } else {
    if (v > 0.0 && w > 0.0) return 0.5 * rho * dv * (v + w + 2.0 * shift);
    if (v <= 0.0 && w <= 0.0) return 0.0;
  }
  return penalty_term(w, mu, rho, form) - penalty_term(v, mu, rho, form);
}

/// A_rho(q) - A_rho(p), accumulated term by term.
inline double aug_lagrangian_change(const NetworkInstance& inst, const PowerVector& p, const PowerVector& q,
                                    const Vector& mu, double rho, PenaltyForm form = PenaltyForm::Classical) {
  detail::check_alm_args(inst, p, mu, rho);
  require_same_length(q.size(), inst.K, "aug_lagrangian_change");
  const Vector v = inst.cir_target - cir(inst, p);
  const Vector dv = -cir_change(inst, p, q);
  double change = (q - p).sum();
  for (Eigen::Index i = 0; i < inst.K; ++i) change += penalty_change(v(i), dv(i), mu(i), rho, form);
  return change;
}

/// Central-difference gradient of A_rho. Both probes are measured as changes
/// from the base point, so the large common part of A never cancels.
inline Vector aug_lagrangian_fd_gradient(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                                         double rho, PenaltyForm form = PenaltyForm::Classical,
                                         const FdOptions& fd = {}) {
  detail::check_alm_args(inst, p, mu, rho);
  const CirProbe probe(inst, p);
  const Vector v = inst.cir_target - probe.base_cir();
  Vector plus, minus;
  Vector g(inst.K);
  for (Eigen::Index j = 0; j < inst.K; ++j) {
    const double h = fd.step_for(p(j));
    probe.delta(j, h, plus);
    probe.delta(j, -h, minus);
    double diff = 2.0 * h;
    for (Eigen::Index i = 0; i < inst.K; ++i) {
      diff += penalty_change(v(i), -plus(i), mu(i), rho, form) -
              penalty_change(v(i), -minus(i), mu(i), rho, form);
    }
    g(j) = diff / (2.0 * h);
  }
  return g;
}

/// ||Proj(p - grad) - p||
inline double projected_gradient_norm(const PowerBox& box, const PowerVector& p, const Vector& grad) {
  return (box.project(p - grad) - p).norm();
}

struct InnerOptions {
  int max_iters = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  FdOptions fd;
  PenaltyForm form = PenaltyForm::Classical;
};

struct InnerResult {
  PowerVector p;
  int iterations = 0;
  double criterion = 0.0;
};

namespace detail {

/// Diagonal initial inverse Hessian from the separable model
/// p_i + (rho/2) max(0, c_i - J_ii p_i)^2 with J_ii = dGamma_i/dp_i: each entry
/// sends a coordinate to that model's minimizer in one step.
inline Vector separable_inverse_diagonal(const NetworkInstance& inst, const PowerVector& p, const Vector& mu,
                                         double rho, const Vector& grad) {
  const Vector d = interference(inst, p);
  Vector h0(inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    const double jii = inst.G(i, i) / d(i);
    const double curvature = 1.0 / (rho * jii * jii);
    const double c = inst.cir_target(i) + mu(i) / rho;
    const double target = std::clamp((c - 1.0 / (rho * jii)) / jii, inst.p_min, inst.p_max);
    const double move = p(i) - target;
    if (grad(i) != 0.0 && move / grad(i) > curvature) {
      h0(i) = move / grad(i);
    } else {
      h0(i) = curvature;
    }
  }
  return h0;
}

}  // namespace detail

/// Projected BFGS on A_rho over the power box, stopping when
/// ||Proj(p - grad A) - p|| <= eps.
inline InnerResult inner_solve(const NetworkInstance& inst, const PowerVector& p_start, const Vector& mu,
                               double rho, double eps, const InnerOptions& opts = {},
                               FlopCounter* flops = nullptr) {
  detail::check_alm_args(inst, p_start, mu, rho);
  const PowerBox box = inst.box();
  if (!box.contains(p_start)) throw Error(ErrorCode::InvalidArgument, "inner_solve needs p_start in the box");
  const Eigen::Index k = inst.K;
  const std::int64_t kk = k;

  auto change = [&](const PowerVector& from, const PowerVector& to) {
    if (flops != nullptr) flops->add(cir_eval_flops(k) + 14 * kk);
    return aug_lagrangian_change(inst, from, to, mu, rho, opts.form);
  };
  auto gradient = [&](const PowerVector& x) {
    if (flops != nullptr) flops->add(cir_eval_flops(k)).charge(Kernel::FdGradient, {2 * kk, 12 * kk});
    return aug_lagrangian_fd_gradient(inst, x, mu, rho, opts.form, opts.fd);
  };
  auto reset = [&](const PowerVector& x, const Vector& grad) {
    return Matrix(detail::separable_inverse_diagonal(inst, x, mu, rho, grad).asDiagonal());
  };

  InnerResult out;
  PowerVector p = p_start;
  Vector g = gradient(p);
  Matrix hinv = reset(p, g);
  bool fresh = true;

  for (int it = 0;; ++it) {
    out.criterion = projected_gradient_norm(box, p, g);
    out.iterations = it;
    if (out.criterion <= eps) break;
    if (it == opts.max_iters)
      throw Error(ErrorCode::NumericalFailure,
                  "inner iteration cap reached (criterion " + format_g(out.criterion) + ")");

    // Coordinates held at a bound by the gradient stay fixed.
    Vector free = Vector::Ones(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      if ((p(i) <= box.p_min && g(i) > 0.0) || (p(i) >= box.p_max && g(i) < 0.0)) free(i) = 0.0;
    }
    const Vector gf = g.cwiseProduct(free);
    Vector d = -(hinv * gf).cwiseProduct(free);
    if (flops != nullptr) flops->charge(Kernel::MatVec, {kk, kk});
    if (!(g.dot(d) < 0.0)) {
      hinv = reset(p, g);
      d = -(hinv * gf).cwiseProduct(free);
      fresh = true;
    }

    double alpha = 1.0;
    PowerVector trial;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, alpha *= opts.backtrack) {
      trial = box.project(p + alpha * d);
      if (change(p, trial) <= opts.armijo * g.dot(trial - p)) {
        accepted = true;
        break;
      }
    }
    Vector g_trial;
    if (accepted && trial != p) {
      g_trial = gradient(trial);
    } else {
      // Near the optimum the decrease can fall below rounding in A itself;
      // the full step is then kept if it shrinks the projected gradient.
      trial = box.project(p + d);
      g_trial = gradient(trial);
      if (trial == p || !(projected_gradient_norm(box, trial, g_trial) < out.criterion)) {
        if (fresh)
          throw Error(ErrorCode::NumericalFailure,
                      "inner line search failed (criterion " + format_g(out.criterion) + ")");
        hinv = reset(p, g);
        fresh = true;
        continue;
      }
    }

    const Vector s = trial - p;
    const Vector y = g_trial - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      // H+ = (I - r s y')H(I - r y s') + r s s', r = 1/s'y
      const double r = 1.0 / sy;
      const Vector hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv.noalias() -= r * (hy * s.transpose() + s * hy.transpose());
      hinv.noalias() += (r * r * yhy + r) * (s * s.transpose());
      if (flops != nullptr) flops->charge(Kernel::MatVec, {kk, kk}).add(6 * kk * kk);
      fresh = false;
    }
    p = trial;
    g = g_trial;
  }
  out.p = p;
  return out;
}

/// mu_i <- clamp(mu_i + rho v_i, 0, mu_max), v = Gamma* - Gamma(p).
inline Vector update_multipliers(const Vector& mu, double rho, const Vector& violations, double mu_max) {
  require_same_length(mu.size(), violations.size(), "update_multipliers");
  if ((mu.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "multipliers must be nonnegative");
  return (mu + rho * violations).cwiseMax(0.0).cwiseMin(mu_max);
}

struct AlmOptions {
  double rho = 10.0;
  double mu_max = 1e8;
  double rho_growth = 10.0;
  double improvement_ratio = 0.5;
  double eps0 = 1e-2;
  double eps_min = 1e-9;  // below this finite-difference gradients are noise
  InnerOptions inner;
  std::optional<Vector> initial_multipliers;
  RunOptions run;

  void validate() const {
    if (!(rho > 0.0) || !(mu_max > 0.0) || !(rho_growth >= 1.0) || !(improvement_ratio > 0.0) ||
        !(improvement_ratio < 1.0) || !(eps0 > 0.0) || !(eps_min > 0.0))
      throw Error(ErrorCode::InvalidArgument, "invalid augmented Lagrangian options");
  }
};

struct AlmState {
  PowerVector p;
  Vector mu_bar;
  double rho = 10.0;
  double eps_k = 0.0;
  double max_violation = std::numeric_limits<double>::infinity();
};

/// Per outer iteration, for post-hoc checks.
struct AlmHistory {
  std::vector<double> rho;
  std::vector<double> eps;
  std::vector<double> inner_criterion;
  std::vector<Vector> mu;
};

inline SolveResult solve_alm(const NetworkInstance& inst, const PowerVector& p0, const AlmOptions& opts = {},
                             AlmHistory* history = nullptr) {
  inst.validate();
  require_same_length(p0.size(), inst.K, "solve_alm");
  opts.validate();
  opts.run.criterion.validate();

  const PowerBox box = inst.box();
  FlopCounter flops;
  RunRecorder rec("ALM", inst, opts.run, flops);

  AlmState st;
  st.p = box.project(p0);
  st.mu_bar = opts.initial_multipliers ? *opts.initial_multipliers : Vector::Zero(inst.K);
  require_same_length(st.mu_bar.size(), inst.K, "solve_alm multipliers");
  st.mu_bar = st.mu_bar.cwiseMax(0.0).cwiseMin(opts.mu_max);
  st.rho = opts.rho;
  rec.start(st.p);

  double eps = opts.eps0;
  for (int it = 1; it <= opts.run.criterion.max_iters; ++it) {
    eps = std::max(eps * 0.1, opts.eps_min);
    st.eps_k = eps;
    InnerResult inner;
    try {
      inner = inner_solve(inst, st.p, st.mu_bar, st.rho, eps, opts.inner, &flops);
    } catch (const Error& e) {
      return rec.finish(false, SolverStatus::NumericalFailure, e.what());
    }
    if (history != nullptr) {
      history->rho.push_back(st.rho);
      history->eps.push_back(eps);
      history->inner_criterion.push_back(inner.criterion);
    }
    st.p = inner.p;
    const bool done = rec.record(it, st.p, inner.iterations);
    st.p = rec.last();
    const bool disturbed = rec.trace().entries.back().disturbed;

    const Vector v = inst.cir_target - cir(inst, st.p);
    const double worst = std::max(0.0, v.maxCoeff());
    // A feasible subproblem solution that did not move repeats the previous one.
    const bool repeated = !disturbed && inner.iterations == 0 && worst <= opts.run.criterion.feas_tol;
    if (done || repeated) return rec.finish(true, SolverStatus::Converged);

    st.mu_bar = update_multipliers(st.mu_bar, st.rho, v, opts.mu_max);
    if (worst > opts.improvement_ratio * st.max_violation) st.rho *= opts.rho_growth;
    st.max_violation = worst;
    if (history != nullptr) history->mu.push_back(st.mu_bar);
  }
  return rec.finish(false, SolverStatus::MaxIterations);
}

}  // namespace ocdma

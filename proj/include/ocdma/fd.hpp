#pragma once

// Central finite differences. The step for coordinate i is
// step * max(|x_i|, floor), so tiny powers near p_min still get a usable step.

#include <algorithm>
#include <cmath>

#include "ocdma/core.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"

namespace ocdma {

struct FdOptions {
  double step = 1e-7;
  double floor = 1e-4;

  double step_for(double x) const { return step * std::max(std::abs(x), floor); }
};

template <class ScalarFn>
Vector fd_gradient(const ScalarFn& f, const Vector& x, const FdOptions& opts = {}) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = opts.step_for(x(i));
    probe(i) = x(i) + h;
    const double fp = f(probe);
    probe(i) = x(i) - h;
    const double fm = f(probe);
    probe(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Jacobian of a vector field, column j from perturbing x_j.
template <class VectorFn>
Matrix fd_jacobian(const VectorFn& f, const Vector& x, const FdOptions& opts = {}) {
  Matrix jac;
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = opts.step_for(x(j));
    probe(j) = x(j) + h;
    const Vector fp = f(probe);
    probe(j) = x(j) - h;
    const Vector fm = f(probe);
    probe(j) = x(j);
    if (j == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

/// CIR changes under single-coordinate perturbations of a base point, O(K)
/// each: moving p_j only shifts every other receiver's interference by G_ij dp.
/// Changes are formed directly, never as a difference of two CIR vectors.
class CirProbe {
 public:
  CirProbe(const NetworkInstance& inst, const PowerVector& p)
      : inst_(inst), p_(p), interference_(interference(inst, p)),
        cir_(inst.G.diagonal().cwiseProduct(p).cwiseQuotient(interference_)) {}

  /// Gamma(p + delta e_j) - Gamma(p) written into `out`.
  void delta(Eigen::Index j, double step, Vector& out) const {
    const Eigen::Index k = inst_.K;
    out.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (i == j) {
        out(i) = inst_.G(i, i) * step / interference_(i);
      } else {
        const double shift = inst_.G(i, j) * step;
        out(i) = -cir_(i) * shift / (interference_(i) + shift);
      }
    }
  }

  const PowerVector& base() const { return p_; }
  const Vector& base_cir() const { return cir_; }

 private:
  const NetworkInstance& inst_;
  PowerVector p_;
  Vector interference_;
  Vector cir_;
};

/// Central-difference CIR Jacobian using O(K) probes (O(K^2) total).
inline Matrix fd_cir_jacobian(const NetworkInstance& inst, const PowerVector& p, const FdOptions& opts = {}) {
  const CirProbe probe(inst, p);
  Matrix jac(inst.K, inst.K);
  Vector plus, minus;
  for (Eigen::Index j = 0; j < inst.K; ++j) {
    const double h = opts.step_for(p(j));
    probe.delta(j, h, plus);
    probe.delta(j, -h, minus);
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

/// Gamma(q) - Gamma(p) without subtracting the two CIR vectors.
inline Vector cir_change(const NetworkInstance& inst, const PowerVector& p, const PowerVector& q) {
  const Vector dp = q - p;
  const Vector d_p = interference(inst, p);
  Vector d_shift = inst.G * dp;
  d_shift -= inst.G.diagonal().cwiseProduct(dp);
  const Vector d_q = d_p + d_shift;
  const Vector gd = inst.G.diagonal();
  return gd.cwiseProduct(dp.cwiseProduct(d_p) - p.cwiseProduct(d_shift))
      .cwiseQuotient(d_p.cwiseProduct(d_q));
}

}  // namespace ocdma

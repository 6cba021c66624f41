#pragma once

// The minimum sum-power problem: CIR/SNIR evaluation, its matrix form and the
// closed-form equal-CIR solution used as the reference optimum.

#include <cmath>
#include <string>

#include "ocdma/core.hpp"
#include "ocdma/linalg.hpp"
#include "ocdma/netmodel.hpp"

namespace ocdma {

/// Interference-plus-noise seen by each receiver: sum_{j != i} G_ij p_j + sigma_i^2.
inline Vector interference(const NetworkInstance& inst, const PowerVector& p) {
  require_same_length(p.size(), inst.K, "interference");
  Vector d = inst.G * p;
  d -= inst.G.diagonal().cwiseProduct(p);
  d += inst.noise;
  return d;
}

inline Vector cir(const NetworkInstance& inst, const PowerVector& p) {
  const Vector d = interference(inst, p);
  return inst.G.diagonal().cwiseProduct(p).cwiseQuotient(d);
}

inline Vector snir(const NetworkInstance& inst, const PowerVector& p) {
  const Vector gamma = cir(inst, p);
  return (inst.chip_rate() * inst.min_rate.cwiseInverse()).cwiseProduct(gamma);
}

inline double objective(const PowerVector& p) { return p.sum(); }

/// Analytic Jacobian of the CIR vector with respect to p.
inline Matrix cir_jacobian(const NetworkInstance& inst, const PowerVector& p) {
  const Vector d = interference(inst, p);
  const Vector gamma = inst.G.diagonal().cwiseProduct(p).cwiseQuotient(d);
  Matrix jac(inst.K, inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    const double scale = -gamma(i) / d(i);
    jac.row(i) = scale * inst.G.row(i);
    jac(i, i) = inst.G(i, i) / d(i);
  }
  return jac;
}

struct MatrixForm {
  Matrix H;            // H_ij = G_ij / G_ii off the diagonal, zero on it
  Vector u_bar;        // Gamma_i* sigma_i^2 / G_ii
  Vector lambda_star;  // diagonal of Lambda*

  Eigen::Index size() const { return u_bar.size(); }

  /// I - Lambda* H
  Matrix system_matrix() const {
    Matrix m = -(lambda_star.asDiagonal() * H);
    m.diagonal().array() += 1.0;
    return m;
  }
};

inline MatrixForm matrix_form(const NetworkInstance& inst) {
  MatrixForm mf;
  const Vector gd = inst.G.diagonal();
  mf.H = gd.cwiseInverse().asDiagonal() * inst.G;
  mf.H.diagonal().setZero();
  mf.u_bar = inst.cir_target.cwiseProduct(inst.noise).cwiseQuotient(gd);
  mf.lambda_star = inst.cir_target;
  return mf;
}

struct TarhuniSolution {
  PowerVector p;
  double spectral_radius = 0.0;
  bool box_violation = false;
};

namespace detail {

inline double checked_spectral_radius(const MatrixForm& mf) {
  const Matrix lh = mf.lambda_star.asDiagonal() * mf.H;
  const SpectralRadiusEstimate rho = spectral_radius_nonnegative(lh, 200, 1e-10);
  if (!(rho.upper < 1.0))
    throw Error(ErrorCode::SingularOrInfeasible,
                "spectral radius of Lambda*H is " + std::to_string(rho.upper));
  return rho.upper;
}

}  // namespace detail

/// p* = (I - Lambda* H)^{-1} u_bar by LU with partial pivoting.
inline TarhuniSolution tarhuni_solve(const MatrixForm& mf, const PowerBox* box = nullptr) {
  TarhuniSolution out;
  out.spectral_radius = detail::checked_spectral_radius(mf);
  const Matrix a = mf.system_matrix();
  Eigen::PartialPivLU<Matrix> lu(a);
  out.p = lu.solve(mf.u_bar);
  const double resid = (a * out.p - mf.u_bar).norm();
  if (!out.p.allFinite() || resid > 1e-10 * mf.u_bar.norm() || (out.p.array() <= 0.0).any())
    throw Error(ErrorCode::SingularOrInfeasible, "direct solve failed");
  if (box != nullptr) out.box_violation = !box->contains(out.p);
  return out;
}

inline TarhuniSolution tarhuni_solve(const NetworkInstance& inst) {
  const PowerBox box = inst.box();
  return tarhuni_solve(matrix_form(inst), &box);
}

/// Same closed form with I - Lambda* H, u_bar and the LU factorization all
/// carried in IEEE single precision; the result is widened back to double.
inline TarhuniSolution tarhuni_solve_single(const MatrixForm& mf, const PowerBox* box = nullptr) {
  TarhuniSolution out;
  out.spectral_radius = detail::checked_spectral_radius(mf);
  const Eigen::MatrixXf lh = (mf.lambda_star.asDiagonal() * mf.H).cast<float>();
  Eigen::MatrixXf a = -lh;
  a.diagonal().array() += 1.0f;
  const Eigen::VectorXf u = mf.u_bar.cast<float>();
  Eigen::PartialPivLU<Eigen::MatrixXf> lu(a);
  const Eigen::VectorXf p = lu.solve(u);
  out.p = p.cast<double>();
  if (!out.p.allFinite() || (out.p.array() <= 0.0).any())
    throw Error(ErrorCode::SingularOrInfeasible, "single-precision direct solve failed");
  if (box != nullptr) out.box_violation = !box->contains(out.p);
  return out;
}

/// Per-user rate r_i = min_rate_i * Gamma_i / Gamma_i*.
inline Vector rate(const NetworkInstance& inst, const PowerVector& p) {
  return inst.min_rate.cwiseProduct(cir(inst, p)).cwiseQuotient(inst.cir_target);
}

inline double sum_rate(const NetworkInstance& inst, const PowerVector& p) { return rate(inst, p).sum(); }

}  // namespace ocdma

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ocdma/core.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"

namespace ocdma {

struct ConvergenceCriterion {
  double xi_tol = 1e-6;
  double feas_tol = 1e-4;
  int max_iters = 10;

  static ConvergenceCriterion under_perturbation() { return {1e-6, 1e-4, 15}; }

  void validate() const {
    if (!(xi_tol > 0.0) || !(feas_tol > 0.0) || max_iters < 1)
      throw Error(ErrorCode::InvalidArgument, "convergence tolerances must be positive");
  }
};

/// Euclidean distance between consecutive iterates.
inline double step_norm(const PowerVector& current, const PowerVector& previous) {
  require_same_length(current.size(), previous.size(), "step_norm");
  return (current - previous).norm();
}

/// Worst positive-part CIR shortfall. Empty when p leaves the power box,
/// which callers treat as not converged.
struct Feasibility {
  std::optional<double> value;

  bool in_box() const { return value.has_value(); }
  bool within(double tol) const { return value.has_value() && *value <= tol; }
  double or_infinity() const { return value.value_or(std::numeric_limits<double>::infinity()); }
};

inline double cir_shortfall(const NetworkInstance& inst, const PowerVector& p) {
  const Vector gap = inst.cir_target - cir(inst, p);
  return std::max(0.0, gap.maxCoeff());
}

inline Feasibility feasibility(const NetworkInstance& inst, const PowerVector& p) {
  require_same_length(p.size(), inst.K, "feasibility");
  if (!inst.box().contains(p)) return {};
  return {cir_shortfall(inst, p)};
}

inline bool is_converged(const ConvergenceCriterion& c, const Feasibility& f, double xi) {
  return f.within(c.feas_tol) && xi < c.xi_tol;
}

/// ||p - p*||^2 / ||p*||^2
inline double nmse(const PowerVector& p, const PowerVector& p_star) {
  require_same_length(p.size(), p_star.size(), "nmse");
  const double ref = p_star.squaredNorm();
  if (!(ref > 0.0)) throw Error(ErrorCode::ZeroNorm, "reference power vector has zero norm");
  return (p - p_star).squaredNorm() / ref;
}

/// Mean of per-iterate NMSE over a trajectory.
inline double nmse_trajectory(std::span<const PowerVector> iterates, const PowerVector& p_star) {
  if (iterates.empty()) return 0.0;
  double acc = 0.0;
  for (const PowerVector& p : iterates) acc += nmse(p, p_star);
  return acc / static_cast<double>(iterates.size());
}

inline double robustness(int successes, int trials) {
  if (trials <= 0 || successes < 0 || successes > trials)
    throw Error(ErrorCode::InvalidArgument, "robustness needs 0 <= successes <= trials, trials > 0");
  return 100.0 * static_cast<double>(successes) / static_cast<double>(trials);
}

// ---------------------------------------------------------------------------
// Analytic FLOP accounting

enum class Kernel { MatVec, DenseSolve, Cholesky, Dot, Axpy, FdGradient, Elementwise };

inline Kernel kernel_from_string(std::string_view tag) {
  if (tag == "matvec") return Kernel::MatVec;
  if (tag == "solve") return Kernel::DenseSolve;
  if (tag == "cholesky") return Kernel::Cholesky;
  if (tag == "dot") return Kernel::Dot;
  if (tag == "axpy") return Kernel::Axpy;
  if (tag == "fd_gradient") return Kernel::FdGradient;
  if (tag == "elementwise") return Kernel::Elementwise;
  throw Error(ErrorCode::UnknownKernel, std::string(tag));
}

/// Kernel dimensions: (m, n) for matvec, n for solves/dot/axpy/elementwise,
/// (evaluations, flops per evaluation) for finite-difference gradients.
struct KernelDims {
  std::int64_t a = 0;
  std::int64_t b = 0;
};

class FlopCounter {
 public:
  std::int64_t accumulated() const { return accumulated_; }

  FlopCounter& charge(Kernel kernel, KernelDims dims) {
    accumulated_ += cost(kernel, dims);
    return *this;
  }

  FlopCounter& add(std::int64_t flops) {
    accumulated_ += flops;
    return *this;
  }

  static std::int64_t cost(Kernel kernel, KernelDims d) {
    switch (kernel) {
      case Kernel::MatVec: return 2 * d.a * d.b;
      case Kernel::DenseSolve: {
        // (2/3) n^3 + 2 n^2, rounded to the nearest integer
        const std::int64_t n = d.a;
        return (2 * n * n * n + 1) / 3 + 2 * n * n;
      }
      case Kernel::Cholesky: {
        const std::int64_t n = d.a;
        return (n * n * n + 1) / 3 + 2 * n * n;
      }
      case Kernel::Dot: return 2 * d.a;
      case Kernel::Axpy: return 2 * d.a;
      case Kernel::FdGradient: return d.a * d.b;
      case Kernel::Elementwise: return d.a;
    }
    throw Error(ErrorCode::UnknownKernel, "unhandled kernel");
  }

 private:
  std::int64_t accumulated_ = 0;
};

inline FlopCounter& flops_charge(FlopCounter& counter, std::string_view kernel, KernelDims dims) {
  return counter.charge(kernel_from_string(kernel), dims);
}

/// Cost of one CIR evaluation: interference matvec plus K divisions/products.
inline std::int64_t cir_eval_flops(Eigen::Index k) {
  return FlopCounter::cost(Kernel::MatVec, {k, k}) + 3 * static_cast<std::int64_t>(k);
}

}  // namespace ocdma

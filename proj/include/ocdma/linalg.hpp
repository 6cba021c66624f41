#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "ocdma/core.hpp"

namespace ocdma {

struct SpectralRadiusEstimate {
  double value = 0.0;
  double lower = 0.0;  // Collatz-Wielandt bounds
  double upper = 0.0;
  int iterations = 0;
};

/// Perron root of a nonnegative square matrix by power iteration on M + I.
///
/// The unit shift makes any irreducible nonnegative matrix primitive, so the
/// iteration cannot oscillate on bipartite interference patterns. The loop stops
/// once the Collatz-Wielandt bracket min/max (Mx)_i / x_i is narrower than `tol`.
inline SpectralRadiusEstimate spectral_radius_nonnegative(const Matrix& m, int max_iters = 200,
                                                          double tol = 1e-10) {
  const Eigen::Index n = m.rows();
  SpectralRadiusEstimate est;
  if (n == 0) return est;
  Vector x = Vector::Ones(n);
  for (int it = 1; it <= max_iters; ++it) {
    Vector y = m * x + x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i) > 0.0) {
        const double r = y(i) / x(i);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    est.lower = std::max(0.0, lo - 1.0);
    est.upper = std::max(0.0, hi - 1.0);
    est.value = 0.5 * (est.lower + est.upper);
    est.iterations = it;
    const double norm = y.lpNorm<Eigen::Infinity>();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    x = y / norm;
    if (est.upper - est.lower <= tol * std::max(1.0, est.upper)) break;
  }
  return est;
}

/// 53-bit uniform draw in [lo, hi) from a 64-bit engine; the bit pattern is
/// fixed by the engine alone, so draws are identical across standard libraries.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace ocdma

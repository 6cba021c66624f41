#pragma once

#include <stdexcept>
#include <cstdio>
#include <string>

#include <Eigen/Dense>

namespace ocdma {

/// %g-style text for diagnostics.
inline std::string format_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}


using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Transmit powers in watts, one entry per user.
using PowerVector = Eigen::VectorXd;

enum class ErrorCode {
  EmptyInstance,
  InvalidArgument,
  LengthMismatch,
  SingularOrInfeasible,
  RankDeficient,
  NoConvergence,
  NumericalFailure,
  UnknownKernel,
  ZeroNorm,
  Io,
  Config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInstance: return "EmptyInstance";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingularOrInfeasible: return "SingularOrInfeasible";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::UnknownKernel: return "UnknownKernel";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_same_length(Eigen::Index a, Eigen::Index b, const char* where) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch,
                std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Componentwise power bounds [p_min, p_max], shared by every user.
struct PowerBox {
  double p_min = 0.0;
  double p_max = 0.0;

  bool contains(const PowerVector& p) const {
    return (p.array() >= p_min).all() && (p.array() <= p_max).all();
  }

  PowerVector project(const PowerVector& p) const { return p.cwiseMax(p_min).cwiseMin(p_max); }
};

}  // namespace ocdma

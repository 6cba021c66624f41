#pragma once

// OCDMA network instances: passive-star gains, receiver noise, per-user QoS
// targets and the laser power budget, generated reproducibly from a seed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ocdma/core.hpp"
#include "ocdma/linalg.hpp"

namespace ocdma {

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// CIR target from an SNIR target: Gamma* = gamma* * r_min / r_c with r_c = 1 / Tc.
inline double snir_to_cir_target(double gamma_star, double r_min, double chip_period) {
  return gamma_star * r_min * chip_period;
}

struct SystemParams {
  double chip_period_Tc = 9e-12;        // s
  double sequence_length_F = 121.0;
  double link_length_min_km = 4.0;      // end-to-end path range
  double link_length_max_km = 100.0;
  double fiber_attenuation_db_per_km = 0.2;
  double p_max_dBm = 20.0;
  double p_min_dBm = 20.0 - 90.0;
  double noise_sigma = 0.032;
  // Normalized code cross-correlation scaling every cross gain. Unset means 1/F.
  std::optional<double> cross_correlation;
  // Recorded only.
  int modulation_order_M = 2;
  double transponder_inefficiency_W_per_Gbps = 2.7;
  double planck_h = 6.63e-34;

  double effective_cross_correlation() const {
    return cross_correlation.value_or(1.0 / sequence_length_F);
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (!(chip_period_Tc > 0.0)) fail("chip period must be positive");
    if (!(sequence_length_F >= 1.0)) fail("sequence length must be >= 1");
    if (!(link_length_min_km > 0.0) || !(link_length_min_km < link_length_max_km))
      fail("link length range must satisfy 0 < low < high");
    if (!(fiber_attenuation_db_per_km >= 0.0)) fail("fiber attenuation must be >= 0");
    if (!(p_min_dBm < p_max_dBm)) fail("p_min_dBm must be below p_max_dBm");
    if (!(noise_sigma > 0.0)) fail("noise sigma must be positive");
    const double xc = effective_cross_correlation();
    if (!(xc > 0.0 && xc <= 1.0)) fail("cross correlation must lie in (0, 1]");
  }
};

enum class QosLabel { I, II, III, Custom };

inline const char* to_string(QosLabel label) {
  switch (label) {
    case QosLabel::I: return "I";
    case QosLabel::II: return "II";
    case QosLabel::III: return "III";
    case QosLabel::Custom: return "Custom";
  }
  return "Custom";
}

struct QosClass {
  QosLabel label = QosLabel::Custom;
  double snir_target_dB = 20.0;
  double min_rate = 30e6;  // bits/s

  static QosClass class_I() { return {QosLabel::I, 17.0, 25e6}; }
  static QosClass class_II() { return {QosLabel::II, 20.0, 30e6}; }
  static QosClass class_III() { return {QosLabel::III, 22.0, 35e6}; }

  static QosClass from_label(const std::string& s) {
    if (s == "I") return class_I();
    if (s == "II") return class_II();
    if (s == "III") return class_III();
    throw Error(ErrorCode::InvalidArgument, "unknown QoS class '" + s + "'");
  }

  void validate() const {
    if (!std::isfinite(snir_target_dB)) throw Error(ErrorCode::InvalidArgument, "SNIR target not finite");
    if (!(min_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "minimum rate must be positive");
  }
};

struct NetworkInstance {
  Eigen::Index K = 0;
  Matrix G;               // G(i, j): gain from transmitter j to receiver i
  Vector noise;           // sigma_i^2, W
  Vector cir_target;      // Gamma_i*
  Vector snir_target;     // gamma_i*, linear
  Vector min_rate;        // bits/s
  Vector leg_km;          // star-coupler leg length of each node
  double p_min = 0.0;
  double p_max = 0.0;
  double chip_period = 9e-12;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> rejected_seeds;

  PowerBox box() const { return {p_min, p_max}; }
  double chip_rate() const { return 1.0 / chip_period; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (K == 0) throw Error(ErrorCode::EmptyInstance, "instance has no users");
    if (G.rows() != K || G.cols() != K) fail("gain matrix must be K x K");
    require_same_length(noise.size(), K, "noise");
    require_same_length(cir_target.size(), K, "cir_target");
    require_same_length(snir_target.size(), K, "snir_target");
    require_same_length(min_rate.size(), K, "min_rate");
    for (Eigen::Index i = 0; i < K; ++i) {
      if (!(G(i, i) > 0.0)) fail("diagonal gains must be positive");
      if (!(noise(i) > 0.0)) fail("noise powers must be positive");
      if (!(cir_target(i) > 0.0)) fail("CIR targets must be positive");
    }
    if ((G.array() < 0.0).any()) fail("gains must be nonnegative");
    if (!(p_min > 0.0 && p_min < p_max)) fail("power box must satisfy 0 < p_min < p_max");
  }
};

/// Spectral radius of Lambda* H, the existence test for a positive
/// equal-CIR power vector.
inline double interference_spectral_radius(const NetworkInstance& inst) {
  Matrix m(inst.K, inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i)
    for (Eigen::Index j = 0; j < inst.K; ++j)
      m(i, j) = (i == j) ? 0.0 : inst.cir_target(i) * inst.G(i, j) / inst.G(i, i);
  return spectral_radius_nonnegative(m).upper;
}

namespace detail {

inline void fill_user(NetworkInstance& inst, Eigen::Index i, const SystemParams& params,
                      const QosClass& qos) {
  qos.validate();
  const double gamma = db_to_linear(qos.snir_target_dB);
  inst.noise(i) = params.noise_sigma * params.noise_sigma;
  inst.snir_target(i) = gamma;
  inst.min_rate(i) = qos.min_rate;
  inst.cir_target(i) = snir_to_cir_target(gamma, qos.min_rate, params.chip_period_Tc);
}

inline void fill_gains(NetworkInstance& inst, const SystemParams& params) {
  const double a = params.fiber_attenuation_db_per_km;
  const double xc = params.effective_cross_correlation();
  inst.G.resize(inst.K, inst.K);
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    for (Eigen::Index j = 0; j < inst.K; ++j) {
      const double loss = std::pow(10.0, -a * (inst.leg_km(i) + inst.leg_km(j)) / 10.0);
      inst.G(i, j) = (i == j) ? loss : xc * loss;
    }
  }
}

inline NetworkInstance draw_instance(const SystemParams& params, const std::vector<QosClass>& qos,
                                     std::uint64_t seed) {
  NetworkInstance inst;
  inst.K = static_cast<Eigen::Index>(qos.size());
  inst.seed = seed;
  inst.chip_period = params.chip_period_Tc;
  inst.p_min = dbm_to_watt(params.p_min_dBm);
  inst.p_max = dbm_to_watt(params.p_max_dBm);
  inst.noise.resize(inst.K);
  inst.snir_target.resize(inst.K);
  inst.min_rate.resize(inst.K);
  inst.cir_target.resize(inst.K);
  inst.leg_km.resize(inst.K);

  std::mt19937_64 rng(seed);
  const double leg_lo = params.link_length_min_km / 2.0;
  const double leg_hi = params.link_length_max_km / 2.0;
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    inst.leg_km(i) = uniform(rng, leg_lo, leg_hi);
    fill_user(inst, i, params, qos[static_cast<std::size_t>(i)]);
  }
  fill_gains(inst, params);
  return inst;
}

}  // namespace detail

inline constexpr int kMaxInstanceAttempts = 100;

/// Draws a star-topology instance. A draw whose equal-CIR system has no
/// positive solution is rejected and the seed incremented (at most 100 attempts);
/// rejected seeds are kept on the returned instance.
inline NetworkInstance generate_instance(const SystemParams& params, const std::vector<QosClass>& qos,
                                         std::uint64_t seed) {
  if (qos.empty()) throw Error(ErrorCode::EmptyInstance, "at least one user is required");
  params.validate();
  std::vector<std::uint64_t> rejected;
  for (int attempt = 0; attempt < kMaxInstanceAttempts; ++attempt) {
    NetworkInstance inst = detail::draw_instance(params, qos, seed + static_cast<std::uint64_t>(attempt));
    if (interference_spectral_radius(inst) < 1.0) {
      inst.rejected_seeds = std::move(rejected);
      return inst;
    }
    rejected.push_back(inst.seed);
  }
  throw Error(ErrorCode::SingularOrInfeasible,
              "no feasible instance after " + std::to_string(kMaxInstanceAttempts) + " draws");
}

inline NetworkInstance generate_instance(const SystemParams& params, const QosClass& qos,
                                         Eigen::Index users, std::uint64_t seed) {
  return generate_instance(params, std::vector<QosClass>(static_cast<std::size_t>(users), qos), seed);
}

/// Grows an instance to `new_users` total. Existing legs (and so existing
/// pairwise gains) are kept; added nodes draw fresh legs from a stream keyed on
/// (seed, new size).
inline NetworkInstance extend_instance(const NetworkInstance& base, const SystemParams& params,
                                       const QosClass& qos, Eigen::Index new_users) {
  if (new_users < base.K) throw Error(ErrorCode::InvalidArgument, "cannot shrink an instance");
  params.validate();
  NetworkInstance inst = base;
  inst.K = new_users;
  inst.noise.conservativeResize(new_users);
  inst.snir_target.conservativeResize(new_users);
  inst.min_rate.conservativeResize(new_users);
  inst.cir_target.conservativeResize(new_users);
  inst.leg_km.conservativeResize(new_users);
  std::mt19937_64 rng(base.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(new_users)));
  for (Eigen::Index i = base.K; i < new_users; ++i) {
    inst.leg_km(i) = uniform(rng, params.link_length_min_km / 2.0, params.link_length_max_km / 2.0);
    detail::fill_user(inst, i, params, qos);
  }
  detail::fill_gains(inst, params);
  if (interference_spectral_radius(inst) >= 1.0)
    throw Error(ErrorCode::SingularOrInfeasible, "extended instance admits no positive solution");
  return inst;
}

}  // namespace ocdma

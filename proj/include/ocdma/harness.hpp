#pragma once

// Batch orchestration: scenario sweeps, dynamic load growth, perturbation
// injection, the closed-form precision comparison, configuration files and
// the trace/summary writers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocdma/core.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"
#include "ocdma/solver_alm.hpp"
#include "ocdma/solver_hopfield.hpp"
#include "ocdma/solver_sqp.hpp"
#include "ocdma/trace.hpp"

namespace ocdma {

using json = nlohmann::json;

enum class Scenario { A, B, Custom };
enum class SolverKind { Hopfield, Sqp, Alm };
enum class SolverChoice { Hopfield, Sqp, Alm, All };
// Dbm draws each start power uniformly in dBm between the box limits;
// Linear draws uniformly in watts.
enum class StartDistribution { Dbm, Linear };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::Custom: return "Custom";
  }
  return "Custom";
}

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::Hopfield: return "hopfield";
    case SolverKind::Sqp: return "sqp";
    case SolverKind::Alm: return "alm";
  }
  return "hopfield";
}

inline const char* to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Hopfield: return "hopfield";
    case SolverChoice::Sqp: return "sqp";
    case SolverChoice::Alm: return "alm";
    case SolverChoice::All: return "all";
  }
  return "all";
}

inline const char* to_string(StartDistribution s) { return s == StartDistribution::Dbm ? "dbm" : "linear"; }

namespace detail {

[[noreturn]] inline void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

}  // namespace detail

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "A") return Scenario::A;
  if (s == "B") return Scenario::B;
  if (s == "Custom" || s == "custom") return Scenario::Custom;
  detail::config_error("unknown scenario '" + s + "'");
}

inline SolverChoice solver_choice_from_string(const std::string& s) {
  if (s == "hopfield" || s == "mhnn") return SolverChoice::Hopfield;
  if (s == "sqp") return SolverChoice::Sqp;
  if (s == "alm") return SolverChoice::Alm;
  if (s == "all") return SolverChoice::All;
  detail::config_error("unknown solver '" + s + "'");
}

inline StartDistribution start_from_string(const std::string& s) {
  if (s == "dbm") return StartDistribution::Dbm;
  if (s == "linear") return StartDistribution::Linear;
  detail::config_error("unknown start distribution '" + s + "'");
}

inline PenaltyForm penalty_form_from_string(const std::string& s) {
  if (s == "classical") return PenaltyForm::Classical;
  if (s == "literal") return PenaltyForm::Literal;
  detail::config_error("unknown penalty form '" + s + "'");
}

struct DynamicEvent {
  enum class Kind { LoadIncrease, Perturbation };

  Kind kind = Kind::Perturbation;
  int at_iteration = 0;
  double load_factor = 4.0;
  double perturb_alpha = 0.65;
  std::pair<int, int> perturb_window{2, 7};
  std::pair<int, int> alm_perturb_window{3, 8};
  std::vector<int> perturb_targets;     // empty: every user
  int alm_inner_max_iters = 2000;       // the penalty climbs while disturbed
  bool warm_start = false;              // load increase: reuse the previous powers

  void validate() const {
    if (at_iteration < 0) detail::config_error("event iteration must be >= 0");
    if (!(load_factor > 0.0)) detail::config_error("load factor must be positive");
    if (!(perturb_alpha > 0.0 && perturb_alpha < 1.0)) detail::config_error("perturbation alpha must lie in (0, 1)");
    for (const auto& w : {perturb_window, alm_perturb_window})
      if (w.first < 0 || w.second < w.first) detail::config_error("perturbation window must satisfy 0 <= begin <= end");
    for (int t : perturb_targets)
      if (t < 0) detail::config_error("perturbation targets must be user indices");
    if (alm_inner_max_iters < 1) detail::config_error("alm_inner_max_iters must be >= 1");
  }
};

/// Knobs forwarded to the solvers.
struct SolverSettings {
  double dt = 0.1;
  double elastic_penalty = 1e6;
  double rho = 10.0;
  PenaltyForm penalty_form = PenaltyForm::Classical;
  int alm_inner_max_iters = 500;
};

struct ScenarioConfig {
  Scenario scenario = Scenario::A;
  std::vector<int> users{8, 16, 32};
  QosClass qos = QosClass::class_II();
  int trials = 1;
  std::uint64_t base_seed = 1;
  SolverChoice solver = SolverChoice::All;
  std::vector<DynamicEvent> events;
  std::string output_dir = "out";
  SystemParams system;
  StartDistribution start = StartDistribution::Dbm;
  std::optional<int> max_iters;
  bool record_time = false;
  SolverSettings settings;

  static ScenarioConfig scenario_a() { return {}; }

  static ScenarioConfig scenario_b(const QosClass& qos = QosClass::class_III()) {
    ScenarioConfig c;
    c.scenario = Scenario::B;
    c.users = {48, 64, 128};
    c.qos = qos;
    return c;
  }

  std::vector<SolverKind> solvers() const {
    switch (solver) {
      case SolverChoice::Hopfield: return {SolverKind::Hopfield};
      case SolverChoice::Sqp: return {SolverKind::Sqp};
      case SolverChoice::Alm: return {SolverKind::Alm};
      case SolverChoice::All: break;
    }
    return {SolverKind::Hopfield, SolverKind::Sqp, SolverKind::Alm};
  }

  const DynamicEvent* find_event(DynamicEvent::Kind kind) const {
    for (const DynamicEvent& e : events)
      if (e.kind == kind) return &e;
    return nullptr;
  }

  void validate() const {
    if (users.empty()) detail::config_error("users must not be empty");
    for (int k : users)
      if (k < 1) detail::config_error("user counts must be positive");
    if (trials < 1) detail::config_error("trials must be >= 1");
    if (max_iters && *max_iters < 1) detail::config_error("max_iters must be >= 1");
    if (!(settings.dt > 0.0) || !(settings.rho > 0.0) || settings.elastic_penalty < 0.0 ||
        settings.alm_inner_max_iters < 1)
      detail::config_error("invalid solver settings");
    try {
      system.validate();
      qos.validate();
    } catch (const Error& e) {
      detail::config_error(e.what());
    }
    for (const DynamicEvent& e : events) e.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const DynamicEvent& e) {
  json j;
  j["kind"] = e.kind == DynamicEvent::Kind::LoadIncrease ? "load_increase" : "perturbation";
  j["at_iteration"] = e.at_iteration;
  j["load_factor"] = e.load_factor;
  j["perturb_alpha"] = e.perturb_alpha;
  j["perturb_window"] = {e.perturb_window.first, e.perturb_window.second};
  j["alm_perturb_window"] = {e.alm_perturb_window.first, e.alm_perturb_window.second};
  j["perturb_targets"] = e.perturb_targets;
  j["alm_inner_max_iters"] = e.alm_inner_max_iters;
  j["warm_start"] = e.warm_start;
  return j;
}

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) config_error(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

inline std::pair<int, int> read_window(const json& j, const char* key, std::pair<int, int> fallback) {
  if (!j.contains(key)) return fallback;
  const json& w = j.at(key);
  if (!w.is_array() || w.size() != 2) config_error(std::string(key) + " must be [begin, end]");
  return {w[0].get<int>(), w[1].get<int>()};
}

}  // namespace detail

inline DynamicEvent event_from_json(const json& j) {
  if (!j.is_object()) detail::config_error("event must be an object");
  detail::reject_unknown(j, {"kind", "at_iteration", "load_factor", "perturb_alpha", "perturb_window",
                             "alm_perturb_window", "perturb_targets", "alm_inner_max_iters", "warm_start"},
                         "event");
  DynamicEvent e;
  std::string kind = "perturbation";
  detail::read_opt(j, "kind", kind);
  if (kind == "load_increase") e.kind = DynamicEvent::Kind::LoadIncrease;
  else if (kind == "perturbation") e.kind = DynamicEvent::Kind::Perturbation;
  else detail::config_error("unknown event kind '" + kind + "'");
  detail::read_opt(j, "at_iteration", e.at_iteration);
  detail::read_opt(j, "load_factor", e.load_factor);
  detail::read_opt(j, "perturb_alpha", e.perturb_alpha);
  e.perturb_window = detail::read_window(j, "perturb_window", e.perturb_window);
  e.alm_perturb_window = detail::read_window(j, "alm_perturb_window", e.alm_perturb_window);
  detail::read_opt(j, "perturb_targets", e.perturb_targets);
  detail::read_opt(j, "alm_inner_max_iters", e.alm_inner_max_iters);
  detail::read_opt(j, "warm_start", e.warm_start);
  return e;
}

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["scenario"] = to_string(c.scenario);
  j["users"] = c.users;
  j["qos_class"] = {{"label", to_string(c.qos.label)},
                    {"snir_target_dB", c.qos.snir_target_dB},
                    {"min_rate", c.qos.min_rate}};
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["solver"] = to_string(c.solver);
  j["events"] = json::array();
  for (const DynamicEvent& e : c.events) j["events"].push_back(to_json(e));
  j["output_dir"] = c.output_dir;
  j["start"] = to_string(c.start);
  if (c.max_iters) j["max_iters"] = *c.max_iters;
  j["record_time"] = c.record_time;
  const SystemParams& s = c.system;
  j["system"] = {{"chip_period_Tc", s.chip_period_Tc},
                 {"sequence_length_F", s.sequence_length_F},
                 {"link_length_min_km", s.link_length_min_km},
                 {"link_length_max_km", s.link_length_max_km},
                 {"fiber_attenuation_db_per_km", s.fiber_attenuation_db_per_km},
                 {"p_max_dBm", s.p_max_dBm},
                 {"p_min_dBm", s.p_min_dBm},
                 {"noise_sigma", s.noise_sigma}};
  if (s.cross_correlation) j["system"]["cross_correlation"] = *s.cross_correlation;
  j["solver_settings"] = {{"dt", c.settings.dt},
                          {"elastic_penalty", c.settings.elastic_penalty},
                          {"rho", c.settings.rho},
                          {"penalty_form", c.settings.penalty_form == PenaltyForm::Classical ? "classical" : "literal"},
                          {"alm_inner_max_iters", c.settings.alm_inner_max_iters}};
  return j;
}

inline ScenarioConfig config_from_json(const json& j) {
  if (!j.is_object()) detail::config_error("config must be a JSON object");
  detail::reject_unknown(j, {"scenario", "users", "qos_class", "trials", "base_seed", "solver", "events",
                             "output_dir", "start", "max_iters", "record_time", "system", "solver_settings"},
                         "config");
  std::string scenario = "A";
  detail::read_opt(j, "scenario", scenario);
  ScenarioConfig c = scenario_from_string(scenario) == Scenario::B ? ScenarioConfig::scenario_b()
                                                                   : ScenarioConfig::scenario_a();
  c.scenario = scenario_from_string(scenario);
  detail::read_opt(j, "users", c.users);
  if (j.contains("qos_class")) {
    const json& q = j.at("qos_class");
    if (q.is_string()) {
      c.qos = QosClass::from_label(q.get<std::string>());
    } else if (q.is_object()) {
      detail::reject_unknown(q, {"label", "snir_target_dB", "min_rate"}, "qos_class");
      std::string label = "Custom";
      detail::read_opt(q, "label", label);
      c.qos = label == "Custom" ? QosClass{} : QosClass::from_label(label);
      detail::read_opt(q, "snir_target_dB", c.qos.snir_target_dB);
      detail::read_opt(q, "min_rate", c.qos.min_rate);
    } else {
      detail::config_error("qos_class must be a label or an object");
    }
  }
  detail::read_opt(j, "trials", c.trials);
  detail::read_opt(j, "base_seed", c.base_seed);
  if (j.contains("solver")) c.solver = solver_choice_from_string(j.at("solver").get<std::string>());
  if (j.contains("events")) {
    if (!j.at("events").is_array()) detail::config_error("events must be an array");
    for (const json& e : j.at("events")) c.events.push_back(event_from_json(e));
  }
  detail::read_opt(j, "output_dir", c.output_dir);
  if (j.contains("start")) c.start = start_from_string(j.at("start").get<std::string>());
  if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
  detail::read_opt(j, "record_time", c.record_time);
  if (j.contains("system")) {
    const json& s = j.at("system");
    detail::reject_unknown(s, {"chip_period_Tc", "sequence_length_F", "link_length_min_km", "link_length_max_km",
                               "fiber_attenuation_db_per_km", "p_max_dBm", "p_min_dBm", "noise_sigma",
                               "cross_correlation"},
                           "system");
    SystemParams& p = c.system;
    detail::read_opt(s, "chip_period_Tc", p.chip_period_Tc);
    detail::read_opt(s, "sequence_length_F", p.sequence_length_F);
    detail::read_opt(s, "link_length_min_km", p.link_length_min_km);
    detail::read_opt(s, "link_length_max_km", p.link_length_max_km);
    detail::read_opt(s, "fiber_attenuation_db_per_km", p.fiber_attenuation_db_per_km);
    detail::read_opt(s, "p_max_dBm", p.p_max_dBm);
    detail::read_opt(s, "p_min_dBm", p.p_min_dBm);
    detail::read_opt(s, "noise_sigma", p.noise_sigma);
    if (s.contains("cross_correlation")) p.cross_correlation = s.at("cross_correlation").get<double>();
  }
  if (j.contains("solver_settings")) {
    const json& s = j.at("solver_settings");
    detail::reject_unknown(s, {"dt", "elastic_penalty", "rho", "penalty_form", "alm_inner_max_iters"},
                           "solver_settings");
    detail::read_opt(s, "alm_inner_max_iters", c.settings.alm_inner_max_iters);
    detail::read_opt(s, "dt", c.settings.dt);
    detail::read_opt(s, "elastic_penalty", c.settings.elastic_penalty);
    detail::read_opt(s, "rho", c.settings.rho);
    if (s.contains("penalty_form"))
      c.settings.penalty_form = penalty_form_from_string(s.at("penalty_form").get<std::string>());
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    detail::config_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const NetworkInstance& inst) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json g = json::array();
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    const Vector row = inst.G.row(i).transpose();
    g.push_back(vec(row));
  }
  return {{"K", inst.K},           {"G", g},
          {"noise", vec(inst.noise)}, {"cir_target", vec(inst.cir_target)},
          {"snir_target", vec(inst.snir_target)}, {"min_rate", vec(inst.min_rate)},
          {"leg_km", vec(inst.leg_km)}, {"p_min", inst.p_min},
          {"p_max", inst.p_max},       {"chip_period", inst.chip_period},
          {"seed", inst.seed},         {"rejected_seeds", inst.rejected_seeds}};
}

inline NetworkInstance instance_from_json(const json& j) {
  auto vec = [](const json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  NetworkInstance inst;
  try {
    inst.K = j.at("K").get<Eigen::Index>();
    inst.G.resize(inst.K, inst.K);
    const json& g = j.at("G");
    if (!g.is_array() || static_cast<Eigen::Index>(g.size()) != inst.K)
      detail::config_error("instance G must have K rows");
    for (Eigen::Index i = 0; i < inst.K; ++i) {
      const Vector row = vec(g[static_cast<std::size_t>(i)]);
      require_same_length(row.size(), inst.K, "instance G row");
      inst.G.row(i) = row.transpose();
    }
    inst.noise = vec(j.at("noise"));
    inst.cir_target = vec(j.at("cir_target"));
    inst.snir_target = vec(j.at("snir_target"));
    inst.min_rate = vec(j.at("min_rate"));
    inst.leg_km = j.contains("leg_km") ? vec(j.at("leg_km")) : Vector::Zero(inst.K);
    inst.p_min = j.at("p_min").get<double>();
    inst.p_max = j.at("p_max").get<double>();
    inst.chip_period = j.value("chip_period", 9e-12);
    inst.seed = j.value("seed", std::uint64_t{0});
    inst.rejected_seeds = j.value("rejected_seeds", std::vector<std::uint64_t>{});
  } catch (const json::exception& e) {
    detail::config_error(std::string("malformed instance: ") + e.what());
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Starts and disturbances

inline PowerVector random_start(const NetworkInstance& inst, std::uint64_t seed, StartDistribution dist) {
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 0x9E3779B97F4A7C15ULL);
  PowerVector p(inst.K);
  const double lo_dbm = 10.0 * std::log10(inst.p_min) + 30.0;
  const double hi_dbm = 10.0 * std::log10(inst.p_max) + 30.0;
  for (Eigen::Index i = 0; i < inst.K; ++i) {
    p(i) = dist == StartDistribution::Dbm ? dbm_to_watt(uniform(rng, lo_dbm, hi_dbm))
                                          : uniform(rng, inst.p_min, inst.p_max);
  }
  return inst.box().project(p);
}

/// |alpha^n sin(1.5 pi n)|. For integer n the sine is 0 or +-1 exactly.
inline double perturbation_offset(int n, double alpha) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "perturbation index must be >= 0");
  const int quarter = (3 * n) % 4;  // 1.5 pi n = quarter * pi/2 (mod 2 pi)
  if (quarter % 2 == 0) return 0.0;
  return std::pow(alpha, n);
}

inline PowerVector perturb_power(const PowerVector& p_nominal, int n, double alpha) {
  return (p_nominal.array() + perturbation_offset(n, alpha)).matrix();
}

/// Disturbs the iterate on every iteration of `window` (clamped to the box)
/// and flags those iterations so the stopping test is skipped.
inline IterationHook perturbation_hook(const DynamicEvent& e, std::pair<int, int> window, const PowerBox& box) {
  return [e, window, box](int n, PowerVector& p) {
    if (n < window.first || n > window.second) return false;
    const PowerVector bumped = perturb_power(p, n, e.perturb_alpha);
    if (e.perturb_targets.empty()) {
      p = box.project(bumped);
    } else {
      for (int t : e.perturb_targets)
        if (t < p.size()) p(t) = std::clamp(bumped(t), box.p_min, box.p_max);
    }
    return true;
  };
}

// ---------------------------------------------------------------------------
// Running

inline SolveResult run_solver(SolverKind kind, const NetworkInstance& inst, const PowerVector& p0,
                              const RunOptions& run, const SolverSettings& settings = {}) {
  switch (kind) {
    case SolverKind::Hopfield: {
      HopfieldOptions o;
      o.dt = settings.dt;
      o.run = run;
      return solve_hopfield(inst, p0, o);
    }
    case SolverKind::Sqp: {
      SqpOptions o;
      o.qp.elastic_penalty = settings.elastic_penalty;
      o.run = run;
      return solve_sqp(inst, p0, o);
    }
    case SolverKind::Alm: {
      AlmOptions o;
      o.rho = settings.rho;
      o.inner.form = settings.penalty_form;
      o.inner.max_iters = settings.alm_inner_max_iters;
      o.run = run;
      return solve_alm(inst, p0, o);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown solver");
}

struct RunRecord {
  std::string scenario;
  Eigen::Index users = 0;
  std::string qos;
  SolverKind solver = SolverKind::Hopfield;
  std::uint64_t seed = 0;
  SolveResult result;
  std::optional<PowerVector> oracle;

  std::string stem() const {
    return scenario + "_" + std::to_string(users) + "_" + qos + "_" + to_string(solver) + "_" + std::to_string(seed);
  }
};

namespace detail {

inline std::optional<PowerVector> oracle_for(const NetworkInstance& inst) {
  try {
    const TarhuniSolution s = tarhuni_solve(inst);
    if (inst.box().contains(s.p)) return s.p;
  } catch (const Error&) {
  }
  return std::nullopt;
}

inline RunRecord failed_record(const std::string& scenario, int users, const ScenarioConfig& c, SolverKind kind,
                               std::uint64_t seed, const std::string& msg) {
  RunRecord r{scenario, users, to_string(c.qos.label), kind, seed, {}, std::nullopt};
  r.result.report.solver = to_string(kind);
  r.result.report.status = SolverStatus::NumericalFailure;
  r.result.report.message = msg;
  return r;
}

inline RunOptions run_options(const ScenarioConfig& c, const std::optional<PowerVector>& oracle, int default_iters) {
  RunOptions run;
  run.criterion.max_iters = c.max_iters.value_or(default_iters);
  run.reference = oracle;
  return run;
}

}  // namespace detail

/// Every (K, trial, solver) combination; instance seed = base_seed + trial.
/// Failures are recorded, never thrown.
inline std::vector<RunRecord> run_scenario(const ScenarioConfig& c) {
  c.validate();
  std::vector<RunRecord> out;
  for (int k : c.users) {
    for (int t = 0; t < c.trials; ++t) {
      const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
      NetworkInstance inst;
      try {
        inst = generate_instance(c.system, c.qos, k, seed);
      } catch (const Error& e) {
        for (SolverKind s : c.solvers()) out.push_back(detail::failed_record(to_string(c.scenario), k, c, s, seed, e.what()));
        continue;
      }
      const std::optional<PowerVector> oracle = detail::oracle_for(inst);
      const PowerVector p0 = random_start(inst, seed, c.start);
      for (SolverKind s : c.solvers()) {
        RunRecord r{to_string(c.scenario), k, to_string(c.qos.label), s, seed, {}, oracle};
        r.result = run_solver(s, inst, p0, detail::run_options(c, oracle, 10), c.settings);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

struct DynamicRecord {
  RunRecord before;
  RunRecord after;
};

/// Solves at K1 = users[0], grows the network by load_factor keeping the
/// original users' gains, and solves again. Without warm_start every solver
/// restarts from a fresh random point.
inline std::vector<DynamicRecord> run_dynamic_load(const ScenarioConfig& c) {
  c.validate();
  DynamicEvent ev;
  ev.kind = DynamicEvent::Kind::LoadIncrease;
  if (const DynamicEvent* e = c.find_event(DynamicEvent::Kind::LoadIncrease)) ev = *e;
  const int k1 = c.users.front();
  const auto k2 = static_cast<Eigen::Index>(std::llround(k1 * ev.load_factor));
  if (k2 < k1) detail::config_error("load factor must not shrink the network");

  std::vector<DynamicRecord> out;
  for (int t = 0; t < c.trials; ++t) {
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    NetworkInstance base, grown;
    try {
      base = generate_instance(c.system, c.qos, k1, seed);
      grown = extend_instance(base, c.system, c.qos, k2);
    } catch (const Error& e) {
      for (SolverKind s : c.solvers())
        out.push_back({detail::failed_record("dynamic", k1, c, s, seed, e.what()),
                       detail::failed_record("dynamic", static_cast<int>(k2), c, s, seed, e.what())});
      continue;
    }
    const std::optional<PowerVector> oracle1 = detail::oracle_for(base);
    const std::optional<PowerVector> oracle2 = detail::oracle_for(grown);
    const PowerVector p0 = random_start(base, seed, c.start);
    const PowerVector fresh = random_start(grown, seed + 0x5bd1e995ULL, c.start);
    for (SolverKind s : c.solvers()) {
      DynamicRecord d;
      d.before = {"dynamic", k1, to_string(c.qos.label), s, seed, {}, oracle1};
      d.before.result = run_solver(s, base, p0, detail::run_options(c, oracle1, 10), c.settings);
      PowerVector start = fresh;
      if (ev.warm_start && d.before.result.p.size() == k1) start.head(k1) = d.before.result.p;
      d.after = {"dynamic", k2, to_string(c.qos.label), s, seed, {}, oracle2};
      d.after.result = run_solver(s, grown, start, detail::run_options(c, oracle2, 10), c.settings);
      out.push_back(std::move(d));
    }
  }
  return out;
}

/// Runs with the disturbance injected; 15 iterations allowed by default.
inline std::vector<RunRecord> run_perturbation(const ScenarioConfig& c) {
  c.validate();
  DynamicEvent ev;
  if (const DynamicEvent* e = c.find_event(DynamicEvent::Kind::Perturbation)) ev = *e;
  std::vector<RunRecord> out;
  for (int k : c.users) {
    for (int t = 0; t < c.trials; ++t) {
      const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
      NetworkInstance inst;
      try {
        inst = generate_instance(c.system, c.qos, k, seed);
      } catch (const Error& e) {
        for (SolverKind s : c.solvers()) out.push_back(detail::failed_record("perturb", k, c, s, seed, e.what()));
        continue;
      }
      const std::optional<PowerVector> oracle = detail::oracle_for(inst);
      const PowerVector p0 = random_start(inst, seed, c.start);
      SolverSettings settings = c.settings;
      settings.alm_inner_max_iters = std::max(settings.alm_inner_max_iters, ev.alm_inner_max_iters);
      for (SolverKind s : c.solvers()) {
        RunOptions run = detail::run_options(c, oracle, ConvergenceCriterion::under_perturbation().max_iters);
        run.hook = perturbation_hook(ev, s == SolverKind::Alm ? ev.alm_perturb_window : ev.perturb_window, inst.box());
        RunRecord r{"perturb", k, to_string(c.qos.label), s, seed, {}, oracle};
        r.result = run_solver(s, inst, p0, run, settings);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

struct TarhuniRow {
  Eigen::Index users = 0;
  std::uint64_t seed = 0;
  double spectral_radius = 0.0;
  Feasibility direct_double;
  Feasibility direct_single;
  std::vector<std::pair<SolverKind, Feasibility>> solvers;
  std::string message;
};

/// Closed-form solution in native and emulated single precision against the
/// iterative solvers, one row per (K, trial).
inline std::vector<TarhuniRow> compare_tarhuni(const ScenarioConfig& c) {
  c.validate();
  std::vector<TarhuniRow> out;
  for (int k : c.users) {
    for (int t = 0; t < c.trials; ++t) {
      TarhuniRow row;
      row.users = k;
      row.seed = c.base_seed + static_cast<std::uint64_t>(t);
      const NetworkInstance inst = generate_instance(c.system, c.qos, k, row.seed);
      const MatrixForm mf = matrix_form(inst);
      const PowerBox box = inst.box();
      const TarhuniSolution dbl = tarhuni_solve(mf);
      row.spectral_radius = dbl.spectral_radius;
      row.direct_double = feasibility(inst, dbl.p);
      try {
        row.direct_single = feasibility(inst, tarhuni_solve_single(mf, &box).p);
      } catch (const Error& e) {
        row.message = e.what();
      }
      const PowerVector p0 = random_start(inst, row.seed, c.start);
      for (SolverKind s : c.solvers()) {
        const SolveResult r = run_solver(s, inst, p0, detail::run_options(c, std::nullopt, 10), c.settings);
        row.solvers.emplace_back(s, r.report.status == SolverStatus::NumericalFailure ? Feasibility{}
                                                                                      : feasibility(inst, r.p));
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace detail

/// Trace as CSV: iteration, per-user powers, sum-power, sum-rate, feasibility, ...
inline std::string trace_csv(const SolverTrace& trace, bool with_time = false) {
  std::ostringstream os;
  Eigen::Index k = trace.entries.empty() ? 0 : trace.entries.front().p.size();
  os << "iteration";
  for (Eigen::Index i = 0; i < k; ++i) os << ",p_" << (i + 1);
  os << ",sum_power,sum_rate,feasibility,xi,flops,inner_iterations,disturbed";
  if (with_time) os << ",elapsed_s";
  os << '\n';
  for (const TraceEntry& e : trace.entries) {
    os << e.iteration;
    for (Eigen::Index i = 0; i < k; ++i) os << ',' << detail::fmt_double(e.p(i));
    os << ',' << detail::fmt_double(e.sum_power) << ',' << detail::fmt_double(e.sum_rate) << ','
       << (e.feasibility ? detail::fmt_double(*e.feasibility) : std::string("box_infeasible")) << ','
       << detail::fmt_double(e.xi) << ',' << e.flops << ',' << e.inner_iterations << ',' << (e.disturbed ? 1 : 0);
    if (with_time) os << ',' << detail::fmt_double(e.elapsed_s);
    os << '\n';
  }
  return os.str();
}

inline json summary_json(const RunRecord& r, bool with_time = false) {
  const SolverReport& rep = r.result.report;
  json j = {{"scenario", r.scenario},
            {"users", r.users},
            {"qos_class", r.qos},
            {"solver", to_string(r.solver)},
            {"seed", r.seed},
            {"status", to_string(rep.status)},
            {"iterations", rep.iterations},
            {"sum_power", detail::nullable(rep.sum_power)},
            {"feasibility", rep.feasibility ? json(*rep.feasibility) : json("box_infeasible")},
            {"flops", rep.flops},
            {"nmse_terminal", detail::nullable(rep.nmse_terminal)},
            {"nmse_trajectory", detail::nullable(rep.nmse_trajectory)},
            {"sum_rate", detail::nullable(rep.sum_rate)},
            {"message", rep.message}};
  if (with_time) j["time_s"] = rep.time_s;
  return j;
}

/// Writes <stem>.csv per run and one <scenario>_summary.jsonl per batch
/// (one record per line). Returns the written paths.
inline std::vector<std::filesystem::path> emit_outputs(const std::vector<RunRecord>& records,
                                                       const std::filesystem::path& dir,
                                                       bool with_time = false) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  std::map<std::string, std::string> summaries;
  std::vector<std::string> order;
  for (const RunRecord& r : records) {
    const std::filesystem::path trace_path = dir / (r.stem() + ".csv");
    std::ofstream t(trace_path, std::ios::binary);
    if (!t) throw Error(ErrorCode::Io, "cannot write " + trace_path.string());
    t << trace_csv(r.result.trace, with_time);
    if (!t) throw Error(ErrorCode::Io, "write failed for " + trace_path.string());
    written.push_back(trace_path);
    if (!summaries.count(r.scenario)) order.push_back(r.scenario);
    summaries[r.scenario] += summary_json(r, with_time).dump() + "\n";
  }
  for (const std::string& s : order) {
    const std::filesystem::path path = dir / (s + "_summary.jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << summaries[s];
    written.push_back(path);
  }
  return written;
}

/// Robustness per (users, solver), in percent.
inline std::map<std::pair<Eigen::Index, std::string>, double> robustness_table(const std::vector<RunRecord>& records) {
  std::map<std::pair<Eigen::Index, std::string>, std::pair<int, int>> counts;
  for (const RunRecord& r : records) {
    auto& c = counts[{r.users, to_string(r.solver)}];
    c.first += r.result.report.converged() ? 1 : 0;
    c.second += 1;
  }
  std::map<std::pair<Eigen::Index, std::string>, double> out;
  for (const auto& [key, c] : counts) out[key] = robustness(c.first, c.second);
  return out;
}

}  // namespace ocdma

#pragma once

// Per-iteration trace, terminal report and the bookkeeping shared by the
// three solvers (stopping test, disturbance hook, timing, NMSE).

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ocdma/core.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"

namespace ocdma {

enum class SolverStatus { Converged, MaxIterations, NumericalFailure, BoxInfeasible };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "Converged";
    case SolverStatus::MaxIterations: return "MaxIterations";
    case SolverStatus::NumericalFailure: return "NumericalFailure";
    case SolverStatus::BoxInfeasible: return "BoxInfeasible";
  }
  return "Unknown";
}

struct TraceEntry {
  int iteration = 0;
  PowerVector p;
  double sum_power = 0.0;
  double sum_rate = 0.0;
  std::optional<double> feasibility;  // empty: outside the power box
  double xi = std::numeric_limits<double>::infinity();
  std::int64_t flops = 0;
  double elapsed_s = 0.0;
  int inner_iterations = 0;
  bool disturbed = false;
};

struct SolverTrace {
  std::vector<TraceEntry> entries;

  std::vector<PowerVector> iterates(bool include_start = false) const {
    std::vector<PowerVector> out;
    for (const TraceEntry& e : entries)
      if (include_start || e.iteration > 0) out.push_back(e.p);
    return out;
  }
};

struct SolverReport {
  std::string solver;
  SolverStatus status = SolverStatus::MaxIterations;
  int iterations = 0;
  double time_s = 0.0;
  double sum_power = 0.0;
  std::optional<double> feasibility;
  std::int64_t flops = 0;
  double nmse_terminal = std::numeric_limits<double>::quiet_NaN();
  double nmse_trajectory = std::numeric_limits<double>::quiet_NaN();
  double sum_rate = 0.0;
  std::string message;

  bool converged() const { return status == SolverStatus::Converged; }
};

struct SolveResult {
  PowerVector p;
  SolverTrace trace;
  SolverReport report;
};

/// Called once per external iteration with the fresh iterate. Returning true
/// means the iterate was disturbed; the stopping test is skipped for it.
using IterationHook = std::function<bool(int iteration, PowerVector& p)>;

struct RunOptions {
  ConvergenceCriterion criterion;
  IterationHook hook;
  std::optional<PowerVector> reference;  // oracle optimum for NMSE
};

class RunRecorder {
 public:
  RunRecorder(std::string solver, const NetworkInstance& inst, const RunOptions& opts,
              const FlopCounter& flops)
      : solver_(std::move(solver)), inst_(inst), opts_(opts), flops_(flops),
        start_(std::chrono::steady_clock::now()) {}

  void start(const PowerVector& p0) {
    TraceEntry e = make_entry(0, p0, 0);
    trace_.entries.push_back(std::move(e));
  }

  /// Runs the hook on `p`, appends a trace row and reports whether the dual
  /// stopping criterion holds at iteration k.
  bool record(int k, PowerVector& p, int inner_iterations = 0) {
    bool disturbed = false;
    if (opts_.hook) disturbed = opts_.hook(k, p);
    TraceEntry e = make_entry(k, p, inner_iterations);
    e.disturbed = disturbed;
    e.xi = step_norm(p, trace_.entries.back().p);
    const bool done = !disturbed && is_converged(opts_.criterion, Feasibility{e.feasibility}, e.xi);
    trace_.entries.push_back(std::move(e));
    return done;
  }

  const SolverTrace& trace() const { return trace_; }
  const PowerVector& last() const { return trace_.entries.back().p; }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  SolveResult finish(bool converged, SolverStatus failure_status, std::string message = {}) {
    SolveResult out;
    const TraceEntry& last_entry = trace_.entries.back();
    out.p = last_entry.p;
    SolverReport& r = out.report;
    r.solver = solver_;
    r.iterations = last_entry.iteration;
    r.time_s = elapsed();
    r.sum_power = last_entry.sum_power;
    r.feasibility = last_entry.feasibility;
    r.flops = flops_.accumulated();
    r.sum_rate = last_entry.sum_rate;
    r.message = std::move(message);
    if (converged) {
      r.status = SolverStatus::Converged;
    } else if (failure_status == SolverStatus::MaxIterations && !last_entry.feasibility) {
      r.status = SolverStatus::BoxInfeasible;
    } else {
      r.status = failure_status;
    }
    if (opts_.reference) {
      r.nmse_terminal = nmse(out.p, *opts_.reference);
      const std::vector<PowerVector> its = trace_.iterates();
      r.nmse_trajectory = nmse_trajectory(its, *opts_.reference);
    }
    out.trace = std::move(trace_);
    return out;
  }

 private:
  TraceEntry make_entry(int k, const PowerVector& p, int inner) const {
    TraceEntry e;
    e.iteration = k;
    e.p = p;
    e.sum_power = objective(p);
    e.sum_rate = sum_rate(inst_, p);
    e.feasibility = feasibility(inst_, p).value;
    e.flops = flops_.accumulated();
    e.elapsed_s = elapsed();
    e.inner_iterations = inner;
    return e;
  }

  std::string solver_;
  const NetworkInstance& inst_;
  const RunOptions& opts_;
  const FlopCounter& flops_;
  std::chrono::steady_clock::time_point start_;
  SolverTrace trace_;
};

}  // namespace ocdma

// Command-line front end for the batch harness.
//
// Exit codes: 0 every run converged, 1 some run failed, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ocdma/harness.hpp"

namespace {

using namespace ocdma;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solver;
  std::optional<std::string> out;
  std::optional<int> trials;
  std::optional<int> max_iters;
  std::optional<std::string> scenario;
  std::optional<std::string> qos;
  std::vector<int> users;
  std::optional<std::string> start;
  bool record_time = false;
};

ScenarioConfig make_config(const Overrides& o, Scenario fallback) {
  ScenarioConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else if (fallback == Scenario::B) {
    c = ScenarioConfig::scenario_b();
  }
  if (o.scenario) {
    const Scenario s = scenario_from_string(*o.scenario);
    if (o.config.empty() && s == Scenario::B) c = ScenarioConfig::scenario_b(c.qos);
    c.scenario = s;
  }
  if (o.qos) c.qos = QosClass::from_label(*o.qos);
  if (!o.users.empty()) c.users = o.users;
  if (o.seed) c.base_seed = *o.seed;
  if (o.solver) c.solver = solver_choice_from_string(*o.solver);
  if (o.out) c.output_dir = *o.out;
  if (o.trials) c.trials = *o.trials;
  if (o.max_iters) c.max_iters = *o.max_iters;
  if (o.start) c.start = start_from_string(*o.start);
  c.record_time = c.record_time || o.record_time;
  c.validate();
  return c;
}

bool all_converged(const std::vector<RunRecord>& records) {
  for (const RunRecord& r : records)
    if (!r.result.report.converged()) return false;
  return true;
}

void print_runs(const std::vector<RunRecord>& records) {
  std::printf("%-10s %6s %-4s %-9s %8s  %-16s %5s  %-12s %-12s %s\n", "scenario", "users", "qos", "solver", "seed",
              "status", "iters", "feasibility", "nmse", "sum_power");
  for (const RunRecord& r : records) {
    const SolverReport& rep = r.result.report;
    std::printf("%-10s %6ld %-4s %-9s %8llu  %-16s %5d  %-12.4g %-12.4g %.6g\n", r.scenario.c_str(),
                static_cast<long>(r.users), r.qos.c_str(), to_string(r.solver),
                static_cast<unsigned long long>(r.seed), to_string(rep.status), rep.iterations,
                rep.feasibility.value_or(-1.0), rep.nmse_terminal, rep.sum_power);
  }
}

void print_robustness(const std::vector<RunRecord>& records) {
  std::printf("\nrobustness [%%]\n");
  for (const auto& [key, value] : robustness_table(records))
    std::printf("  K=%-5ld %-9s %6.1f\n", static_cast<long>(key.first), key.second.c_str(), value);
}

int finish(const std::vector<RunRecord>& records, const ScenarioConfig& c) {
  const auto files = emit_outputs(records, c.output_dir, c.record_time);
  print_runs(records);
  if (records.size() > 1) print_robustness(records);
  std::printf("\n%zu files written to %s\n", files.size(), c.output_dir.c_str());
  return all_converged(records) ? 0 : 1;
}

int cmd_scenario(const Overrides& o) {
  const ScenarioConfig c = make_config(o, Scenario::A);
  return finish(run_scenario(c), c);
}

int cmd_dynamic(const Overrides& o) {
  Overrides d = o;
  ScenarioConfig c = make_config(d, Scenario::B);
  if (o.config.empty()) {
    if (o.users.empty()) c.users = {32};
    if (!o.qos) c.qos = QosClass::class_III();
  }
  std::vector<RunRecord> records;
  for (DynamicRecord& r : run_dynamic_load(c)) {
    std::printf("%-9s seed %llu: K=%ld %s in %d, then K=%ld %s in %d\n", to_string(r.after.solver),
                static_cast<unsigned long long>(r.after.seed), static_cast<long>(r.before.users),
                to_string(r.before.result.report.status), r.before.result.report.iterations,
                static_cast<long>(r.after.users), to_string(r.after.result.report.status),
                r.after.result.report.iterations);
    records.push_back(std::move(r.before));
    records.push_back(std::move(r.after));
  }
  std::printf("\n");
  return finish(records, c);
}

int cmd_perturb(const Overrides& o) {
  ScenarioConfig c = make_config(o, Scenario::B);
  if (o.config.empty()) {
    if (o.users.empty()) c.users = {128};
    if (!o.qos) c.qos = QosClass::class_III();
  }
  return finish(run_perturbation(c), c);
}

int cmd_tarhuni(const Overrides& o) {
  ScenarioConfig c = make_config(o, Scenario::B);
  const std::vector<TarhuniRow> rows = compare_tarhuni(c);
  std::filesystem::create_directories(c.output_dir);
  const std::filesystem::path path = std::filesystem::path(c.output_dir) / "tarhuni_summary.jsonl";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::printf("%6s %8s %12s %14s %14s", "users", "seed", "rho(L*H)", "F direct f64", "F direct f32");
  for (SolverKind s : c.solvers()) std::printf(" %14s", (std::string("F ") + to_string(s)).c_str());
  std::printf("\n");
  bool ok = true;
  auto f_text = [](const Feasibility& f) { return f.value ? *f.value : -1.0; };
  for (const TarhuniRow& r : rows) {
    std::printf("%6ld %8llu %12.6g %14.6g %14.6g", static_cast<long>(r.users), static_cast<unsigned long long>(r.seed),
                r.spectral_radius, f_text(r.direct_double), f_text(r.direct_single));
    json j = {{"users", r.users},
              {"seed", r.seed},
              {"spectral_radius", r.spectral_radius},
              {"direct_double", r.direct_double.value ? json(*r.direct_double.value) : json("box_infeasible")},
              {"direct_single", r.direct_single.value ? json(*r.direct_single.value) : json("box_infeasible")},
              {"message", r.message}};
    for (const auto& [kind, f] : r.solvers) {
      std::printf(" %14.6g", f_text(f));
      j["solvers"][to_string(kind)] = f.value ? json(*f.value) : json("box_infeasible");
      ok = ok && f.within(1e-4);
    }
    std::printf("\n");
    out << j.dump() << '\n';
  }
  std::printf("\nwritten %s\n", path.string().c_str());
  return ok ? 0 : 1;
}

int cmd_replay(const Overrides& o, const std::string& instance_path, const std::string& save_instance) {
  ScenarioConfig c = make_config(o, Scenario::Custom);
  if (o.config.empty() && !o.scenario) c.scenario = Scenario::Custom;
  NetworkInstance inst;
  if (!instance_path.empty()) {
    std::ifstream in(instance_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open instance " + instance_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Config, "instance " + instance_path + " is not valid JSON: " + e.what());
    }
    inst = instance_from_json(j);
  } else {
    inst = generate_instance(c.system, c.qos, c.users.front(), c.base_seed);
  }
  if (!save_instance.empty()) {
    std::ofstream out(save_instance, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + save_instance);
    out << to_json(inst).dump(2) << '\n';
  }
  const std::uint64_t seed = instance_path.empty() ? c.base_seed : inst.seed;
  std::optional<PowerVector> oracle;
  try {
    oracle = tarhuni_solve(inst).p;
  } catch (const Error&) {
  }
  const PowerVector p0 = random_start(inst, seed, c.start);
  std::vector<RunRecord> records;
  for (SolverKind s : c.solvers()) {
    RunOptions run;
    run.criterion.max_iters = c.max_iters.value_or(10);
    run.reference = oracle;
    RunRecord r{to_string(c.scenario), inst.K, to_string(c.qos.label), s, seed, {}, oracle};
    r.result = run_solver(s, inst, p0, run, c.settings);
    records.push_back(std::move(r));
  }
  return finish(records, c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-power allocation for OCDMA networks: Hopfield, SQP and augmented Lagrangian solvers"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::string seed_text, instance_path, save_instance;
  app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "base seed (trial t uses seed + t)");
  app.add_option("--solver", o.solver, "hopfield | sqp | alm | all");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--trials", o.trials, "Monte-Carlo trials per user count");
  app.add_option("--max-iters", o.max_iters, "external iteration cap");
  app.add_option("--scenario", o.scenario, "A | B | Custom");
  app.add_option("--qos", o.qos, "QoS class I | II | III");
  app.add_option("--users", o.users, "user counts, e.g. --users 8 16 32");
  app.add_option("--start", o.start, "start distribution: dbm | linear");
  app.add_flag("--record-time", o.record_time, "include wall time in traces and summaries");

  auto* scenario = app.add_subcommand("scenario", "Monte-Carlo sweep over user counts and solvers");
  auto* dynamic = app.add_subcommand("dynamic", "grow the network (default 32 -> 128) and re-solve");
  auto* perturb = app.add_subcommand("perturb", "inject the decaying power disturbance and record recovery");
  auto* tarhuni = app.add_subcommand("tarhuni", "closed-form solution in double and emulated single precision");
  auto* replay = app.add_subcommand("replay", "solve one instance, generated or loaded from JSON");
  replay->add_option("--instance", instance_path, "instance JSON to load")->check(CLI::ExistingFile);
  replay->add_option("--save-instance", save_instance, "write the instance as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*scenario) return cmd_scenario(o);
    if (*dynamic) return cmd_dynamic(o);
    if (*perturb) return cmd_perturb(o);
    if (*tarhuni) return cmd_tarhuni(o);
    if (*replay) return cmd_replay(o, instance_path, save_instance);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config || e.code() == ErrorCode::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

// Command-line harness: instance generation, solving, scheme comparison,
// oracle validation, and Monte Carlo sweeps.
//
// Exit codes: 0 success, 1 usage or input error, 2 non-convergence or a
// failed validation.
#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "ehmec/baselines.hpp"
#include "ehmec/dual_solver.hpp"
#include "ehmec/experiments.hpp"
#include "ehmec/io.hpp"
#include "ehmec/model.hpp"
#include "ehmec/oracle.hpp"

namespace {

using namespace ehmec;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

struct SolverFlags {
  double epsilon = 1e-6;
  long max_iterations = 100000;
  std::string step_rule = "diminishing";
  double step_scale = 1.0;
  std::string step_scaling = "auto";
  double gap_exit = 1e-4;
  int threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--eps", epsilon, "Relative dual-change stopping threshold");
    cmd->add_option("--max-iters", max_iterations, "Maximum subgradient iterations");
    cmd->add_option("--step", step_rule, "Step rule: diminishing, constant, polyak")
        ->check(CLI::IsMember({"diminishing", "constant", "polyak"}));
    cmd->add_option("--step-scale", step_scale, "Base step size eta0");
    cmd->add_option("--step-scaling", step_scaling,
                    "Per-user step scaling: auto, energy_squared, none")
        ->check(CLI::IsMember({"auto", "energy_squared", "none"}));
    cmd->add_option("--gap-exit", gap_exit, "Early-exit duality gap");
    cmd->add_option("--threads", threads, "Worker threads (0 = all)");
  }

  dual::SolveOptions to_options() const {
    dual::SolveOptions options;
    options.epsilon = epsilon;
    options.max_iterations = max_iterations;
    options.step_scale = step_scale;
    options.gap_exit = gap_exit;
    options.threads = threads;
    if (step_rule == "constant") options.step_rule = dual::StepRule::kConstant;
    if (step_rule == "polyak") options.step_rule = dual::StepRule::kPolyak;
    if (step_scaling == "none") options.step_scaling = dual::StepScaling::kNone;
    if (step_scaling == "energy_squared") {
      options.step_scaling = dual::StepScaling::kInverseEnergySquared;
    }
    return options;
  }
};

struct GenFlags {
  experiments::GenParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", params.seed, "Random seed");
    cmd->add_option("--e0-max", params.e0_max_j, "Per-slot harvest upper bound (J)");
    cmd->add_option("--e-init", params.e_init_j, "Initial stored energy (J)");
    cmd->add_option("--gamma0-db", params.gamma0_db, "Reference pathloss at 1 m (dB)");
    cmd->add_option("--pathloss-exp", params.pathloss_exponent, "Pathloss exponent");
    cmd->add_option("--distance", params.distance_m, "User-AP distance (m)");
    cmd->add_option("--bandwidth", params.bandwidth_hz, "Bandwidth (Hz)");
    cmd->add_option("--noise", params.noise_power_w, "AP receiver noise power (W)");
    cmd->add_option("--capacitance", params.capacitance, "CPU capacitance coefficient");
    cmd->add_option("--cycles-per-bit", params.cycles_per_bit, "CPU cycles per task bit");
    cmd->add_option("--weight", params.weight, "Per-user objective weight");
    cmd->add_option("--horizon", params.horizon_seconds, "Horizon T (s)");
  }
};

int run_gen(const GenFlags& flags, int users, int slots, double tau, const std::string& out) {
  const double slot_seconds = tau > 0.0 ? tau : flags.params.horizon_seconds / slots;
  const Instance instance = experiments::generate_instance(flags.params, users, slots, slot_seconds);
  io::save_instance(instance, out);
  std::printf("wrote %s (K=%d, N=%d, tau=%s s)\n", out.c_str(), users, slots,
              io::format_double(slot_seconds).c_str());
  return kOk;
}

int run_solve(const SolverFlags& solver, const std::string& instance_path,
              const std::string& out_path, const std::string& scheme_name, bool with_trace,
              bool with_mu) {
  const auto scheme = baselines::parse_scheme(scheme_name);
  if (!scheme) {
    std::fprintf(stderr, "unknown scheme: %s\n", scheme_name.c_str());
    return kInputError;
  }
  const Instance instance = io::load_instance(instance_path);

  nlohmann::json j;
  bool converged = true;
  if (*scheme == baselines::SchemeId::kEqualEnergy) {
    const Allocation allocation = baselines::equal_energy(instance);
    const FeasibilityReport feasibility = causality_slack(instance, allocation);
    j["scheme"] = scheme_name;
    j["primal_value"] = weighted_rate(allocation, instance.config.weight);
    j["converged"] = true;
    j["feasibility"] = {{"feasible", feasibility.feasible},
                        {"worst_violation_j", feasibility.worst_violation}};
  } else {
    dual::SolveOptions options = solver.to_options();
    if (*scheme == baselines::SchemeId::kLocalOnly) {
      options.restriction = ModeRestriction::kLocalOnly;
    } else if (*scheme == baselines::SchemeId::kFullOffload) {
      options.restriction = ModeRestriction::kOffloadOnly;
    }
    const dual::SolveReport report = dual::solve(instance, options);
    j = io::solve_report_to_json(report, with_trace, with_mu);
    j["scheme"] = scheme_name;
    converged = report.converged;
    std::printf("%s: primal %s, dual %s, gap %s, %ld iterations, %s\n", scheme_name.c_str(),
                io::format_double(report.primal_value).c_str(),
                io::format_double(report.dual_value).c_str(),
                io::format_double(report.relative_gap).c_str(), report.iterations,
                report.converged ? "converged" : "NOT converged");
  }
  io::atomic_write(out_path, j.dump(2) + "\n");
  std::printf("report written to %s\n", out_path.c_str());
  return converged ? kOk : kNotConverged;
}

int run_compare(const SolverFlags& solver, const std::string& instance_path,
                const std::string& out_path) {
  const Instance instance = io::load_instance(instance_path);
  nlohmann::json out;
  bool all_converged = true;
  std::printf("%-14s %-16s %-10s\n", "scheme", "objective", "gap");
  for (const auto scheme : {baselines::SchemeId::kProposed, baselines::SchemeId::kEqualEnergy,
                            baselines::SchemeId::kLocalOnly, baselines::SchemeId::kFullOffload}) {
    const baselines::SchemeResult result =
        baselines::run_scheme(instance, scheme, solver.to_options());
    all_converged = all_converged && result.converged;
    const std::string name(baselines::scheme_name(scheme));
    std::printf("%-14s %-16s %-10s\n", name.c_str(), io::format_double(result.objective).c_str(),
                result.has_dual ? io::format_double(result.relative_gap).c_str() : "-");
    out[name] = {{"objective", result.objective}, {"converged", result.converged}};
    if (result.has_dual) {
      out[name]["dual_value"] = result.dual_value;
      out[name]["relative_gap"] = result.relative_gap;
    }
  }
  if (!out_path.empty()) {
    io::atomic_write(out_path, out.dump(2) + "\n");
    std::printf("comparison written to %s\n", out_path.c_str());
  }
  return all_converged ? kOk : kNotConverged;
}

int run_validate(const SolverFlags& solver, const std::string& instance_path, double tol) {
  const Instance instance = io::load_instance(instance_path);
  const dual::SolveReport report = dual::solve(instance, solver.to_options());

  double oracle_objective = 0.0;
  const int pairs = instance.config.num_users * instance.config.num_slots;
  if (pairs <= 4) {
    std::printf("oracle: grid search\n");
    oracle_objective = oracle::grid_search(instance).objective;
  } else {
    std::printf("oracle: projected gradient (instance too large for the grid)\n");
    oracle_objective = oracle::projected_gradient(instance).objective;
  }

  const double scale = std::max({std::abs(oracle_objective), std::abs(report.primal_value), 1e-300});
  const double agreement = std::abs(report.primal_value - oracle_objective) / scale;
  const double kkt = oracle::kkt_residual(instance, report.allocation, report.final_dual.mu);

  std::printf("solver primal   %s\n", io::format_double(report.primal_value).c_str());
  std::printf("solver dual     %s\n", io::format_double(report.dual_value).c_str());
  std::printf("oracle value    %s\n", io::format_double(oracle_objective).c_str());
  std::printf("agreement       %s (tol %s)\n", io::format_double(agreement).c_str(),
              io::format_double(tol).c_str());
  std::printf("duality gap     %s (tol 0.001)\n", io::format_double(report.relative_gap).c_str());
  std::printf("kkt residual    %s (tol 0.001)\n", io::format_double(kkt).c_str());
  std::printf("converged       %s\n", report.converged ? "yes" : "no");

  const bool ok = report.converged && agreement <= tol && report.relative_gap <= 1e-3 &&
                  kkt <= 1e-3 && report.feasibility.feasible;
  std::printf("validate: %s\n", ok ? "PASS" : "FAIL");
  return ok ? kOk : kNotConverged;
}

int run_sweep_cmd(const std::string& config_path, const std::string& out_dir,
                  std::uint64_t seed_override, bool has_seed_override, int threads) {
  io::SweepConfig config = io::load_sweep_config(config_path);
  if (has_seed_override) config.gen.seed = seed_override;
  if (threads != 0) config.sweep.threads = threads;
  const experiments::SweepResult result = experiments::run_sweep(config.sweep, config.gen);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
  const std::string json_path = (fs::path(out_dir) / "sweep.json").string();
  io::atomic_write(csv_path, io::sweep_result_to_csv(result));
  io::atomic_write(json_path, io::sweep_result_to_json(result).dump(2) + "\n");

  std::printf("%-12s %-14s %-16s %-16s\n", "value", "scheme", "mean", "stddev");
  for (const auto& cell : result.cells) {
    std::printf("%-12s %-14s %-16s %-16s\n", io::format_double(cell.value).c_str(),
                std::string(baselines::scheme_name(cell.scheme)).c_str(),
                io::format_double(cell.mean).c_str(), io::format_double(cell.stddev).c_str());
  }
  std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline weighted computation-rate maximization for energy-harvesting MEC"};
  app.require_subcommand(1);
  int rc = kOk;

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random instance file");
  GenFlags gen_flags;
  int gen_users = 1, gen_slots = 10;
  double gen_tau = 0.0;
  std::string gen_out = "instance.json";
  gen_cmd->add_option("--users,-K", gen_users, "Number of users")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--slots,-N", gen_slots, "Number of slots")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--tau", gen_tau, "Slot duration (s); default horizon/slots");
  gen_cmd->add_option("--out,-o", gen_out, "Output path")->required();
  gen_flags.attach(gen_cmd);
  gen_cmd->callback([&] { rc = run_gen(gen_flags, gen_users, gen_slots, gen_tau, gen_out); });

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance and write a report");
  SolverFlags solve_flags;
  std::string solve_instance, solve_out = "report.json", solve_scheme = "proposed";
  bool solve_trace = false, solve_mu = false;
  solve_cmd->add_option("--instance,-i", solve_instance, "Instance file")->required();
  solve_cmd->add_option("--out,-o", solve_out, "Report output path");
  solve_cmd->add_option("--scheme", solve_scheme,
                        "proposed, equal_energy, local_only, full_offload");
  solve_cmd->add_flag("--trace", solve_trace, "Include the dual trace in the report");
  solve_cmd->add_flag("--mu", solve_mu, "Include the final multipliers in the report");
  solve_flags.attach(solve_cmd);
  solve_cmd->callback(
      [&] { rc = run_solve(solve_flags, solve_instance, solve_out, solve_scheme, solve_trace,
                           solve_mu); });

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Run all schemes on one instance");
  SolverFlags compare_flags;
  std::string compare_instance, compare_out;
  compare_cmd->add_option("--instance,-i", compare_instance, "Instance file")->required();
  compare_cmd->add_option("--out,-o", compare_out, "Optional JSON output path");
  compare_flags.attach(compare_cmd);
  compare_cmd->callback([&] { rc = run_compare(compare_flags, compare_instance, compare_out); });

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Cross-check the solver against an oracle");
  SolverFlags validate_flags;
  std::string validate_instance;
  double validate_tol = 5e-3;
  validate_cmd->add_option("--instance,-i", validate_instance, "Instance file")->required();
  validate_cmd->add_option("--tol", validate_tol, "Relative agreement tolerance");
  validate_flags.attach(validate_cmd);
  validate_cmd->callback([&] { rc = run_validate(validate_flags, validate_instance, validate_tol); });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a Monte Carlo sweep from a config file");
  std::string sweep_config, sweep_out_dir = "sweep_out";
  std::uint64_t sweep_seed = 0;
  int sweep_threads = 0;
  sweep_cmd->add_option("--config,-c", sweep_config, "Sweep config JSON")->required();
  sweep_cmd->add_option("--out-dir,-o", sweep_out_dir, "Output directory");
  auto* seed_opt = sweep_cmd->add_option("--seed", sweep_seed, "Override the config seed");
  sweep_cmd->add_option("--threads", sweep_threads, "Worker threads (0 = config/default)");
  sweep_cmd->callback([&] {
    rc = run_sweep_cmd(sweep_config, sweep_out_dir, sweep_seed, seed_opt->count() > 0,
                       sweep_threads);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  } catch (const io::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return rc;
}

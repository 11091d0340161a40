// Benchmark: serial (threads = 1) versus OpenMP-parallel runs of the three
// data-parallel kernels — per-user dual solves, grid-oracle evaluation, and
// Monte Carlo sweep trials. Results must match bitwise; only the wall time
// may differ.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "ehmec/dual_solver.hpp"
#include "ehmec/experiments.hpp"
#include "ehmec/oracle.hpp"
#include "ehmec/parallel.hpp"

using namespace ehmec;
using clock_type = std::chrono::steady_clock;

namespace {

double time_of(const std::function<void()>& work) {
  const auto start = clock_type::now();
  work();
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-24s %10.3f s %10.3f s %8.2fx   %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", resolve_threads(0));
  std::printf("%-24s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

  // Multiuser dual solve: users are independent subproblems.
  {
    experiments::GenParams gen;
    gen.seed = 7;
    const Instance instance = experiments::generate_instance(gen, 256, 30, 0.02);
    dual::SolveOptions serial_options;
    serial_options.threads = 1;
    dual::SolveOptions parallel_options;
    parallel_options.threads = 0;
    dual::SolveReport serial_report, parallel_report;
    const double t_serial = time_of([&] { serial_report = dual::solve(instance, serial_options); });
    const double t_parallel =
        time_of([&] { parallel_report = dual::solve(instance, parallel_options); });
    row("dual solve (K=256)", t_serial, t_parallel,
        serial_report.allocation == parallel_report.allocation &&
            serial_report.dual_value == parallel_report.dual_value);
  }

  // Grid oracle: embarrassingly parallel over grid cells.
  {
    experiments::GenParams gen;
    gen.seed = 11;
    const Instance instance = experiments::generate_instance(gen, 1, 2, 0.1);
    oracle::GridOptions serial_options;
    serial_options.threads = 1;
    oracle::GridOptions parallel_options;
    parallel_options.threads = 0;
    oracle::OracleResult serial_result, parallel_result;
    const double t_serial =
        time_of([&] { serial_result = oracle::grid_search(instance, 41, serial_options); });
    const double t_parallel =
        time_of([&] { parallel_result = oracle::grid_search(instance, 41, parallel_options); });
    row("grid oracle (41^4)", t_serial, t_parallel,
        serial_result.allocation == parallel_result.allocation);
  }

  // Sweep engine: independent trials.
  {
    experiments::GenParams gen;
    gen.seed = 13;
    experiments::SweepSpec spec;
    spec.parameter = experiments::SweepParameter::kNumSlots;
    spec.values = {10, 20, 30};
    spec.trials = 30;
    spec.fixed_num_users = 10;
    spec.fixed_slot_seconds = 0.02;
    experiments::SweepSpec serial_spec = spec;
    serial_spec.threads = 1;
    experiments::SweepResult serial_result, parallel_result;
    const double t_serial =
        time_of([&] { serial_result = experiments::run_sweep(serial_spec, gen); });
    const double t_parallel = time_of([&] { parallel_result = experiments::run_sweep(spec, gen); });
    bool identical = true;
    for (size_t i = 0; i < serial_result.cells.size(); ++i) {
      identical = identical &&
                  serial_result.cells[i].objectives == parallel_result.cells[i].objectives;
    }
    row("sweep (3x30 trials)", t_serial, t_parallel, identical);
  }
  return 0;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ehmec/baselines.hpp"
#include "ehmec/dual_solver.hpp"
#include "ehmec/experiments.hpp"
#include "ehmec/model.hpp"
#include "ehmec/oracle.hpp"

using namespace ehmec;

namespace {

// One user, one slot, the constants used by the closed-form examples.
Instance unit_instance(double tau) {
  Instance instance;
  SystemConfig& cfg = instance.config;
  cfg.num_users = 1;
  cfg.num_slots = 1;
  cfg.slot_seconds = tau;
  cfg.bandwidth_hz = 2e6;
  cfg.noise_power_w = 1e-9;
  cfg.weight = {1.0};
  cfg.capacitance = {1e-28};
  cfg.cycles_per_bit = {500.0};
  cfg.initial_energy_j = {0.3};
  instance.channel_gain = Grid(1, 1, 1e-7);
  instance.harvest = Grid(1, 0);
  return instance;
}

// The two-slot fixture: 0.3 J up front, 0.5 J arriving before the second
// slot, constant channel at 20 m pathloss.
Instance fixture_instance() {
  Instance instance;
  SystemConfig& cfg = instance.config;
  cfg.num_users = 1;
  cfg.num_slots = 2;
  cfg.slot_seconds = 0.1;
  cfg.bandwidth_hz = 2e6;
  cfg.noise_power_w = 1e-9;
  cfg.weight = {1.0};
  cfg.capacitance = {1e-28};
  cfg.cycles_per_bit = {500.0};
  cfg.initial_energy_j = {0.3};
  const double h = std::pow(10.0, -5.0) * std::pow(20.0, -3.5);
  instance.channel_gain = Grid(1, 2, h);
  instance.harvest = Grid(1, 1, 0.5);
  return instance;
}

double relative_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("closed-form local bits match the stationary point") {
  const Instance instance = unit_instance(0.01);
  const dual::DualState state = dual::DualState::from_mu(Grid(1, 1, 1.0));
  const Allocation allocation = dual::primal_from_dual(instance, state);

  // sqrt(w tau^2 / (3 M gamma C^3)) with all constants at their example values.
  CHECK(allocation.local_bits(0, 0) == doctest::Approx(5.164e7).epsilon(1e-3));

  // Central finite difference of the per-slot dual objective vanishes there.
  const double bits = allocation.local_bits(0, 0);
  auto objective = [&](double l) {
    return l - local_energy(l, 1e-28, 500.0, 0.01);  // M = 1, w = 1
  };
  const double h = 1e-6 * bits;
  const double derivative = (objective(bits + h) - objective(bits - h)) / (2.0 * h);
  CHECK(std::abs(derivative) < 1e-6);
}

TEST_CASE("weak channels clamp the offload bits to zero") {
  Instance instance = unit_instance(0.01);
  instance.channel_gain(0, 0) = 1e-12;
  // With M large the log argument drops below one.
  const dual::DualState state = dual::DualState::from_mu(Grid(1, 1, 1e9));
  const Allocation allocation = dual::primal_from_dual(instance, state);
  CHECK(allocation.offload_bits(0, 0) == 0.0);
  CHECK(allocation.local_bits(0, 0) > 0.0);
}

TEST_CASE("constant tail and gain give identical bits across slots") {
  Instance instance = fixture_instance();
  Grid mu(1, 2, 0.0);
  mu(0, 1) = 2.5e5;  // only the last multiplier is positive, so the tail is flat
  const dual::DualState state = dual::DualState::from_mu(mu);
  const Allocation allocation = dual::primal_from_dual(instance, state);
  CHECK(allocation.local_bits(0, 0) == allocation.local_bits(0, 1));
  CHECK(allocation.offload_bits(0, 0) == allocation.offload_bits(0, 1));
}

TEST_CASE("dual function equals the ungrouped Lagrangian") {
  const Instance instance = fixture_instance();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> level(1e3, 1e6);
  for (int i = 0; i < 20; ++i) {
    Grid mu(1, 2);
    mu(0, 0) = level(rng);
    mu(0, 1) = level(rng);
    const dual::DualState state = dual::DualState::from_mu(mu);
    const Allocation point = dual::primal_from_dual(instance, state);

    // Term-by-term evaluation with nested sums, no regrouping.
    const double tau = 0.1, bandwidth = 2e6, noise = 1e-9;
    const double h = instance.channel_gain(0, 0);
    const double el1 = local_energy(point.local_bits(0, 0), 1e-28, 500.0, tau);
    const double el2 = local_energy(point.local_bits(0, 1), 1e-28, 500.0, tau);
    const double eo1 = offload_energy(point.offload_bits(0, 0), h, tau, bandwidth, noise);
    const double eo2 = offload_energy(point.offload_bits(0, 1), h, tau, bandwidth, noise);
    const double bits = point.local_bits(0, 0) + point.local_bits(0, 1) +
                        point.offload_bits(0, 0) + point.offload_bits(0, 1);
    const double direct = bits + mu(0, 0) * (0.3 - el1 - eo1) +
                          mu(0, 1) * (0.3 + 0.5 - el1 - el2 - eo1 - eo2);

    const double grouped = dual::dual_function(instance, state);
    CHECK(relative_diff(direct, grouped) < 1e-12);
  }
}

TEST_CASE("dual values upper-bound every feasible allocation") {
  const Instance instance = fixture_instance();
  const Allocation feasible = baselines::equal_energy(instance);
  const double primal = weighted_rate(feasible, instance.config.weight);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> level(1e2, 1e7);
  for (int i = 0; i < 50; ++i) {
    Grid mu(1, 2);
    mu(0, 0) = level(rng);
    mu(0, 1) = level(rng);
    const double dual_value = dual::dual_function(instance, dual::DualState::from_mu(mu));
    CHECK(dual_value >= primal * (1.0 - 1e-9));
  }
}

TEST_CASE("dual gradient is the slack of the induced allocation") {
  const Instance instance = fixture_instance();
  Grid mu(1, 2);
  mu(0, 0) = 1e5;
  mu(0, 1) = 3e5;
  const dual::DualState state = dual::DualState::from_mu(mu);
  const Grid gradient = dual::dual_gradient(instance, state);
  const Grid slack = causality_slack(instance, dual::primal_from_dual(instance, state)).slack;
  CHECK(gradient == slack);
}

TEST_CASE("huge multipliers suppress the allocation, leaving the full budget slack") {
  const Instance instance = fixture_instance();
  const dual::DualState state = dual::DualState::from_mu(Grid(1, 2, 1e14));
  const Grid gradient = dual::dual_gradient(instance, state);
  CHECK(gradient(0, 0) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(gradient(0, 1) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("dual gradient matches central finite differences") {
  experiments::GenParams gen;
  gen.seed = 99;
  const Instance instance = experiments::generate_instance(gen, 2, 3, 0.2 / 3.0);

  // Interior dual point at a realistic multiplier scale.
  const dual::SolveReport solved = dual::solve(instance);
  double mu_scale = 0.0;
  for (double v : solved.final_dual.mu.data()) mu_scale += v;
  mu_scale /= static_cast<double>(solved.final_dual.mu.data().size());

  Grid mu = solved.final_dual.mu;
  for (int k = 0; k < 2; ++k) {
    for (int n = 0; n < 3; ++n) {
      mu(k, n) = std::max(mu(k, n), 0.2 * mu_scale) * (1.1 + 0.13 * (k + n));
    }
  }
  const dual::DualState state = dual::DualState::from_mu(mu);
  const Grid gradient = dual::dual_gradient(instance, state);

  for (int k = 0; k < 2; ++k) {
    for (int n = 0; n < 3; ++n) {
      const double delta = 1e-4 * std::max(mu(k, n), mu_scale);
      Grid up = mu, down = mu;
      up(k, n) += delta;
      down(k, n) -= delta;
      const double fd = (dual::dual_function(instance, dual::DualState::from_mu(up)) -
                         dual::dual_function(instance, dual::DualState::from_mu(down))) /
                        (2.0 * delta);
      const double tolerance = std::max(1e-6 * std::abs(gradient(k, n)), 1e-9);
      CHECK(std::abs(fd - gradient(k, n)) < tolerance);
    }
  }
}

TEST_CASE("solve on a zero-energy instance returns zero") {
  Instance instance = unit_instance(0.2);
  instance.config.initial_energy_j[0] = 0.0;
  const dual::SolveReport report = dual::solve(instance);
  CHECK(report.converged);
  CHECK(report.primal_value == 0.0);
  CHECK(report.dual_value == 0.0);
  CHECK(report.relative_gap == 0.0);
  CHECK(report.allocation.local_bits(0, 0) == 0.0);
  CHECK(report.allocation.offload_bits(0, 0) == 0.0);
  CHECK(report.feasibility.feasible);
}

TEST_CASE("solve matches the grid oracle on the two-slot fixture") {
  const Instance instance = fixture_instance();
  const dual::SolveReport report = dual::solve(instance);
  CHECK(report.converged);
  CHECK(report.feasibility.feasible);
  CHECK(report.relative_gap <= 1e-3);

  const oracle::OracleResult grid = oracle::grid_search(instance);
  CHECK(relative_diff(report.primal_value, grid.objective) < 5e-3);
}

TEST_CASE("constant gains give monotone per-slot bits") {
  experiments::GenParams gen;
  gen.seed = 31;
  Instance instance = experiments::generate_instance(gen, 2, 6, 0.02);
  const double h = experiments::pathloss_factor(gen);
  for (int k = 0; k < 2; ++k) {
    for (int n = 0; n < 6; ++n) instance.channel_gain(k, n) = h;
  }
  const dual::SolveReport report = dual::solve(instance);
  CHECK(report.converged);
  for (int k = 0; k < 2; ++k) {
    for (int n = 0; n + 1 < 6; ++n) {
      const double l0 = report.allocation.local_bits(k, n);
      const double l1 = report.allocation.local_bits(k, n + 1);
      CHECK(l0 <= l1 + 1e-9 * l1);
      const double o0 = report.allocation.offload_bits(k, n);
      const double o1 = report.allocation.offload_bits(k, n + 1);
      CHECK(o0 <= o1 + 1e-9 * std::max(o1, 1.0));
    }
  }
}

TEST_CASE("repair leaves feasible allocations untouched") {
  const Instance instance = fixture_instance();
  const Allocation feasible = baselines::equal_energy(instance);
  const Allocation repaired = dual::feasibility_repair(instance, feasible);
  CHECK(repaired == feasible);
}

TEST_CASE("repair scales only the overloaded final slot") {
  const Instance instance = fixture_instance();
  Allocation allocation = baselines::equal_energy(instance);  // tight in every slot

  // Double the final slot's energy in both modes.
  const double h = instance.channel_gain(0, 1);
  const double el = local_energy(allocation.local_bits(0, 1), 1e-28, 500.0, 0.1);
  const double eo = offload_energy(allocation.offload_bits(0, 1), h, 0.1, 2e6, 1e-9);
  allocation.local_bits(0, 1) = local_bits_from_energy(2.0 * el, 1e-28, 500.0, 0.1);
  allocation.offload_bits(0, 1) = offload_bits_from_energy(2.0 * eo, h, 0.1, 2e6, 1e-9);
  CHECK_FALSE(causality_slack(instance, allocation).feasible);

  const Allocation repaired = dual::feasibility_repair(instance, allocation);
  CHECK(repaired.local_bits(0, 0) == allocation.local_bits(0, 0));
  CHECK(repaired.offload_bits(0, 0) == allocation.offload_bits(0, 0));
  CHECK(repaired.local_bits(0, 1) < allocation.local_bits(0, 1));
  CHECK(repaired.offload_bits(0, 1) < allocation.offload_bits(0, 1));
  const FeasibilityReport after = causality_slack(instance, repaired);
  CHECK(after.feasible);
  CHECK(std::abs(after.slack(0, 1)) < 1e-9);
}

TEST_CASE("repair output is always feasible and pointwise below the input") {
  experiments::GenParams gen;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> scale(0.5, 4.0);
  for (int i = 0; i < 10; ++i) {
    gen.seed = 1000 + i;
    const Instance instance = experiments::generate_instance(gen, 3, 5, 0.04);
    Allocation allocation = baselines::equal_energy(instance);
    for (double& v : allocation.local_bits.data()) v *= scale(rng);
    for (double& v : allocation.offload_bits.data()) v *= scale(rng);
    const Allocation repaired = dual::feasibility_repair(instance, allocation);
    CHECK(causality_slack(instance, repaired).feasible);
    for (size_t j = 0; j < repaired.local_bits.data().size(); ++j) {
      CHECK(repaired.local_bits.data()[j] <= allocation.local_bits.data()[j]);
      CHECK(repaired.offload_bits.data()[j] <= allocation.offload_bits.data()[j]);
    }
  }
}

TEST_CASE("weak duality holds on every iterate") {
  experiments::GenParams gen;
  for (int i = 0; i < 5; ++i) {
    gen.seed = 500 + i;
    const Instance instance = experiments::generate_instance(gen, 3, 8, 0.025);
    const dual::SolveReport report = dual::solve(instance);
    CHECK(report.converged);
    REQUIRE(!report.dual_trace.empty());
    for (double value : report.dual_trace) {
      CHECK(value >= report.primal_value - 1e-9 * std::abs(report.dual_value));
    }
  }
}

TEST_CASE("users separate: joint and single-user solves agree bitwise") {
  experiments::GenParams gen;
  gen.seed = 77;
  const Instance joint = experiments::generate_instance(gen, 3, 4, 0.05);
  const dual::SolveReport joint_report = dual::solve(joint);

  for (int k = 0; k < 3; ++k) {
    Instance single;
    single.config = joint.config;
    single.config.num_users = 1;
    single.config.weight = {joint.config.weight[k]};
    single.config.capacitance = {joint.config.capacitance[k]};
    single.config.cycles_per_bit = {joint.config.cycles_per_bit[k]};
    single.config.initial_energy_j = {joint.config.initial_energy_j[k]};
    single.channel_gain = Grid(1, 4);
    single.harvest = Grid(1, 3);
    for (int n = 0; n < 4; ++n) single.channel_gain(0, n) = joint.channel_gain(k, n);
    for (int n = 0; n < 3; ++n) single.harvest(0, n) = joint.harvest(k, n);

    const dual::SolveReport single_report = dual::solve(single);
    for (int n = 0; n < 4; ++n) {
      CHECK(single_report.allocation.local_bits(0, n) == joint_report.allocation.local_bits(k, n));
      CHECK(single_report.allocation.offload_bits(0, n) ==
            joint_report.allocation.offload_bits(k, n));
    }
  }
}

TEST_CASE("serial and parallel solves agree bitwise") {
  experiments::GenParams gen;
  gen.seed = 83;
  const Instance instance = experiments::generate_instance(gen, 6, 6, 0.03);
  dual::SolveOptions serial;
  serial.threads = 1;
  dual::SolveOptions parallel;
  parallel.threads = 0;
  const dual::SolveReport a = dual::solve(instance, serial);
  const dual::SolveReport b = dual::solve(instance, parallel);
  CHECK(a.allocation == b.allocation);
  CHECK(a.primal_value == b.primal_value);
  CHECK(a.dual_value == b.dual_value);
  CHECK(a.dual_trace == b.dual_trace);
}

TEST_CASE("tail sums stay ordered and positive after solving") {
  experiments::GenParams gen;
  gen.seed = 19;
  const Instance instance = experiments::generate_instance(gen, 2, 6, 0.02);
  const dual::SolveReport report = dual::solve(instance);
  for (int k = 0; k < 2; ++k) {
    for (int n = 0; n < 6; ++n) {
      CHECK(report.final_dual.tail(k, n) > 0.0);
      if (n + 1 < 6) CHECK(report.final_dual.tail(k, n) >= report.final_dual.tail(k, n + 1));
    }
  }
}

TEST_CASE("final-slot causality is active at convergence") {
  experiments::GenParams gen;
  for (int i = 0; i < 5; ++i) {
    gen.seed = 600 + i;
    const Instance instance = experiments::generate_instance(gen, 2, 7, 0.03);
    const dual::SolveReport report = dual::solve(instance);
    CHECK(report.converged);
    for (int k = 0; k < 2; ++k) {
      const double available = total_available_energy(instance, k);
      CHECK(std::abs(report.feasibility.slack(k, 6)) <= std::max(1e-6 * available, 1e-12));
    }
  }
}

TEST_CASE("a single iteration reports non-convergence") {
  const Instance instance = fixture_instance();
  dual::SolveOptions options;
  options.max_iterations = 1;
  const dual::SolveReport report = dual::solve(instance, options);
  CHECK_FALSE(report.converged);
  CHECK(report.iterations == 1);
  CHECK(report.feasibility.feasible);  // the best-effort primal is still feasible
}

TEST_CASE("duality gap guards the degenerate zero case") {
  CHECK(dual::duality_gap(0.0, 0.0) == 0.0);
  CHECK(dual::duality_gap(1e6, 1e6 + 10.0) == doctest::Approx(10.0 / (1e6 + 10.0)));
}

TEST_CASE("invalid duals are rejected") {
  const Instance instance = fixture_instance();
  CHECK_THROWS_AS(dual::primal_from_dual(instance, dual::DualState::from_mu(Grid(1, 2, 0.0))),
                  std::invalid_argument);
  Grid negative(1, 2, 1.0);
  negative(0, 1) = -2.0;
  CHECK_THROWS_AS(dual::primal_from_dual(instance, dual::DualState::from_mu(negative)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dual::dual_function(instance, dual::DualState::from_mu(Grid(2, 2, 1.0))),
                  std::invalid_argument);
}

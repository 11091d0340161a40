#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ehmec/baselines.hpp"
#include "ehmec/experiments.hpp"
#include "ehmec/model.hpp"
#include "ehmec/oracle.hpp"

using namespace ehmec;

namespace {

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

}  // namespace

TEST_CASE("equal energy on a drained instance is the zero allocation") {
  Instance instance = fixture_instance();
  instance.config.initial_energy_j[0] = 0.0;
  instance.harvest(0, 0) = 0.0;
  const Allocation allocation = baselines::equal_energy(instance);
  CHECK(allocation.local_bits(0, 0) == 0.0);
  CHECK(allocation.local_bits(0, 1) == 0.0);
  CHECK(allocation.offload_bits(0, 0) == 0.0);
  CHECK(allocation.offload_bits(0, 1) == 0.0);
}

TEST_CASE("equal energy splits each arrival half and half") {
  const Instance instance = fixture_instance();
  const Allocation allocation = baselines::equal_energy(instance);

  const double h = instance.channel_gain(0, 0);
  // Slot 1 sees the 0.3 J initial store: 0.15 J per mode.
  const double c3 = 500.0 * 500.0 * 500.0;
  const double expected_local_1 = std::cbrt(0.15 * 0.01 / (1e-28 * c3));
  const double expected_offload_1 = 0.1 * 2e6 * std::log2(1.0 + 0.15 * h / (1e-9 * 0.1));
  CHECK(allocation.local_bits(0, 0) == doctest::Approx(expected_local_1).epsilon(1e-12));
  CHECK(allocation.offload_bits(0, 0) == doctest::Approx(expected_offload_1).epsilon(1e-12));

  // Slot 2 sees the 0.5 J arrival: 0.25 J per mode.
  const double expected_local_2 = std::cbrt(0.25 * 0.01 / (1e-28 * c3));
  CHECK(allocation.local_bits(0, 1) == doctest::Approx(expected_local_2).epsilon(1e-12));

  // The scheme spends exactly what arrives, so every slack is ~zero.
  const FeasibilityReport report = causality_slack(instance, allocation);
  CHECK(report.feasible);
  CHECK(std::abs(report.slack(0, 0)) < 1e-12);
  CHECK(std::abs(report.slack(0, 1)) < 1e-12);
}

TEST_CASE("equal energy output is feasible on random instances") {
  for (int seed = 1; seed <= 10; ++seed) {
    experiments::GenParams gen;
    gen.seed = 100 + seed;
    const Instance instance = experiments::generate_instance(gen, 4, 7, 0.03);
    const Allocation allocation = baselines::equal_energy(instance);
    CHECK(causality_slack(instance, allocation).feasible);
  }
}

TEST_CASE("single-mode schemes never beat the proposed scheme") {
  for (int seed = 1; seed <= 6; ++seed) {
    experiments::GenParams gen;
    gen.seed = 200 + seed;
    const Instance instance = experiments::generate_instance(gen, 3, 6, 0.2 / 6.0);
    const baselines::SchemeResult proposed =
        baselines::run_scheme(instance, baselines::SchemeId::kProposed);
    CHECK(proposed.converged);
    const double slack = 1e-3 * proposed.dual_value;
    for (const auto scheme :
         {baselines::SchemeId::kEqualEnergy, baselines::SchemeId::kLocalOnly,
          baselines::SchemeId::kFullOffload}) {
      const baselines::SchemeResult other = baselines::run_scheme(instance, scheme);
      CHECK(causality_slack(instance, other.allocation).feasible);
      CHECK(proposed.objective >= other.objective - slack);
    }
  }
}

TEST_CASE("local-only bits ramp up when parameters are constant over slots") {
  experiments::GenParams gen;
  gen.seed = 7;
  Instance instance = experiments::generate_instance(gen, 1, 8, 0.025);
  const double h = experiments::pathloss_factor(gen);
  for (int n = 0; n < 8; ++n) instance.channel_gain(0, n) = h;
  const dual::SolveReport report = baselines::local_only(instance);
  CHECK(report.converged);
  for (int n = 0; n + 1 < 8; ++n) {
    const double a = report.allocation.local_bits(0, n);
    const double b = report.allocation.local_bits(0, n + 1);
    CHECK(a <= b + 1e-9 * b);
    CHECK(report.allocation.offload_bits(0, n) == 0.0);
  }
}

TEST_CASE("local-only matches the restricted grid oracle on the fixture") {
  const Instance instance = fixture_instance();
  const dual::SolveReport report = baselines::local_only(instance);
  oracle::GridOptions options;
  options.restriction = ModeRestriction::kLocalOnly;
  const oracle::OracleResult grid = oracle::grid_search(instance, 0, options);
  CHECK(std::abs(report.primal_value - grid.objective) < 5e-3 * grid.objective);
}

TEST_CASE("full-offload matches the restricted grid oracle on the fixture") {
  const Instance instance = fixture_instance();
  const dual::SolveReport report = baselines::full_offload(instance);
  oracle::GridOptions options;
  options.restriction = ModeRestriction::kOffloadOnly;
  const oracle::OracleResult grid = oracle::grid_search(instance, 0, options);
  CHECK(std::abs(report.primal_value - grid.objective) < 5e-3 * grid.objective);
  for (int n = 0; n < 2; ++n) CHECK(report.allocation.local_bits(0, n) == 0.0);
}

TEST_CASE("offload bits grow with the channel gain") {
  Instance weak = fixture_instance();
  Instance strong = fixture_instance();
  for (int n = 0; n < 2; ++n) {
    weak.channel_gain(0, n) = 1e-9;
    strong.channel_gain(0, n) = 1e-7;
  }
  const dual::SolveReport weak_report = baselines::full_offload(weak);
  const dual::SolveReport strong_report = baselines::full_offload(strong);
  CHECK(strong_report.primal_value > weak_report.primal_value);
}

TEST_CASE("scheme names round-trip") {
  for (const auto scheme : {baselines::SchemeId::kProposed, baselines::SchemeId::kEqualEnergy,
                            baselines::SchemeId::kLocalOnly, baselines::SchemeId::kFullOffload}) {
    const auto parsed = baselines::parse_scheme(baselines::scheme_name(scheme));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == scheme);
  }
  CHECK_FALSE(baselines::parse_scheme("does_not_exist").has_value());
}

TEST_CASE("run_scheme reports dual information only for solver-backed schemes") {
  const Instance instance = fixture_instance();
  const baselines::SchemeResult equal =
      baselines::run_scheme(instance, baselines::SchemeId::kEqualEnergy);
  CHECK_FALSE(equal.has_dual);
  CHECK(equal.converged);
  const baselines::SchemeResult proposed =
      baselines::run_scheme(instance, baselines::SchemeId::kProposed);
  CHECK(proposed.has_dual);
  CHECK(proposed.dual_value >= proposed.objective);
}

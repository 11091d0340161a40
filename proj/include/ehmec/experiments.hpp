#ifndef EHMEC_EXPERIMENTS_HPP_
#define EHMEC_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ehmec/baselines.hpp"
#include "ehmec/model.hpp"

// Seeded random-instance generation and the Monte Carlo sweep engine behind
// the scheme-comparison experiments. Everything here is deterministic in the
// master seed: per-trial seeds are derived with a counter-based split, and
// paired trials reuse the identical instance across schemes.
namespace ehmec::experiments {

struct GenParams {
  double e0_max_j = 1.0;          // per-slot harvest ~ Uniform[0, e0_max_j]
  double e_init_j = 0.3;          // initial stored energy E_{k,0}
  double gamma0_db = -50.0;       // reference pathloss at 1 m, in dB
  double pathloss_exponent = 3.5;
  double distance_m = 20.0;
  std::uint64_t seed = 1;
  double bandwidth_hz = 2e6;
  double noise_power_w = 1e-9;
  double capacitance = 1e-28;
  double cycles_per_bit = 500.0;
  double weight = 1.0;
  double horizon_seconds = 0.2;   // default T; tau = T/N when not fixed explicitly
};

/// Deterministic 64-bit stream split: child seed for (stream a, counter b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

/// Draws an instance: harvest i.i.d. Uniform[0, e0_max], channel power gains
/// pathloss * unit-mean exponential fading (Rayleigh amplitude). Fully
/// determined by params.seed.
Instance generate_instance(const GenParams& params, int num_users, int num_slots,
                           double slot_seconds);

/// Deterministic pathloss factor 10^(gamma0_db/10) * d^(-exponent).
double pathloss_factor(const GenParams& params);

enum class SweepParameter { kNumSlots, kSlotSeconds, kNumUsers };
enum class TauMode {
  kFixedTau,      // sweeping N leaves tau fixed, so the horizon grows with N
  kFixedHorizon,  // sweeping N divides a fixed horizon, tau = T/N
};

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kNumSlots;
  std::vector<double> values;
  int trials = 50;
  std::vector<baselines::SchemeId> schemes = {
      baselines::SchemeId::kProposed, baselines::SchemeId::kEqualEnergy,
      baselines::SchemeId::kLocalOnly, baselines::SchemeId::kFullOffload};
  int fixed_num_users = 10;
  int fixed_num_slots = 20;
  double fixed_slot_seconds = 0.02;
  TauMode tau_mode = TauMode::kFixedTau;
  bool exclude_nonconverged_from_mean = false;
  int threads = 0;
};

struct SweepCell {
  double value = 0.0;
  baselines::SchemeId scheme = baselines::SchemeId::kProposed;
  std::vector<double> objectives;  // one per trial, trial order
  std::vector<std::uint8_t> converged;
  double mean = 0.0;
  double stddev = 0.0;
  int nonconverged = 0;
};

struct SweepResult {
  SweepSpec spec;
  GenParams gen;
  std::vector<SweepCell> cells;  // ordered by (value index, scheme index)
  std::string build_id;
};

const SweepCell& cell_at(const SweepResult& result, int value_index,
                         baselines::SchemeId scheme);

SweepResult run_sweep(const SweepSpec& spec, const GenParams& gen);

}  // namespace ehmec::experiments

#endif  // EHMEC_EXPERIMENTS_HPP_

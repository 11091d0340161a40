#include "ehmec/experiments.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ehmec/parallel.hpp"

namespace ehmec::experiments {

namespace {

constexpr const char* kBuildId = "ehmec 0.1.0";

// Uniform and exponential draws built directly on the standard-pinned
// mt19937_64 stream, so instances are bit-identical across standard
// libraries as well as runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double exponential() {
    double u = uniform01();
    while (u == 0.0) u = uniform01();  // keep gains strictly positive
    return -std::log(u);
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  state ^= a * 0x9e3779b97f4a7c15ull;
  h ^= splitmix64(state);
  state ^= b + 0x632be59bd9b4e019ull;
  h ^= splitmix64(state);
  return h;
}

double pathloss_factor(const GenParams& params) {
  return std::pow(10.0, params.gamma0_db / 10.0) *
         std::pow(params.distance_m, -params.pathloss_exponent);
}

Instance generate_instance(const GenParams& params, int num_users, int num_slots,
                           double slot_seconds) {
  if (num_users < 1 || num_slots < 1) {
    throw std::invalid_argument("generate_instance: need at least one user and one slot");
  }
  Instance instance;
  SystemConfig& cfg = instance.config;
  cfg.num_users = num_users;
  cfg.num_slots = num_slots;
  cfg.slot_seconds = slot_seconds;
  cfg.bandwidth_hz = params.bandwidth_hz;
  cfg.noise_power_w = params.noise_power_w;
  cfg.weight.assign(num_users, params.weight);
  cfg.capacitance.assign(num_users, params.capacitance);
  cfg.cycles_per_bit.assign(num_users, params.cycles_per_bit);
  cfg.initial_energy_j.assign(num_users, params.e_init_j);

  Rng rng(params.seed);
  const double pathloss = pathloss_factor(params);
  instance.channel_gain = Grid(num_users, num_slots);
  for (int k = 0; k < num_users; ++k) {
    for (int n = 0; n < num_slots; ++n) {
      instance.channel_gain(k, n) = pathloss * rng.exponential();
    }
  }
  instance.harvest = Grid(num_users, num_slots - 1);
  for (int k = 0; k < num_users; ++k) {
    for (int n = 0; n + 1 < num_slots; ++n) {
      instance.harvest(k, n) = params.e0_max_j * rng.uniform01();
    }
  }
  validate_instance(instance);
  return instance;
}

const SweepCell& cell_at(const SweepResult& result, int value_index,
                         baselines::SchemeId scheme) {
  for (size_t s = 0; s < result.spec.schemes.size(); ++s) {
    if (result.spec.schemes[s] == scheme) {
      return result.cells[value_index * result.spec.schemes.size() + s];
    }
  }
  throw std::invalid_argument("cell_at: scheme not part of the sweep");
}

SweepResult run_sweep(const SweepSpec& spec, const GenParams& gen) {
  if (spec.values.empty()) throw std::invalid_argument("run_sweep: empty value list");
  if (spec.trials < 1) throw std::invalid_argument("run_sweep: trials must be >= 1");
  if (spec.schemes.empty()) throw std::invalid_argument("run_sweep: no schemes selected");

  const int num_values = static_cast<int>(spec.values.size());
  const int num_schemes = static_cast<int>(spec.schemes.size());

  SweepResult result;
  result.spec = spec;
  result.gen = gen;
  result.build_id = kBuildId;
  result.cells.resize(static_cast<size_t>(num_values) * num_schemes);
  for (int vi = 0; vi < num_values; ++vi) {
    for (int si = 0; si < num_schemes; ++si) {
      SweepCell& cell = result.cells[vi * num_schemes + si];
      cell.value = spec.values[vi];
      cell.scheme = spec.schemes[si];
      cell.objectives.assign(spec.trials, 0.0);
      cell.converged.assign(spec.trials, 1);
    }
  }

  const int threads = resolve_threads(spec.threads);
  const long total_tasks = static_cast<long>(num_values) * spec.trials;
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (long task = 0; task < total_tasks; ++task) {
    try {
      const int vi = static_cast<int>(task / spec.trials);
      const int trial = static_cast<int>(task % spec.trials);
      const double value = spec.values[vi];

      int num_users = spec.fixed_num_users;
      int num_slots = spec.fixed_num_slots;
      double tau = spec.fixed_slot_seconds;
      switch (spec.parameter) {
        case SweepParameter::kNumSlots:
          num_slots = static_cast<int>(value);
          if (spec.tau_mode == TauMode::kFixedHorizon) tau = gen.horizon_seconds / num_slots;
          break;
        case SweepParameter::kSlotSeconds:
          tau = value;
          break;
        case SweepParameter::kNumUsers:
          num_users = static_cast<int>(value);
          break;
      }

      GenParams trial_gen = gen;
      trial_gen.seed = derive_seed(gen.seed, static_cast<std::uint64_t>(vi),
                                   static_cast<std::uint64_t>(trial));
      const Instance instance = generate_instance(trial_gen, num_users, num_slots, tau);

      // Paired comparison: every scheme sees the identical instance. Scheme
      // solves run serially here; the parallelism is over trials.
      dual::SolveOptions solver_options;
      solver_options.threads = 1;
      for (int si = 0; si < num_schemes; ++si) {
        const baselines::SchemeResult scheme_result =
            baselines::run_scheme(instance, spec.schemes[si], solver_options);
        SweepCell& cell = result.cells[vi * num_schemes + si];
        cell.objectives[trial] = scheme_result.objective;
        cell.converged[trial] = scheme_result.converged ? 1 : 0;
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (SweepCell& cell : result.cells) {
    double sum = 0.0;
    int counted = 0;
    for (int t = 0; t < spec.trials; ++t) {
      if (!cell.converged[t]) ++cell.nonconverged;
      if (spec.exclude_nonconverged_from_mean && !cell.converged[t]) continue;
      sum += cell.objectives[t];
      ++counted;
    }
    cell.mean = counted > 0 ? sum / counted : 0.0;
    double sq = 0.0;
    for (int t = 0; t < spec.trials; ++t) {
      if (spec.exclude_nonconverged_from_mean && !cell.converged[t]) continue;
      const double d = cell.objectives[t] - cell.mean;
      sq += d * d;
    }
    cell.stddev = counted > 1 ? std::sqrt(sq / (counted - 1)) : 0.0;
  }
  return result;
}

}  // namespace ehmec::experiments

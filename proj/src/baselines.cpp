#include "ehmec/baselines.hpp"

namespace ehmec::baselines {

std::string_view scheme_name(SchemeId scheme) {
  switch (scheme) {
    case SchemeId::kProposed: return "proposed";
    case SchemeId::kEqualEnergy: return "equal_energy";
    case SchemeId::kLocalOnly: return "local_only";
    case SchemeId::kFullOffload: return "full_offload";
  }
  return "unknown";
}

std::optional<SchemeId> parse_scheme(std::string_view name) {
  if (name == "proposed") return SchemeId::kProposed;
  if (name == "equal_energy") return SchemeId::kEqualEnergy;
  if (name == "local_only") return SchemeId::kLocalOnly;
  if (name == "full_offload") return SchemeId::kFullOffload;
  return std::nullopt;
}

Allocation equal_energy(const Instance& instance) {
  validate_instance(instance);
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  Allocation allocation{Grid(K, N), Grid(K, N)};
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      const double arrival = n == 0 ? cfg.initial_energy_j[k] : instance.harvest(k, n - 1);
      const double half = 0.5 * arrival;
      allocation.local_bits(k, n) =
          local_bits_from_energy(half, cfg.capacitance[k], cfg.cycles_per_bit[k], cfg.slot_seconds);
      allocation.offload_bits(k, n) = offload_bits_from_energy(
          half, instance.channel_gain(k, n), cfg.slot_seconds, cfg.bandwidth_hz, cfg.noise_power_w);
    }
  }
  return allocation;
}

dual::SolveReport local_only(const Instance& instance, dual::SolveOptions options) {
  options.restriction = ModeRestriction::kLocalOnly;
  return dual::solve(instance, options);
}

dual::SolveReport full_offload(const Instance& instance, dual::SolveOptions options) {
  options.restriction = ModeRestriction::kOffloadOnly;
  return dual::solve(instance, options);
}

SchemeResult run_scheme(const Instance& instance, SchemeId scheme,
                        const dual::SolveOptions& options) {
  SchemeResult result;
  result.scheme = scheme;
  if (scheme == SchemeId::kEqualEnergy) {
    result.allocation = equal_energy(instance);
    result.objective = weighted_rate(result.allocation, instance.config.weight);
    return result;
  }
  dual::SolveOptions opts = options;
  switch (scheme) {
    case SchemeId::kProposed: opts.restriction = ModeRestriction::kBoth; break;
    case SchemeId::kLocalOnly: opts.restriction = ModeRestriction::kLocalOnly; break;
    case SchemeId::kFullOffload: opts.restriction = ModeRestriction::kOffloadOnly; break;
    case SchemeId::kEqualEnergy: break;
  }
  dual::SolveReport report = dual::solve(instance, opts);
  result.allocation = std::move(report.allocation);
  result.objective = report.primal_value;
  result.converged = report.converged;
  result.has_dual = true;
  result.dual_value = report.dual_value;
  result.relative_gap = report.relative_gap;
  return result;
}

}  // namespace ehmec::baselines

#ifndef EHMEC_BASELINES_HPP_
#define EHMEC_BASELINES_HPP_

#include <optional>
#include <string_view>

#include "ehmec/dual_solver.hpp"
#include "ehmec/model.hpp"

// The comparison schemes: the proposed dual solver plus three baselines.
namespace ehmec::baselines {

enum class SchemeId { kProposed, kEqualEnergy, kLocalOnly, kFullOffload };

std::string_view scheme_name(SchemeId scheme);
std::optional<SchemeId> parse_scheme(std::string_view name);

/// Splits the energy arriving at each slot into two identical parts, one per
/// mode, and spends both within that slot. Feasible by construction; no
/// banking across slots.
Allocation equal_energy(const Instance& instance);

/// Optimal schedule with offloading disabled (dual solve, local mode only).
dual::SolveReport local_only(const Instance& instance, dual::SolveOptions options = {});

/// Optimal schedule with local computing disabled.
dual::SolveReport full_offload(const Instance& instance, dual::SolveOptions options = {});

struct SchemeResult {
  SchemeId scheme = SchemeId::kProposed;
  Allocation allocation;
  double objective = 0.0;
  bool converged = true;
  bool has_dual = false;     // true for solver-backed schemes
  double dual_value = 0.0;
  double relative_gap = 0.0;
};

/// Uniform entry point used by the sweep engine and the CLI.
SchemeResult run_scheme(const Instance& instance, SchemeId scheme,
                        const dual::SolveOptions& options = {});

}  // namespace ehmec::baselines

#endif  // EHMEC_BASELINES_HPP_

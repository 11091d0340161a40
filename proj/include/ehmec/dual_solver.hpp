#ifndef EHMEC_DUAL_SOLVER_HPP_
#define EHMEC_DUAL_SOLVER_HPP_

#include <vector>

#include "ehmec/model.hpp"

// Lagrange-dual machinery for the weighted computation-rate maximization
// problem: closed-form primal recovery from the multipliers, dual function
// and gradient evaluation, and a projected subgradient loop with feasible
// primal extraction and duality-gap reporting.
//
// The causality constraints are dualized with multipliers mu(k, n) >= 0;
// everything downstream depends on them only through the tail sums
// M(k, n) = sum_{j >= n} mu(k, j), the effective energy price at slot n.
namespace ehmec::dual {

/// Multipliers plus their cached tail sums.
struct DualState {
  Grid mu;    // K x N, non-negative, units bits/Joule
  Grid tail;  // K x N, tail(k, n) = sum_{j>=n} mu(k, j)

  static DualState from_mu(Grid mu_values);
  void recompute_tail();
};

enum class StepRule { kDiminishing, kConstant, kPolyak };

enum class StepScaling {
  kNone,                   // raw steps, exactly the textbook update
  kInverseEnergySquared,   // eta0 / E_avail^2 per user
  kAuto,                   // eta0 * mu_init / E_avail per user (default)
};

struct SolveOptions {
  double epsilon = 1e-6;          // relative dual-change stopping threshold
  long max_iterations = 100000;
  StepRule step_rule = StepRule::kDiminishing;
  double step_scale = 1.0;        // eta0
  StepScaling step_scaling = StepScaling::kAuto;
  double gap_exit = 1e-4;         // early exit once the duality gap drops below this
  double converged_gap = 5e-4;    // gap the dual-change stop must certify; above it
                                  // the schedule restarts from the best iterate
  int gap_check_interval = 5;     // iterations between feasible-primal gap probes
  double mu_floor_factor = 1e-3;  // mu(k, N) >= factor * w_k * tau^2 / E_avail^2
  ModeRestriction restriction = ModeRestriction::kBoth;
  int threads = 0;                // 0 = all available; 1 = serial
  bool record_trace = true;
};

struct SolveReport {
  Allocation allocation;           // feasible primal point
  double primal_value = 0.0;       // weighted bits of `allocation`
  double dual_value = 0.0;         // best dual upper bound seen
  double relative_gap = 0.0;       // (dual - primal) / max(1, dual)
  long iterations = 0;
  bool converged = false;
  std::vector<double> dual_trace;  // per-iteration total dual values
  DualState final_dual;            // polished multipliers behind `allocation`
  FeasibilityReport feasibility;
};

/// Closed-form maximizer of the Lagrangian over non-negative bits at the
/// given prices. Requires tail(k, n) > 0 everywhere.
///   l_loc = sqrt(w tau^2 / (3 M gamma C^3))
///   l_off = max(0, tau B log2(w B h / (M sigma^2 ln 2)))
Allocation primal_from_dual(const Instance& instance, const DualState& dual,
                            ModeRestriction restriction = ModeRestriction::kBoth);

/// Dual function value: the Lagrangian evaluated at primal_from_dual(dual),
/// including the multiplier-weighted available-energy constants. Upper
/// bounds the problem optimum for any non-negative multipliers.
double dual_function(const Instance& instance, const DualState& dual,
                     ModeRestriction restriction = ModeRestriction::kBoth);

/// Gradient of the dual function: the causality slacks of the dual-induced
/// allocation (identical to causality_slack on primal_from_dual).
Grid dual_gradient(const Instance& instance, const DualState& dual,
                   ModeRestriction restriction = ModeRestriction::kBoth);

/// Projected subgradient descent on the multipliers with closed-form primal
/// recovery, feasible-primal extraction, and gap reporting. Per-user
/// subproblems are independent and run concurrently when threads != 1.
SolveReport solve(const Instance& instance, const SolveOptions& options = {});

/// Forward per-user sweep: whenever cumulative use exceeds available energy
/// at a slot, scale that slot's bit pair down (common factor, bisection on
/// the recomputed energy) until the budget holds. Output is feasible and
/// pointwise <= input; already-feasible slots pass through untouched.
Allocation feasibility_repair(const Instance& instance, const Allocation& allocation);

/// (dual - primal) / max(1, dual); the max(1, .) guards the zero-energy case.
double duality_gap(double primal_value, double dual_value);

}  // namespace ehmec::dual

#endif  // EHMEC_DUAL_SOLVER_HPP_

#ifndef EHMEC_ORACLE_HPP_
#define EHMEC_ORACLE_HPP_

#include "ehmec/model.hpp"

// Independent ground-truth solvers used for verification only. Both methods
// build on the model primitives alone and share no solution path with the
// dual solver, so agreement between them and the solver is meaningful.
namespace ehmec::oracle {

enum class Method { kGrid, kProjectedGradient };

struct OracleResult {
  Allocation allocation;
  double objective = 0.0;
  Method method = Method::kGrid;
  long evaluations = 0;  // grid points visited, or gradient iterations
};

struct GridOptions {
  int refinement_rounds = 3;
  double refinement_factor = 4.0;
  ModeRestriction restriction = ModeRestriction::kBoth;
  int threads = 0;
};

/// Exhaustive grid search over the bit variables, refined around the
/// incumbent. Only instances with K*N <= 4 decision pairs are accepted.
/// Per-axis upper bounds spend the entire energy available through the
/// axis' slot on that single variable. points_per_axis <= 0 picks a
/// default based on the dimension count.
OracleResult grid_search(const Instance& instance, int points_per_axis = 0,
                         const GridOptions& options = {});

struct PgOptions {
  long max_iterations = 4000;
  double tolerance = 1e-12;  // relative improvement considered converged
  int threads = 0;
};

/// Projected gradient ascent on the per-slot energies (where the causality
/// constraints are linear), with exact projection onto the per-user budget
/// polytope and a backtracking line search. Returns a feasible point whose
/// objective lower-bounds the optimum.
OracleResult projected_gradient(const Instance& instance, const PgOptions& options = {});

/// Normalized KKT residual of (allocation, multipliers): the worst of the
/// per-slot stationarity residuals (scaled by the user weight), the
/// complementary-slackness products (scaled by the Lagrangian value), and
/// any causality violation (scaled by the user's available energy).
/// Users with no available energy are degenerate and contribute zero.
double kkt_residual(const Instance& instance, const Allocation& allocation, const Grid& mu);

}  // namespace ehmec::oracle

#endif  // EHMEC_ORACLE_HPP_

#include "ehmec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ehmec/parallel.hpp"

namespace ehmec::oracle {

namespace {

constexpr double kLn2 = std::numbers::ln2;

struct Axis {
  int user = 0;
  int slot = 0;
  bool offload = false;
  double lo = 0.0;
  double hi = 0.0;
};

// Evaluates one grid point: returns the weighted objective, or -1 when the
// point violates energy causality.
double evaluate_point(const Instance& instance, const std::vector<Axis>& axes,
                      const std::vector<double>& bits, double tol_j) {
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  // K*N <= 4, so a small dense scratch is fine.
  double local[4 * 4] = {0.0};
  double offload[4 * 4] = {0.0};
  for (size_t i = 0; i < axes.size(); ++i) {
    const Axis& a = axes[i];
    (a.offload ? offload : local)[a.user * N + a.slot] = bits[i];
  }
  double objective = 0.0;
  for (int k = 0; k < K; ++k) {
    double used = 0.0;
    double available = cfg.initial_energy_j[k];
    double user_bits = 0.0;
    for (int n = 0; n < N; ++n) {
      if (n > 0) available += instance.harvest(k, n - 1);
      used += local_energy(local[k * N + n], cfg.capacitance[k], cfg.cycles_per_bit[k],
                           cfg.slot_seconds) +
              offload_energy(offload[k * N + n], instance.channel_gain(k, n), cfg.slot_seconds,
                             cfg.bandwidth_hz, cfg.noise_power_w);
      if (used > available + tol_j) return -1.0;
      user_bits += local[k * N + n] + offload[k * N + n];
    }
    objective += cfg.weight[k] * user_bits;
  }
  return objective;
}

// --- projected gradient pieces -------------------------------------------

struct PgUser {
  int num_slots = 0;
  double tau = 0.0, bandwidth = 0.0, noise = 0.0, omega = 0.0;
  double inv_cbrt_coeff = 0.0;  // (tau^2 / (gamma C^3))^(1/3)
  std::vector<double> gain;
  std::vector<double> budget;  // cumulative available energy per slot
};

double pg_objective(const PgUser& u, const std::vector<double>& e) {
  double bits = 0.0;
  for (int n = 0; n < u.num_slots; ++n) {
    bits += u.inv_cbrt_coeff * std::cbrt(e[2 * n]);
    bits += u.tau * u.bandwidth *
            std::log2(1.0 + e[2 * n + 1] * u.gain[n] / (u.noise * u.tau));
  }
  return u.omega * bits;
}

void pg_gradient(const PgUser& u, const std::vector<double>& e, std::vector<double>& g) {
  const double floor = 1e-15 * (u.budget.back() + 1.0);
  for (int n = 0; n < u.num_slots; ++n) {
    const double el = std::max(e[2 * n], floor);
    g[2 * n] = u.omega * u.inv_cbrt_coeff / 3.0 * std::pow(el, -2.0 / 3.0);
    const double snr = e[2 * n + 1] * u.gain[n] / (u.noise * u.tau);
    g[2 * n + 1] = u.omega * u.bandwidth * u.gain[n] / (u.noise * kLn2) / (1.0 + snr);
  }
}

// Dykstra's alternating projections onto the orthant and the N prefix-sum
// halfspaces; exact for this intersection of convex sets.
void project_chain(const PgUser& u, std::vector<double>& x) {
  const int N = u.num_slots;
  const int dim = 2 * N;
  std::vector<std::vector<double>> increments(N + 1, std::vector<double>(dim, 0.0));
  const double scale = std::max(u.budget.back(), 1e-12);
  const double tol = 1e-13 * scale;
  for (int sweep = 0; sweep < 3000; ++sweep) {
    double change = 0.0;  // largest increment update; Dykstra's stopping signal
    for (int set = 0; set <= N; ++set) {
      std::vector<double>& p = increments[set];
      for (int i = 0; i < dim; ++i) x[i] += p[i];
      if (set == 0) {
        for (int i = 0; i < dim; ++i) {
          const double y = x[i];
          const double proj = std::max(0.0, y);
          change = std::max(change, std::abs((y - proj) - p[i]));
          p[i] = y - proj;
          x[i] = proj;
        }
      } else {
        const int n = set - 1;
        const int active = 2 * (n + 1);
        double sum = 0.0;
        for (int i = 0; i < active; ++i) sum += x[i];
        const double violation = sum - u.budget[n];
        const double shift = violation > 0.0 ? violation / active : 0.0;
        for (int i = 0; i < active; ++i) {
          change = std::max(change, std::abs(shift - p[i]));
          p[i] = shift;
          x[i] -= shift;
        }
        for (int i = active; i < dim; ++i) {
          change = std::max(change, std::abs(p[i]));
          p[i] = 0.0;
        }
      }
    }
    if (change < tol) break;
  }
  // Exact cleanup: clamp and forward-scale so every prefix budget holds.
  for (double& v : x) v = std::max(0.0, v);
  double used = 0.0;
  for (int n = 0; n < N; ++n) {
    double slot = x[2 * n] + x[2 * n + 1];
    const double budget = u.budget[n] - used;
    if (slot > budget) {
      const double s = budget > 0.0 ? budget / slot * (1.0 - 1e-15) : 0.0;
      x[2 * n] *= s;
      x[2 * n + 1] *= s;
      slot = x[2 * n] + x[2 * n + 1];
    }
    used += slot;
  }
}

long pg_solve_user(const PgUser& u, const PgOptions& opts, std::vector<double>& e) {
  const int N = u.num_slots;
  const int dim = 2 * N;
  std::vector<double> g(dim), trial(dim);
  double f = pg_objective(u, e);
  double eta = u.budget.back() / (u.omega + 1.0);
  long iterations = 0;
  int stall = 0;
  for (long it = 0; it < opts.max_iterations; ++it) {
    ++iterations;
    pg_gradient(u, e, g);
    double gnorm_inf = 0.0;
    for (double v : g) gnorm_inf = std::max(gnorm_inf, std::abs(v));
    if (gnorm_inf <= 0.0) break;
    // One trial step never moves further than the budget scale; beyond that
    // the projection dominates and the line search learns nothing.
    const double eta_cap = 0.5 * u.budget.back() / gnorm_inf;
    eta = std::min(eta * 2.0, eta_cap);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = e;
      for (int i = 0; i < dim; ++i) trial[i] += eta * g[i];
      project_chain(u, trial);
      const double f_trial = pg_objective(u, trial);
      double directional = 0.0;
      for (int i = 0; i < dim; ++i) directional += g[i] * (trial[i] - e[i]);
      if (f_trial >= f + 1e-4 * directional && f_trial >= f) {
        const double improvement = f > 0.0 ? (f_trial - f) / f : f_trial;
        e.swap(trial);
        f = f_trial;
        accepted = true;
        stall = improvement < opts.tolerance ? stall + 1 : 0;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted || stall >= 8) break;
  }
  return iterations;
}

}  // namespace

OracleResult grid_search(const Instance& instance, int points_per_axis, const GridOptions& options) {
  validate_instance(instance);
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  if (K * N > 4) {
    throw std::invalid_argument("grid_search: instance has more than 4 decision pairs");
  }

  std::vector<Axis> axes;
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      const double budget = available_energy_through(instance, k, n);
      if (options.restriction != ModeRestriction::kOffloadOnly) {
        axes.push_back({k, n, false, 0.0,
                        local_bits_from_energy(budget, cfg.capacitance[k], cfg.cycles_per_bit[k],
                                               cfg.slot_seconds)});
      }
      if (options.restriction != ModeRestriction::kLocalOnly) {
        axes.push_back({k, n, true, 0.0,
                        offload_bits_from_energy(budget, instance.channel_gain(k, n),
                                                 cfg.slot_seconds, cfg.bandwidth_hz,
                                                 cfg.noise_power_w)});
      }
    }
  }
  const int dims = static_cast<int>(axes.size());
  int points = points_per_axis;
  if (points <= 0) points = dims <= 4 ? 15 : (dims <= 6 ? 9 : 7);

  std::vector<double> upper(dims);
  for (int i = 0; i < dims; ++i) upper[i] = axes[i].hi;

  const int threads = resolve_threads(options.threads);
  std::vector<double> best_bits(dims, 0.0);
  double best_value = 0.0;  // the zero point is always feasible
  long evaluations = 0;

  for (int round = 0; round <= options.refinement_rounds; ++round) {
    std::vector<std::vector<double>> ticks(dims);
    std::uint64_t total = 1;
    for (int i = 0; i < dims; ++i) {
      const Axis& a = axes[i];
      if (a.hi <= a.lo) {
        ticks[i] = {a.lo};
      } else {
        ticks[i].resize(points);
        for (int t = 0; t < points; ++t) {
          ticks[i][t] = a.lo + (a.hi - a.lo) * t / (points - 1);
        }
      }
      total *= ticks[i].size();
    }

    double round_best = -1.0;
    std::uint64_t round_best_idx = 0;
#pragma omp parallel num_threads(threads) if (threads > 1)
    {
      double thread_best = -1.0;
      std::uint64_t thread_best_idx = 0;
      std::vector<double> bits(dims);
#pragma omp for schedule(static)
      for (std::int64_t flat = 0; flat < static_cast<std::int64_t>(total); ++flat) {
        std::uint64_t rest = static_cast<std::uint64_t>(flat);
        for (int i = 0; i < dims; ++i) {
          const std::uint64_t size = ticks[i].size();
          bits[i] = ticks[i][rest % size];
          rest /= size;
        }
        const double value = evaluate_point(instance, axes, bits, kDefaultFeasibilityTolJ);
        if (value > thread_best ||
            (value == thread_best && static_cast<std::uint64_t>(flat) < thread_best_idx)) {
          thread_best = value;
          thread_best_idx = static_cast<std::uint64_t>(flat);
        }
      }
#pragma omp critical
      {
        if (thread_best > round_best ||
            (thread_best == round_best && thread_best_idx < round_best_idx)) {
          round_best = thread_best;
          round_best_idx = thread_best_idx;
        }
      }
    }
    evaluations += static_cast<long>(total);

    if (round_best > best_value) {
      best_value = round_best;
      std::uint64_t rest = round_best_idx;
      for (int i = 0; i < dims; ++i) {
        const std::uint64_t size = ticks[i].size();
        best_bits[i] = ticks[i][rest % size];
        rest /= size;
      }
    }

    // Shrink each axis window around the incumbent for the next round.
    for (int i = 0; i < dims; ++i) {
      Axis& a = axes[i];
      const double width = (a.hi - a.lo) / options.refinement_factor;
      a.lo = std::max(0.0, best_bits[i] - 0.5 * width);
      a.hi = std::min(upper[i], best_bits[i] + 0.5 * width);
    }
  }

  OracleResult result;
  result.method = Method::kGrid;
  result.evaluations = evaluations;
  result.allocation = Allocation{Grid(K, N), Grid(K, N)};
  for (int i = 0; i < dims; ++i) {
    const Axis& a = axes[i];
    (a.offload ? result.allocation.offload_bits : result.allocation.local_bits)(a.user, a.slot) =
        best_bits[i];
  }
  result.objective = weighted_rate(result.allocation, cfg.weight);
  return result;
}

OracleResult projected_gradient(const Instance& instance, const PgOptions& options) {
  validate_instance(instance);
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  const int threads = resolve_threads(options.threads);

  std::vector<std::vector<double>> energies(K);
  std::vector<long> iterations(K, 0);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (int k = 0; k < K; ++k) {
    PgUser u;
    u.num_slots = N;
    u.tau = cfg.slot_seconds;
    u.bandwidth = cfg.bandwidth_hz;
    u.noise = cfg.noise_power_w;
    u.omega = cfg.weight[k];
    const double c = cfg.cycles_per_bit[k];
    u.inv_cbrt_coeff = std::cbrt(u.tau * u.tau / (cfg.capacitance[k] * c * c * c));
    u.gain.assign(instance.channel_gain.row(k).begin(), instance.channel_gain.row(k).end());
    u.budget.resize(N);
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      acc += n == 0 ? cfg.initial_energy_j[k] : instance.harvest(k, n - 1);
      u.budget[n] = acc;
    }

    std::vector<double> e(2 * N, 0.0);
    for (int n = 0; n < N; ++n) {
      const double arrival = n == 0 ? cfg.initial_energy_j[k] : instance.harvest(k, n - 1);
      e[2 * n] = 0.5 * arrival;
      e[2 * n + 1] = 0.5 * arrival;
    }
    if (u.budget.back() > 0.0) iterations[k] = pg_solve_user(u, options, e);
    energies[k] = std::move(e);
  }

  OracleResult result;
  result.method = Method::kProjectedGradient;
  result.allocation = Allocation{Grid(K, N), Grid(K, N)};
  for (int k = 0; k < K; ++k) {
    result.evaluations += iterations[k];
    for (int n = 0; n < N; ++n) {
      result.allocation.local_bits(k, n) = local_bits_from_energy(
          energies[k][2 * n], cfg.capacitance[k], cfg.cycles_per_bit[k], cfg.slot_seconds);
      result.allocation.offload_bits(k, n) =
          offload_bits_from_energy(energies[k][2 * n + 1], instance.channel_gain(k, n),
                                   cfg.slot_seconds, cfg.bandwidth_hz, cfg.noise_power_w);
    }
  }
  result.objective = weighted_rate(result.allocation, cfg.weight);
  return result;
}

double kkt_residual(const Instance& instance, const Allocation& allocation, const Grid& mu) {
  validate_instance(instance);
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  if (mu.rows() != K || mu.cols() != N) {
    throw std::invalid_argument("kkt_residual: multiplier shape mismatch");
  }

  const FeasibilityReport feas = causality_slack(instance, allocation);

  // Lagrangian value at the point, used to scale the complementary-slackness
  // products; model arithmetic only.
  double lagrangian = weighted_rate(allocation, cfg.weight);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) lagrangian += mu(k, n) * feas.slack(k, n);
  }
  const double value_scale = std::max(1.0, std::abs(lagrangian));

  double residual = 0.0;
  for (int k = 0; k < K; ++k) {
    const double available = total_available_energy(instance, k);
    if (available <= 1e-30) continue;  // degenerate user, no meaningful KKT system
    const double omega = cfg.weight[k];
    const double c = cfg.cycles_per_bit[k];
    const double gamma_c3 = cfg.capacitance[k] * c * c * c;
    const double tau = cfg.slot_seconds;
    double tail = 0.0;
    std::vector<double> tails(N);
    for (int n = N - 1; n >= 0; --n) {
      tail += mu(k, n);
      tails[n] = tail;
    }
    for (int n = 0; n < N; ++n) {
      const double m = tails[n];
      const double bl = allocation.local_bits(k, n);
      const double bo = allocation.offload_bits(k, n);
      const double budget = available_energy_through(instance, k, n);
      if (budget > 0.0) {
        double stat_local;
        if (bl > 0.0) {
          stat_local = std::abs(omega - 3.0 * m * gamma_c3 * bl * bl / (tau * tau)) / omega;
        } else {
          stat_local = 1.0;  // interior marginal is omega at zero local bits
        }
        const double marginal_off = m * cfg.noise_power_w * kLn2 /
                                    (instance.channel_gain(k, n) * cfg.bandwidth_hz) *
                                    std::exp2(bo / (tau * cfg.bandwidth_hz));
        const double stat_off = bo > 0.0 ? std::abs(omega - marginal_off) / omega
                                         : std::max(0.0, omega - marginal_off) / omega;
        residual = std::max(residual, std::max(stat_local, stat_off));
      }
      residual = std::max(residual, std::abs(mu(k, n) * feas.slack(k, n)) / value_scale);
      residual = std::max(residual, std::max(0.0, -feas.slack(k, n)) / std::max(available, 1e-12));
    }
  }
  return residual;
}

}  // namespace ehmec::oracle

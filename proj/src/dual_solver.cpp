#include "ehmec/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ehmec/parallel.hpp"

namespace ehmec::dual {

namespace {

constexpr double kLn2 = std::numbers::ln2;

// Budgets this small are treated as exactly zero; far below any physical
// energy scale, and it keeps 1/E^2 expressions inside double range.
constexpr double kEnergyEpsilonJ = 1e-30;

// Per-user slice of an instance; the subproblems separate completely over
// users, so the whole solver below works on one of these at a time.
struct UserView {
  int num_slots = 0;
  double tau = 0.0;
  double bandwidth = 0.0;
  double noise = 0.0;
  double omega = 0.0;
  double gamma_c3 = 0.0;            // gamma * C^3
  std::vector<double> gain;          // N
  std::vector<double> arrival;       // N; arrival[0] = E_{k,0}, arrival[n] = harvest(k, n-1)
  std::vector<double> cum_available; // N; prefix sums of arrival
  double total_available = 0.0;

  bool allow_local = true;
  bool allow_offload = true;
};

UserView make_user_view(const Instance& instance, int k, ModeRestriction restriction) {
  const SystemConfig& cfg = instance.config;
  UserView u;
  u.num_slots = cfg.num_slots;
  u.tau = cfg.slot_seconds;
  u.bandwidth = cfg.bandwidth_hz;
  u.noise = cfg.noise_power_w;
  u.omega = cfg.weight[k];
  const double c = cfg.cycles_per_bit[k];
  u.gamma_c3 = cfg.capacitance[k] * c * c * c;
  u.gain.assign(instance.channel_gain.row(k).begin(), instance.channel_gain.row(k).end());
  u.arrival.resize(cfg.num_slots);
  u.arrival[0] = cfg.initial_energy_j[k];
  for (int n = 1; n < cfg.num_slots; ++n) u.arrival[n] = instance.harvest(k, n - 1);
  u.cum_available.resize(cfg.num_slots);
  double acc = 0.0;
  for (int n = 0; n < cfg.num_slots; ++n) {
    acc += u.arrival[n];
    u.cum_available[n] = acc;
  }
  u.total_available = acc;
  u.allow_local = restriction != ModeRestriction::kOffloadOnly;
  u.allow_offload = restriction != ModeRestriction::kLocalOnly;
  return u;
}

// Closed-form slot allocation at energy price m > 0, with its energy use and
// its contribution to the dual objective (omega * bits - m * energy).
struct SlotPoint {
  double local_bits = 0.0;
  double offload_bits = 0.0;
  double energy = 0.0;
  double dual_term = 0.0;
};

SlotPoint slot_point(const UserView& u, int n, double price) {
  SlotPoint p;
  if (u.allow_local) {
    const double bits = std::sqrt(u.omega * u.tau * u.tau / (3.0 * price * u.gamma_c3));
    const double energy = u.gamma_c3 * bits * bits * bits / (u.tau * u.tau);
    p.local_bits = bits;
    p.energy += energy;
    p.dual_term += u.omega * bits - price * energy;
  }
  if (u.allow_offload) {
    const double x = u.omega * u.bandwidth * u.gain[n] / (price * u.noise * kLn2);
    if (x > 1.0) {
      const double bits = u.tau * u.bandwidth * std::log2(x);
      const double energy = u.noise * u.tau / u.gain[n] * (x - 1.0);
      p.offload_bits = bits;
      p.energy += energy;
      p.dual_term += u.omega * bits - price * energy;
    }
  }
  return p;
}

double slot_energy_at_price(const UserView& u, int n, double price) {
  return slot_point(u, n, price).energy;
}

// Dual objective constants: sum_n mu[n] * E_{k,0} + sum_j harvest[j] * tail[j+1].
double dual_constants(const UserView& u, std::span<const double> mu, std::span<const double> tail) {
  double mu_sum = 0.0;
  for (int n = 0; n < u.num_slots; ++n) mu_sum += mu[n];
  double value = u.arrival[0] * mu_sum;
  for (int n = 1; n < u.num_slots; ++n) value += u.arrival[n] * tail[n];
  return value;
}

void tails_from_mu(std::span<const double> mu, std::span<double> tail) {
  const int n_slots = static_cast<int>(mu.size());
  double acc = 0.0;
  for (int n = n_slots - 1; n >= 0; --n) {
    acc += mu[n];
    tail[n] = acc;
  }
}

struct UserEvaluation {
  double dual_value = 0.0;
  std::vector<double> slack;  // gradient components, Joules
};

UserEvaluation evaluate_user(const UserView& u, std::span<const double> mu,
                             std::span<const double> tail) {
  UserEvaluation ev;
  ev.slack.resize(u.num_slots);
  double used = 0.0;
  double dual = 0.0;
  for (int n = 0; n < u.num_slots; ++n) {
    const SlotPoint p = slot_point(u, n, tail[n]);
    used += p.energy;
    dual += p.dual_term;
    ev.slack[n] = u.cum_available[n] - used;
  }
  ev.dual_value = dual + dual_constants(u, mu, tail);
  return ev;
}

struct PolishedPrimal {
  std::vector<double> local_bits;
  std::vector<double> offload_bits;
  std::vector<double> prices;  // effective per-slot tails behind the point
  double weighted_bits = 0.0;
};

// Price for which the slots [first, last] jointly spend exactly `budget`,
// found by geometric bisection from the feasible (underspending) side.
bool bisect_segment_price(const UserView& u, int first, int last, double budget, double seed,
                          double* price_out) {
  if (!(budget > 0.0)) return false;
  auto segment_energy = [&](double m) {
    double e = 0.0;
    for (int n = first; n <= last; ++n) e += slot_energy_at_price(u, n, m);
    return e;
  };
  double lo = seed > 0.0 ? seed : 1.0;
  double hi = lo;
  if (segment_energy(lo) > budget) {
    while (hi < 1e300 && segment_energy(hi) > budget) hi *= 8.0;
    if (hi >= 1e300) return false;
    lo = hi / 8.0;
  } else {
    while (lo > 1e-300 && segment_energy(lo) < budget) lo /= 8.0;
    if (lo <= 1e-300) return false;
    hi = lo * 8.0;
  }
  for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-15; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (segment_energy(mid) <= budget) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  *price_out = hi;
  return true;
}

// Exact staircase refinement on a guessed active set: constant price per
// segment chosen so each segment spends its budget exactly, merged where the
// price would increase over time (pool-adjacent-violators) and split where an
// interior slot would overdraw. Returns false when the structure degenerates
// (zero segment budgets), in which case the caller keeps the scaled point.
bool refine_staircase(const UserView& u, std::vector<char> active, std::vector<double>* prices_out) {
  const int N = u.num_slots;
  active[N - 1] = 1;

  struct Segment {
    int first = 0;
    int last = 0;
    double price = 0.0;
  };

  for (int round = 0; round <= N; ++round) {
    std::vector<Segment> segments;
    for (int end = 0; end < N; ++end) {
      if (!active[end]) continue;
      Segment seg;
      seg.first = segments.empty() ? 0 : segments.back().last + 1;
      seg.last = end;
      const double base =
          segments.empty() ? 0.0 : u.cum_available[segments.back().last];
      if (!bisect_segment_price(u, seg.first, seg.last, u.cum_available[end] - base,
                                segments.empty() ? 1.0 : segments.back().price, &seg.price)) {
        return false;
      }
      segments.push_back(seg);
      // Merge while the price would increase over time.
      while (segments.size() >= 2 &&
             segments[segments.size() - 2].price < segments.back().price) {
        Segment merged;
        merged.first = segments[segments.size() - 2].first;
        merged.last = segments.back().last;
        const double merged_base =
            segments.size() >= 3 ? u.cum_available[segments[segments.size() - 3].last] : 0.0;
        if (!bisect_segment_price(u, merged.first, merged.last,
                                  u.cum_available[merged.last] - merged_base,
                                  segments.back().price, &merged.price)) {
          return false;
        }
        segments.pop_back();
        segments.pop_back();
        segments.push_back(merged);
      }
    }

    std::vector<double> prices(N);
    for (const Segment& seg : segments) {
      for (int n = seg.first; n <= seg.last; ++n) prices[n] = seg.price;
    }

    // Interior causality check; a violated slot becomes active and the
    // structure is rebuilt.
    double spent = 0.0;
    int violated = -1;
    const double tolerance = 1e-12 * std::max(u.total_available, 1.0);
    for (int n = 0; n < N && violated < 0; ++n) {
      spent += slot_energy_at_price(u, n, prices[n]);
      if (spent > u.cum_available[n] + tolerance) violated = n;
    }
    if (violated < 0) {
      *prices_out = std::move(prices);
      return true;
    }
    active[violated] = 1;
  }
  return false;
}

// Scales a user's whole price profile by a common factor until the induced
// allocation is exactly feasible (smallest slack zero), then tops up the
// final slot so it exhausts the remaining budget. Both searches are plain
// bisections; the returned point keeps the closed-form structure, so its
// per-slot bits stay stationary for the returned prices and, under constant
// gains, nondecreasing over slots.
PolishedPrimal polish_primal(const UserView& u, std::span<const double> tail) {
  const int N = u.num_slots;
  PolishedPrimal out;
  out.local_bits.assign(N, 0.0);
  out.offload_bits.assign(N, 0.0);
  out.prices.assign(N, 1.0);

  auto min_slack = [&](double beta) {
    double used = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    for (int n = 0; n < N; ++n) {
      used += slot_energy_at_price(u, n, beta * tail[n]);
      worst = std::min(worst, u.cum_available[n] - used);
    }
    return worst;
  };

  // Bracket the feasibility boundary in the scale factor.
  double hi = 1.0;
  double lo = 1.0;
  bool bracketed = false;
  if (min_slack(1.0) >= 0.0) {
    while (lo > 1e-18) {
      const double next = lo * 0.5;
      if (min_slack(next) < 0.0) {
        lo = next;
        bracketed = true;
        break;
      }
      lo = next;
    }
    if (!bracketed) hi = lo;  // feasible all the way down; use the largest allocation probed
  } else {
    while (hi < 1e18) {
      hi *= 2.0;
      if (min_slack(hi) >= 0.0) {
        lo = hi * 0.5;
        bracketed = true;
        break;
      }
    }
  }
  if (bracketed) {
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-15; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (min_slack(mid) >= 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
  }
  // `hi` is feasible whenever a boundary exists; if the price profile cannot
  // be made feasible by scaling (a slot with zero budget forces local bits
  // positive), fall back to per-slot repair of the capped point below.
  const double beta = hi;
  double used = 0.0;
  std::vector<double> slack(N, 0.0);
  for (int n = 0; n < N; ++n) {
    const double price = beta * tail[n];
    SlotPoint p = slot_point(u, n, price);
    const double budget = u.cum_available[n] - used;
    if (p.energy > budget) {
      // Largest common bit scale that fits the remaining budget.
      double s_lo = 0.0, s_hi = 1.0;
      auto scaled_energy = [&](double s) {
        double e = 0.0;
        if (p.local_bits > 0.0) {
          const double b = s * p.local_bits;
          e += u.gamma_c3 * b * b * b / (u.tau * u.tau);
        }
        if (p.offload_bits > 0.0) {
          const double b = s * p.offload_bits;
          e += u.noise * u.tau / u.gain[n] * std::expm1(b / (u.tau * u.bandwidth) * kLn2);
        }
        return e;
      };
      if (budget <= 0.0) {
        s_lo = 0.0;
      } else {
        for (int it = 0; it < 100; ++it) {
          const double s = 0.5 * (s_lo + s_hi);
          if (scaled_energy(s) <= budget) {
            s_lo = s;
          } else {
            s_hi = s;
          }
        }
      }
      p.local_bits *= s_lo;
      p.offload_bits *= s_lo;
      p.energy = scaled_energy(s_lo);
    }
    out.local_bits[n] = p.local_bits;
    out.offload_bits[n] = p.offload_bits;
    out.prices[n] = price;
    used += p.energy;
    slack[n] = u.cum_available[n] - used;
  }

  // Final-slot top-up: spend whatever budget is still unspent at slot N.
  const double remaining = u.total_available - used;
  const double last_energy = slot_point(u, N - 1, out.prices[N - 1]).energy;
  const double target = last_energy + std::max(0.0, remaining);
  if (target > 0.0 && remaining > 0.0) {
    double m_hi = out.prices[N - 1];  // energy(m_hi) <= target
    double m_lo = m_hi;
    while (m_lo > 1e-300 && slot_energy_at_price(u, N - 1, m_lo) < target) m_lo *= 0.5;
    for (int it = 0; it < 200 && m_hi / m_lo > 1.0 + 1e-15; ++it) {
      const double mid = std::sqrt(m_lo * m_hi);
      if (slot_energy_at_price(u, N - 1, mid) <= target) {
        m_hi = mid;
      } else {
        m_lo = mid;
      }
    }
    const SlotPoint p = slot_point(u, N - 1, m_hi);
    const double prev_last = out.local_bits[N - 1] + out.offload_bits[N - 1];
    const double new_last = p.local_bits + p.offload_bits;
    if (new_last >= prev_last) {  // never give bits back
      out.local_bits[N - 1] = p.local_bits;
      out.offload_bits[N - 1] = p.offload_bits;
      out.prices[N - 1] = m_hi;
    }
  }

  double bits = 0.0;
  for (int n = 0; n < N; ++n) bits += out.local_bits[n] + out.offload_bits[n];
  out.weighted_bits = u.omega * bits;

  // Active-set refinement: read the (near-)active constraints off the scaled
  // point and solve the exact staircase on them. Keeps the better point.
  std::vector<char> active(N, 0);
  for (int n = 0; n < N; ++n) {
    active[n] = slack[n] <= 1e-5 * std::max(u.cum_available[n], 1e-12) ? 1 : 0;
  }
  std::vector<double> refined_prices;
  if (refine_staircase(u, active, &refined_prices)) {
    PolishedPrimal refined;
    refined.local_bits.resize(N);
    refined.offload_bits.resize(N);
    refined.prices = refined_prices;
    double refined_bits = 0.0;
    for (int n = 0; n < N; ++n) {
      const SlotPoint p = slot_point(u, n, refined_prices[n]);
      refined.local_bits[n] = p.local_bits;
      refined.offload_bits[n] = p.offload_bits;
      refined_bits += p.local_bits + p.offload_bits;
    }
    refined.weighted_bits = u.omega * refined_bits;
    if (refined.weighted_bits >= out.weighted_bits) return refined;
  }
  return out;
}

struct UserSolveResult {
  std::vector<double> local_bits;
  std::vector<double> offload_bits;
  std::vector<double> mu;  // polished multipliers consistent with the allocation
  double primal_value = 0.0;
  double dual_value = 0.0;
  long iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

UserSolveResult solve_user(const UserView& u, const SolveOptions& opts) {
  const int N = u.num_slots;
  UserSolveResult result;
  result.local_bits.assign(N, 0.0);
  result.offload_bits.assign(N, 0.0);
  result.mu.assign(N, 0.0);

  if (u.total_available <= kEnergyEpsilonJ) {
    // Nothing can ever be spent; the optimum is identically zero and the
    // dual infimum (not attained) is zero as well.
    result.converged = true;
    result.trace.push_back(0.0);
    return result;
  }

  const double mu_floor =
      opts.mu_floor_factor * u.omega * u.tau * u.tau / (u.total_available * u.total_available);

  // Energy-matched uniform initialization: one bisection on the common
  // multiplier level so the induced allocation spends about the whole budget.
  auto uniform_energy = [&](double m) {
    double used = 0.0;
    for (int n = 0; n < N; ++n) used += slot_energy_at_price(u, n, (N - n) * m);
    return used;
  };
  double m_lo = 1.0, m_hi = 1.0;
  {
    const double e1 = uniform_energy(1.0);
    if (e1 > u.total_available) {
      while (m_hi < 1e300 && uniform_energy(m_hi) > u.total_available) m_hi *= 16.0;
      m_lo = m_hi / 16.0;
    } else {
      while (m_lo > 1e-300 && uniform_energy(m_lo) < u.total_available) m_lo /= 16.0;
      m_hi = m_lo * 16.0;
    }
    for (int it = 0; it < 120 && m_hi / m_lo > 1.0 + 1e-12; ++it) {
      const double mid = std::sqrt(m_lo * m_hi);
      if (uniform_energy(mid) > u.total_available) {
        m_lo = mid;
      } else {
        m_hi = mid;
      }
    }
  }
  const double m_init = std::max(std::sqrt(m_lo * m_hi), mu_floor);

  double eta0 = opts.step_scale;
  switch (opts.step_scaling) {
    case StepScaling::kNone:
      break;
    case StepScaling::kInverseEnergySquared:
      eta0 /= u.total_available * u.total_available;
      break;
    case StepScaling::kAuto:
      eta0 *= m_init / u.total_available;
      break;
  }

  std::vector<double> mu(N, m_init);
  mu[N - 1] = std::max(m_init, mu_floor);
  std::vector<double> tail(N);
  tails_from_mu(mu, tail);

  std::vector<double> best_mu = mu;
  std::vector<double> best_tail = tail;
  double best_dual = std::numeric_limits<double>::infinity();
  double best_feasible = 0.0;
  double previous_dual = std::numeric_limits<double>::quiet_NaN();
  bool have_feasible_probe = false;

  PolishedPrimal best_primal;
  std::vector<double> probe_mu(N), probe_tail(N);
  auto certified_gap = [&]() {
    PolishedPrimal probe = polish_primal(u, best_tail);
    // The polished prices are themselves a dual-feasible point (nonnegative
    // multipliers via nonincreasing prices); evaluating the dual there often
    // tightens the bound far beyond the current iterate.
    for (int n = 0; n < N; ++n) {
      const double next = n + 1 < N ? probe.prices[n + 1] : 0.0;
      probe_mu[n] = std::max(0.0, probe.prices[n] - next);
    }
    probe_mu[N - 1] = std::max(probe_mu[N - 1], mu_floor);
    tails_from_mu(probe_mu, probe_tail);
    const double probe_dual = evaluate_user(u, probe_mu, probe_tail).dual_value;
    if (probe_dual < best_dual) {
      best_dual = probe_dual;
      best_mu = probe_mu;
      best_tail = probe_tail;
    }
    if (probe.weighted_bits > best_feasible) {
      best_feasible = probe.weighted_bits;
      best_primal = std::move(probe);
    }
    have_feasible_probe = true;
    return (best_dual - best_feasible) / std::max(1.0, best_dual);
  };

  // When the dual-change rule fires before the gap certificate is met, the
  // schedule restarts from the best iterate with a step scale matched to the
  // remaining gap (Polyak estimate from the certified feasible value); each
  // phase runs the plain eta0 / q schedule.
  double eta0_phase = eta0;
  long phase_q = 0;

  long q = 0;
  while (q < opts.max_iterations) {
    ++q;
    ++phase_q;
    const UserEvaluation ev = evaluate_user(u, mu, tail);
    if (opts.record_trace) result.trace.push_back(ev.dual_value);
    if (ev.dual_value < best_dual) {
      best_dual = ev.dual_value;
      best_mu = mu;
      best_tail = tail;
    }

    double gradient_norm2 = 0.0;
    double gradient_norm_inf = 0.0;
    for (double g : ev.slack) {
      gradient_norm2 += g * g;
      gradient_norm_inf = std::max(gradient_norm_inf, std::abs(g));
    }

    // Paper stopping rule: relative change between consecutive dual values.
    if (phase_q >= 2) {
      const double denom = std::max(std::abs(ev.dual_value), 1e-300);
      if (std::abs(ev.dual_value - previous_dual) / denom < opts.epsilon) {
        if (certified_gap() <= std::max(opts.gap_exit, opts.converged_gap)) {
          result.converged = true;
          break;
        }
        // Restart scale: Polyak estimate from the certified feasible value,
        // trust-capped so one step cannot move the multipliers by more than
        // a fraction of their own scale.
        if (gradient_norm2 > 0.0 && gradient_norm_inf > 0.0) {
          const double polyak = (best_dual - best_feasible) / gradient_norm2;
          double mu_scale = 0.0;
          for (double t : best_tail) mu_scale = std::max(mu_scale, t);
          const double trust = 0.25 * mu_scale / (N * gradient_norm_inf);
          eta0_phase = std::clamp(std::min(polyak, trust), 1e-12 * eta0, 1e12 * eta0);
        }
        phase_q = 0;
        mu = best_mu;
        tail = best_tail;
        previous_dual = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
    }
    previous_dual = ev.dual_value;

    // Feasible-primal probe: early exit once the certified gap is small.
    const bool probe_now = (q % std::max(1, opts.gap_check_interval) == 0) ||
                           (opts.step_rule == StepRule::kPolyak && !have_feasible_probe);
    if (probe_now && certified_gap() <= opts.gap_exit) {
      result.converged = true;
      break;
    }

    double eta = 0.0;
    switch (opts.step_rule) {
      case StepRule::kDiminishing:
        eta = eta0_phase / static_cast<double>(phase_q);
        break;
      case StepRule::kConstant:
        eta = eta0_phase;
        break;
      case StepRule::kPolyak: {
        if (gradient_norm2 <= 0.0) {
          result.converged = true;
        } else {
          eta = opts.step_scale * std::max(0.0, ev.dual_value - best_feasible) / gradient_norm2;
        }
        break;
      }
    }
    if (result.converged) break;

    // Movement cap: one step never moves a multiplier by more than a
    // fraction of the current price scale, which keeps restarted phases from
    // oscillating divergently when the local curvature is high.
    if (gradient_norm_inf > 0.0) {
      const double cap = 0.25 * std::max(tail[0], mu_floor) / N;
      eta = std::min(eta, cap / gradient_norm_inf);
    }

    for (int n = 0; n < N; ++n) mu[n] = std::max(0.0, mu[n] - eta * ev.slack[n]);
    mu[N - 1] = std::max(mu[N - 1], mu_floor);
    tails_from_mu(mu, tail);
  }
  result.iterations = q;

  // Final extraction: best polished feasible point seen (the last probe wins
  // ties toward the final multipliers).
  {
    PolishedPrimal last = polish_primal(u, best_tail);
    if (!have_feasible_probe || last.weighted_bits >= best_feasible) {
      best_primal = std::move(last);
      best_feasible = best_primal.weighted_bits;
    }
  }
  const PolishedPrimal& final_primal = best_primal;
  result.local_bits = final_primal.local_bits;
  result.offload_bits = final_primal.offload_bits;
  result.primal_value = final_primal.weighted_bits;
  result.dual_value = best_dual;
  // Multipliers consistent with the polished prices (non-negative because the
  // polished prices stay nonincreasing over slots).
  for (int n = 0; n < N; ++n) {
    const double next = (n + 1 < N) ? final_primal.prices[n + 1] : 0.0;
    result.mu[n] = std::max(0.0, final_primal.prices[n] - next);
  }
  return result;
}

void check_valid_dual(const Instance& instance, const DualState& dual) {
  const int K = instance.config.num_users;
  const int N = instance.config.num_slots;
  if (dual.mu.rows() != K || dual.mu.cols() != N || dual.tail.rows() != K || dual.tail.cols() != N) {
    throw std::invalid_argument("dual state shape does not match instance");
  }
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      if (!(dual.mu(k, n) >= 0.0)) throw std::invalid_argument("multipliers must be non-negative");
      if (!(dual.tail(k, n) > 0.0)) {
        throw std::invalid_argument("invalid dual: tail sum must be positive everywhere");
      }
    }
  }
}

}  // namespace

DualState DualState::from_mu(Grid mu_values) {
  DualState state;
  state.mu = std::move(mu_values);
  state.recompute_tail();
  return state;
}

void DualState::recompute_tail() {
  tail = Grid(mu.rows(), mu.cols());
  for (int k = 0; k < mu.rows(); ++k) {
    double acc = 0.0;
    for (int n = mu.cols() - 1; n >= 0; --n) {
      acc += mu(k, n);
      tail(k, n) = acc;
    }
  }
}

Allocation primal_from_dual(const Instance& instance, const DualState& dual,
                            ModeRestriction restriction) {
  validate_instance(instance);
  check_valid_dual(instance, dual);
  const int K = instance.config.num_users;
  const int N = instance.config.num_slots;
  Allocation allocation{Grid(K, N), Grid(K, N)};
  for (int k = 0; k < K; ++k) {
    const UserView u = make_user_view(instance, k, restriction);
    for (int n = 0; n < N; ++n) {
      const SlotPoint p = slot_point(u, n, dual.tail(k, n));
      allocation.local_bits(k, n) = p.local_bits;
      allocation.offload_bits(k, n) = p.offload_bits;
    }
  }
  return allocation;
}

double dual_function(const Instance& instance, const DualState& dual, ModeRestriction restriction) {
  validate_instance(instance);
  check_valid_dual(instance, dual);
  double value = 0.0;
  for (int k = 0; k < instance.config.num_users; ++k) {
    const UserView u = make_user_view(instance, k, restriction);
    std::vector<double> mu(dual.mu.row(k).begin(), dual.mu.row(k).end());
    std::vector<double> tail(dual.tail.row(k).begin(), dual.tail.row(k).end());
    value += evaluate_user(u, mu, tail).dual_value;
  }
  return value;
}

Grid dual_gradient(const Instance& instance, const DualState& dual, ModeRestriction restriction) {
  const Allocation allocation = primal_from_dual(instance, dual, restriction);
  return causality_slack(instance, allocation).slack;
}

Allocation feasibility_repair(const Instance& instance, const Allocation& allocation) {
  validate_instance(instance);
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  if (allocation.local_bits.rows() != K || allocation.local_bits.cols() != N ||
      allocation.offload_bits.rows() != K || allocation.offload_bits.cols() != N) {
    throw std::invalid_argument("allocation shape does not match instance");
  }

  Allocation repaired = allocation;
  for (int k = 0; k < K; ++k) {
    double available = cfg.initial_energy_j[k];
    double used = 0.0;
    for (int n = 0; n < N; ++n) {
      if (n > 0) available += instance.harvest(k, n - 1);
      const double bl = repaired.local_bits(k, n);
      const double bo = repaired.offload_bits(k, n);
      auto energy_at = [&](double scale) {
        return local_energy(scale * bl, cfg.capacitance[k], cfg.cycles_per_bit[k], cfg.slot_seconds) +
               offload_energy(scale * bo, instance.channel_gain(k, n), cfg.slot_seconds,
                              cfg.bandwidth_hz, cfg.noise_power_w);
      };
      const double budget = available - used;
      double energy = energy_at(1.0);
      if (energy > budget) {
        double s_lo = 0.0, s_hi = 1.0;
        if (budget > 0.0) {
          for (int it = 0; it < 100; ++it) {
            const double s = 0.5 * (s_lo + s_hi);
            if (energy_at(s) <= budget) {
              s_lo = s;
            } else {
              s_hi = s;
            }
          }
        }
        repaired.local_bits(k, n) = s_lo * bl;
        repaired.offload_bits(k, n) = s_lo * bo;
        energy = energy_at(s_lo);
      }
      used += energy;
    }
  }
  return repaired;
}

double duality_gap(double primal_value, double dual_value) {
  return (dual_value - primal_value) / std::max(1.0, dual_value);
}

SolveReport solve(const Instance& instance, const SolveOptions& options) {
  validate_instance(instance);
  const int K = instance.config.num_users;
  const int N = instance.config.num_slots;
  const int threads = resolve_threads(options.threads);

  std::vector<UserSolveResult> users(K);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (int k = 0; k < K; ++k) {
    try {
      users[k] = solve_user(make_user_view(instance, k, options.restriction), options);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  SolveReport report;
  report.allocation = Allocation{Grid(K, N), Grid(K, N)};
  Grid mu(K, N);
  report.converged = true;
  for (int k = 0; k < K; ++k) {
    const UserSolveResult& r = users[k];
    for (int n = 0; n < N; ++n) {
      report.allocation.local_bits(k, n) = r.local_bits[n];
      report.allocation.offload_bits(k, n) = r.offload_bits[n];
      mu(k, n) = r.mu[n];
    }
    report.dual_value += r.dual_value;
    report.iterations = std::max(report.iterations, r.iterations);
    report.converged = report.converged && r.converged;
  }

  // The reported allocation is already feasible by construction; the repair
  // pass is kept as a hard guarantee and is the identity in practice.
  report.allocation = feasibility_repair(instance, report.allocation);
  report.primal_value = weighted_rate(report.allocation, instance.config.weight);
  report.relative_gap = duality_gap(report.primal_value, report.dual_value);
  report.final_dual = DualState::from_mu(std::move(mu));
  report.feasibility = causality_slack(instance, report.allocation);

  if (options.record_trace) {
    size_t longest = 0;
    for (const auto& r : users) longest = std::max(longest, r.trace.size());
    report.dual_trace.assign(longest, 0.0);
    for (const auto& r : users) {
      for (size_t q = 0; q < longest; ++q) {
        const double v = r.trace.empty() ? 0.0 : (q < r.trace.size() ? r.trace[q] : r.trace.back());
        report.dual_trace[q] += v;
      }
    }
  }
  return report;
}

}  // namespace ehmec::dual

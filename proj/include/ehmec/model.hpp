#ifndef EHMEC_MODEL_HPP_
#define EHMEC_MODEL_HPP_

#include <cstddef>
#include <span>
#include <vector>

// Physical model of a multiuser energy-harvesting MEC system: per-slot
// energy costs of local computing and uplink offloading, energy-causality
// feasibility, and the weighted computation-rate objective. All quantities
// are SI (Joules, seconds, Hz, Watts); channel gains are dimensionless.
namespace ehmec {

// Dense row-major K x N matrix of doubles. Row = user, column = slot.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, value) {}

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  std::span<double> row(int r) { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Static problem parameters shared by all decision variables.
struct SystemConfig {
  int num_users = 0;            // K
  int num_slots = 0;            // N
  double slot_seconds = 0.0;    // tau = T / N
  double bandwidth_hz = 0.0;    // B
  double noise_power_w = 0.0;   // sigma0^2 at the AP receiver
  // Per-user arrays, each of length K.
  std::vector<double> weight;            // omega_k > 0
  std::vector<double> capacitance;       // gamma_k, effective switched capacitance
  std::vector<double> cycles_per_bit;    // C_k
  std::vector<double> initial_energy_j;  // E_{k,0} >= 0, stored before slot 1
};

/// A concrete problem instance: config plus the CSI/ESI profiles.
///
/// harvest(k, j) is the energy that arrives while slot j runs and becomes
/// usable from slot j+1 on (0-based slots, so harvest has N-1 columns);
/// initial_energy_j is usable from slot 0.
struct Instance {
  SystemConfig config;
  Grid channel_gain;  // K x N, strictly positive power gains
  Grid harvest;       // K x (N-1), non-negative Joules
};

/// Decision variables: task input-bits per user per slot, one matrix per mode.
struct Allocation {
  Grid local_bits;    // K x N
  Grid offload_bits;  // K x N

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Energy-causality slacks: available minus consumed energy through each slot.
struct FeasibilityReport {
  Grid slack;                    // K x N, Joules; negative = violation
  bool feasible = false;         // min slack >= -tolerance
  double worst_violation = 0.0;  // max(0, -min slack), Joules
};

/// Which execution modes an allocation may use. The restricted variants give
/// the single-mode comparison schemes.
enum class ModeRestriction { kBoth, kLocalOnly, kOffloadOnly };

inline constexpr double kDefaultFeasibilityTolJ = 1e-9;

/// Energy used by local computing of `bits` task input-bits in one slot
/// (DVFS model, cubic in bits): gamma * C^3 * bits^3 / tau^2.
double local_energy(double bits, double capacitance, double cycles_per_bit, double slot_seconds);

/// Energy used to offload `bits` within one slot over a channel with power
/// gain h: (sigma^2 tau / h) * (2^(bits / (tau B)) - 1).
double offload_energy(double bits, double channel_gain, double slot_seconds, double bandwidth_hz,
                      double noise_power_w);

/// Inverse of local_energy: bits computable with energy E in one slot.
double local_bits_from_energy(double energy_j, double capacitance, double cycles_per_bit,
                              double slot_seconds);

/// Inverse of offload_energy: bits transmittable with energy E in one slot.
double offload_bits_from_energy(double energy_j, double channel_gain, double slot_seconds,
                                double bandwidth_hz, double noise_power_w);

/// Per-slot causality slacks of an allocation:
///   slack(k, n) = E_{k,0} + sum_{j<n} harvest(k, j) - sum_{j<=n} energy used in slot j.
FeasibilityReport causality_slack(const Instance& instance, const Allocation& allocation,
                                  double tolerance_j = kDefaultFeasibilityTolJ);

/// Objective of the rate-maximization problem: sum_k sum_n w_k (l_loc + l_off).
double weighted_rate(const Allocation& allocation, std::span<const double> weights);

/// Total energy a user can draw through 0-based slot `slot` inclusive.
double available_energy_through(const Instance& instance, int user, int slot);

/// Total energy available to a user over the whole horizon.
double total_available_energy(const Instance& instance, int user);

/// Throws std::invalid_argument with a description if the instance violates
/// the model invariants (shapes, positivity, non-negative harvest).
void validate_instance(const Instance& instance);

}  // namespace ehmec

#endif  // EHMEC_MODEL_HPP_

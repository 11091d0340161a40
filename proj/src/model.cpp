#include "ehmec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ehmec {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(name) + " must be positive and finite");
  }
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(name) + " must be non-negative and finite");
  }
}

}  // namespace

double local_energy(double bits, double capacitance, double cycles_per_bit, double slot_seconds) {
  require_non_negative(bits, "bits");
  require_positive(capacitance, "capacitance");
  require_positive(cycles_per_bit, "cycles_per_bit");
  require_positive(slot_seconds, "slot_seconds");
  const double cycles = cycles_per_bit * bits;
  return capacitance * cycles * cycles * cycles / (slot_seconds * slot_seconds);
}

double offload_energy(double bits, double channel_gain, double slot_seconds, double bandwidth_hz,
                      double noise_power_w) {
  require_non_negative(bits, "bits");
  require_positive(channel_gain, "channel_gain");
  require_positive(slot_seconds, "slot_seconds");
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(noise_power_w, "noise_power_w");
  const double exponent = bits / (slot_seconds * bandwidth_hz);
  return noise_power_w * slot_seconds / channel_gain * std::expm1(exponent * std::numbers::ln2);
}

double local_bits_from_energy(double energy_j, double capacitance, double cycles_per_bit,
                              double slot_seconds) {
  require_non_negative(energy_j, "energy_j");
  require_positive(capacitance, "capacitance");
  require_positive(cycles_per_bit, "cycles_per_bit");
  require_positive(slot_seconds, "slot_seconds");
  const double c3 = cycles_per_bit * cycles_per_bit * cycles_per_bit;
  return std::cbrt(energy_j * slot_seconds * slot_seconds / (capacitance * c3));
}

double offload_bits_from_energy(double energy_j, double channel_gain, double slot_seconds,
                                double bandwidth_hz, double noise_power_w) {
  require_non_negative(energy_j, "energy_j");
  require_positive(channel_gain, "channel_gain");
  require_positive(slot_seconds, "slot_seconds");
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(noise_power_w, "noise_power_w");
  const double snr = energy_j * channel_gain / (noise_power_w * slot_seconds);
  return slot_seconds * bandwidth_hz * std::log2(1.0 + snr);
}

FeasibilityReport causality_slack(const Instance& instance, const Allocation& allocation,
                                  double tolerance_j) {
  const SystemConfig& cfg = instance.config;
  const int K = cfg.num_users;
  const int N = cfg.num_slots;
  if (allocation.local_bits.rows() != K || allocation.local_bits.cols() != N ||
      allocation.offload_bits.rows() != K || allocation.offload_bits.cols() != N) {
    throw std::invalid_argument("allocation shape does not match instance");
  }

  FeasibilityReport report;
  report.slack = Grid(K, N);
  double min_slack = 0.0;
  for (int k = 0; k < K; ++k) {
    double used = 0.0;
    double available = cfg.initial_energy_j[k];
    for (int n = 0; n < N; ++n) {
      if (n > 0) available += instance.harvest(k, n - 1);
      used += local_energy(allocation.local_bits(k, n), cfg.capacitance[k], cfg.cycles_per_bit[k],
                           cfg.slot_seconds) +
              offload_energy(allocation.offload_bits(k, n), instance.channel_gain(k, n),
                             cfg.slot_seconds, cfg.bandwidth_hz, cfg.noise_power_w);
      const double slack = available - used;
      report.slack(k, n) = slack;
      min_slack = std::min(min_slack, slack);
    }
  }
  report.worst_violation = std::max(0.0, -min_slack);
  report.feasible = report.worst_violation <= tolerance_j;
  return report;
}

double weighted_rate(const Allocation& allocation, std::span<const double> weights) {
  const int K = allocation.local_bits.rows();
  const int N = allocation.local_bits.cols();
  if (allocation.offload_bits.rows() != K || allocation.offload_bits.cols() != N ||
      static_cast<int>(weights.size()) != K) {
    throw std::invalid_argument("weighted_rate: shape mismatch");
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    double user_bits = 0.0;
    for (int n = 0; n < N; ++n) {
      user_bits += allocation.local_bits(k, n) + allocation.offload_bits(k, n);
    }
    total += weights[k] * user_bits;
  }
  return total;
}

double available_energy_through(const Instance& instance, int user, int slot) {
  double available = instance.config.initial_energy_j[user];
  for (int j = 0; j < slot; ++j) available += instance.harvest(user, j);
  return available;
}

double total_available_energy(const Instance& instance, int user) {
  return available_energy_through(instance, user, instance.config.num_slots - 1);
}

void validate_instance(const Instance& instance) {
  const SystemConfig& cfg = instance.config;
  if (cfg.num_users < 1) throw std::invalid_argument("num_users must be >= 1");
  if (cfg.num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  if (!(cfg.slot_seconds > 0.0)) throw std::invalid_argument("slot_seconds must be > 0");
  if (!(cfg.bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth_hz must be > 0");
  if (!(cfg.noise_power_w > 0.0)) throw std::invalid_argument("noise_power_w must be > 0");
  const size_t K = static_cast<size_t>(cfg.num_users);
  if (cfg.weight.size() != K || cfg.capacitance.size() != K || cfg.cycles_per_bit.size() != K ||
      cfg.initial_energy_j.size() != K) {
    throw std::invalid_argument("per-user arrays must have length num_users");
  }
  for (size_t k = 0; k < K; ++k) {
    if (!(cfg.weight[k] > 0.0)) throw std::invalid_argument("weight must be > 0");
    if (!(cfg.capacitance[k] > 0.0)) throw std::invalid_argument("capacitance must be > 0");
    if (!(cfg.cycles_per_bit[k] > 0.0)) throw std::invalid_argument("cycles_per_bit must be > 0");
    if (!(cfg.initial_energy_j[k] >= 0.0)) throw std::invalid_argument("initial_energy_j must be >= 0");
  }
  if (instance.channel_gain.rows() != cfg.num_users || instance.channel_gain.cols() != cfg.num_slots) {
    throw std::invalid_argument("channel_gain must be K x N");
  }
  const int harvest_cols = cfg.num_slots - 1;
  if (instance.harvest.rows() != cfg.num_users ||
      (harvest_cols > 0 && instance.harvest.cols() != harvest_cols) ||
      (harvest_cols == 0 && instance.harvest.cols() != 0)) {
    throw std::invalid_argument("harvest must be K x (N-1)");
  }
  for (double h : instance.channel_gain.data()) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("channel gains must be positive");
  }
  for (double e : instance.harvest.data()) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("harvest must be non-negative");
  }
}

}  // namespace ehmec

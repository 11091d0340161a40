#ifndef EHMEC_IO_HPP_
#define EHMEC_IO_HPP_

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ehmec/dual_solver.hpp"
#include "ehmec/experiments.hpp"
#include "ehmec/model.hpp"

// File formats: instance and report JSON, sweep configs, and the plot-ready
// sweep CSV. The exact key names are documented in docs/instance.schema.json
// and docs/FORMATS.md; all numbers are SI-unit floats.
namespace ehmec::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j);

Instance load_instance(const std::string& path);
void save_instance(const Instance& instance, const std::string& path);

nlohmann::json solve_report_to_json(const dual::SolveReport& report, bool include_trace = false,
                                    bool include_mu = false);

nlohmann::json gen_params_to_json(const experiments::GenParams& params);
experiments::GenParams gen_params_from_json(const nlohmann::json& j);

nlohmann::json sweep_spec_to_json(const experiments::SweepSpec& spec);
experiments::SweepSpec sweep_spec_from_json(const nlohmann::json& j);

struct SweepConfig {
  experiments::GenParams gen;
  experiments::SweepSpec sweep;
};

SweepConfig load_sweep_config(const std::string& path);

nlohmann::json sweep_result_to_json(const experiments::SweepResult& result);

/// Plot-ready matrix, one row per (value, scheme, trial):
/// swept_value,scheme,trial,objective. Deterministic shortest round-trip
/// float formatting, so re-export is byte-identical.
std::string sweep_result_to_csv(const experiments::SweepResult& result);

struct SweepCsvRow {
  double swept_value = 0.0;
  std::string scheme;
  int trial = 0;
  double objective = 0.0;
};

std::vector<SweepCsvRow> parse_sweep_csv(const std::string& csv);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Writes via a temp file in the same directory plus rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace ehmec::io

#endif  // EHMEC_IO_HPP_

#include "ehmec/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ehmec::io {

namespace {

using nlohmann::json;

Grid grid_from_json(const json& rows, int expect_rows, int expect_cols, const char* what) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != expect_rows) {
    throw IoError(std::string(what) + ": expected " + std::to_string(expect_rows) + " rows");
  }
  Grid grid(expect_rows, expect_cols);
  for (int r = 0; r < expect_rows; ++r) {
    const json& row = rows[r];
    if (!row.is_array() || static_cast<int>(row.size()) != expect_cols) {
      throw IoError(std::string(what) + ": row " + std::to_string(r) + " must have " +
                    std::to_string(expect_cols) + " entries");
    }
    for (int c = 0; c < expect_cols; ++c) grid(r, c) = row[c].get<double>();
  }
  return grid;
}

json grid_to_json(const Grid& grid) {
  json rows = json::array();
  for (int r = 0; r < grid.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < grid.cols(); ++c) row.push_back(grid(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
T get_required(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("missing required key: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad value for key '") + key + "': " + e.what());
  }
}

template <typename T>
void get_optional(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json instance_to_json(const Instance& instance) {
  const SystemConfig& cfg = instance.config;
  json j;
  j["config"] = {
      {"num_users", cfg.num_users},
      {"num_slots", cfg.num_slots},
      {"slot_seconds", cfg.slot_seconds},
      {"bandwidth_hz", cfg.bandwidth_hz},
      {"noise_power_w", cfg.noise_power_w},
      {"weight", cfg.weight},
      {"capacitance", cfg.capacitance},
      {"cycles_per_bit", cfg.cycles_per_bit},
      {"initial_energy_j", cfg.initial_energy_j},
  };
  j["profiles"] = {
      {"h", grid_to_json(instance.channel_gain)},
      {"harvest", grid_to_json(instance.harvest)},
  };
  return j;
}

Instance instance_from_json(const json& j) {
  if (!j.contains("config") || !j.contains("profiles")) {
    throw IoError("instance file must contain 'config' and 'profiles' objects");
  }
  const json& c = j.at("config");
  Instance instance;
  SystemConfig& cfg = instance.config;
  cfg.num_users = get_required<int>(c, "num_users");
  cfg.num_slots = get_required<int>(c, "num_slots");
  cfg.slot_seconds = get_required<double>(c, "slot_seconds");
  cfg.bandwidth_hz = get_required<double>(c, "bandwidth_hz");
  cfg.noise_power_w = get_required<double>(c, "noise_power_w");
  cfg.weight = get_required<std::vector<double>>(c, "weight");
  cfg.capacitance = get_required<std::vector<double>>(c, "capacitance");
  cfg.cycles_per_bit = get_required<std::vector<double>>(c, "cycles_per_bit");
  cfg.initial_energy_j = get_required<std::vector<double>>(c, "initial_energy_j");

  const json& p = j.at("profiles");
  if (!p.contains("h") || !p.contains("harvest")) {
    throw IoError("profiles must contain 'h' and 'harvest' matrices");
  }
  instance.channel_gain = grid_from_json(p.at("h"), cfg.num_users, cfg.num_slots, "profiles.h");
  instance.harvest =
      grid_from_json(p.at("harvest"), cfg.num_users, cfg.num_slots - 1, "profiles.harvest");
  try {
    validate_instance(instance);
  } catch (const std::exception& e) {
    throw IoError(std::string("invalid instance: ") + e.what());
  }
  return instance;
}

Instance load_instance(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
  try {
    return instance_from_json(j);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_instance(const Instance& instance, const std::string& path) {
  atomic_write(path, instance_to_json(instance).dump(2) + "\n");
}

json solve_report_to_json(const dual::SolveReport& report, bool include_trace, bool include_mu) {
  json j;
  j["primal_value"] = report.primal_value;
  j["dual_value"] = report.dual_value;
  j["relative_gap"] = report.relative_gap;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["allocation"] = {
      {"local_bits", grid_to_json(report.allocation.local_bits)},
      {"offload_bits", grid_to_json(report.allocation.offload_bits)},
  };
  j["feasibility"] = {
      {"feasible", report.feasibility.feasible},
      {"worst_violation_j", report.feasibility.worst_violation},
  };
  if (include_trace) j["dual_trace"] = report.dual_trace;
  if (include_mu) j["mu"] = grid_to_json(report.final_dual.mu);
  return j;
}

json gen_params_to_json(const experiments::GenParams& params) {
  return json{
      {"e0_max_j", params.e0_max_j},
      {"e_init_j", params.e_init_j},
      {"gamma0_db", params.gamma0_db},
      {"pathloss_exponent", params.pathloss_exponent},
      {"distance_m", params.distance_m},
      {"seed", params.seed},
      {"bandwidth_hz", params.bandwidth_hz},
      {"noise_power_w", params.noise_power_w},
      {"capacitance", params.capacitance},
      {"cycles_per_bit", params.cycles_per_bit},
      {"weight", params.weight},
      {"horizon_seconds", params.horizon_seconds},
  };
}

experiments::GenParams gen_params_from_json(const json& j) {
  experiments::GenParams params;
  get_optional(j, "e0_max_j", params.e0_max_j);
  get_optional(j, "e_init_j", params.e_init_j);
  get_optional(j, "gamma0_db", params.gamma0_db);
  get_optional(j, "pathloss_exponent", params.pathloss_exponent);
  get_optional(j, "distance_m", params.distance_m);
  get_optional(j, "seed", params.seed);
  get_optional(j, "bandwidth_hz", params.bandwidth_hz);
  get_optional(j, "noise_power_w", params.noise_power_w);
  get_optional(j, "capacitance", params.capacitance);
  get_optional(j, "cycles_per_bit", params.cycles_per_bit);
  get_optional(j, "weight", params.weight);
  get_optional(j, "horizon_seconds", params.horizon_seconds);
  return params;
}

namespace {

experiments::SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "N") return experiments::SweepParameter::kNumSlots;
  if (name == "tau") return experiments::SweepParameter::kSlotSeconds;
  if (name == "K") return experiments::SweepParameter::kNumUsers;
  throw IoError("sweep parameter must be one of \"N\", \"tau\", \"K\"");
}

std::string sweep_parameter_name(experiments::SweepParameter p) {
  switch (p) {
    case experiments::SweepParameter::kNumSlots: return "N";
    case experiments::SweepParameter::kSlotSeconds: return "tau";
    case experiments::SweepParameter::kNumUsers: return "K";
  }
  return "N";
}

}  // namespace

json sweep_spec_to_json(const experiments::SweepSpec& spec) {
  json schemes = json::array();
  for (auto s : spec.schemes) schemes.push_back(std::string(baselines::scheme_name(s)));
  return json{
      {"parameter", sweep_parameter_name(spec.parameter)},
      {"values", spec.values},
      {"trials", spec.trials},
      {"schemes", schemes},
      {"K", spec.fixed_num_users},
      {"N", spec.fixed_num_slots},
      {"tau", spec.fixed_slot_seconds},
      {"tau_mode", spec.tau_mode == experiments::TauMode::kFixedTau ? "fixed_tau" : "fixed_T"},
      {"exclude_nonconverged_from_mean", spec.exclude_nonconverged_from_mean},
  };
}

experiments::SweepSpec sweep_spec_from_json(const json& j) {
  experiments::SweepSpec spec;
  spec.parameter = parse_sweep_parameter(get_required<std::string>(j, "parameter"));
  spec.values = get_required<std::vector<double>>(j, "values");
  get_optional(j, "trials", spec.trials);
  if (j.contains("schemes")) {
    spec.schemes.clear();
    for (const auto& name : j.at("schemes")) {
      const auto scheme = baselines::parse_scheme(name.get<std::string>());
      if (!scheme) throw IoError("unknown scheme: " + name.get<std::string>());
      spec.schemes.push_back(*scheme);
    }
  }
  get_optional(j, "K", spec.fixed_num_users);
  get_optional(j, "N", spec.fixed_num_slots);
  get_optional(j, "tau", spec.fixed_slot_seconds);
  if (j.contains("tau_mode")) {
    const std::string mode = j.at("tau_mode").get<std::string>();
    if (mode == "fixed_tau") {
      spec.tau_mode = experiments::TauMode::kFixedTau;
    } else if (mode == "fixed_T") {
      spec.tau_mode = experiments::TauMode::kFixedHorizon;
    } else {
      throw IoError("tau_mode must be \"fixed_tau\" or \"fixed_T\"");
    }
  }
  get_optional(j, "exclude_nonconverged_from_mean", spec.exclude_nonconverged_from_mean);
  if (spec.values.empty()) throw IoError("sweep values must be non-empty");
  if (spec.trials < 1) throw IoError("sweep trials must be >= 1");
  return spec;
}

SweepConfig load_sweep_config(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
  try {
    SweepConfig config;
    if (j.contains("gen")) config.gen = gen_params_from_json(j.at("gen"));
    if (!j.contains("sweep")) throw IoError("config must contain a 'sweep' object");
    config.sweep = sweep_spec_from_json(j.at("sweep"));
    return config;
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

json sweep_result_to_json(const experiments::SweepResult& result) {
  json cells = json::array();
  for (const auto& cell : result.cells) {
    json c = {
        {"value", cell.value},
        {"scheme", std::string(baselines::scheme_name(cell.scheme))},
        {"mean", cell.mean},
        {"stddev", cell.stddev},
        {"nonconverged", cell.nonconverged},
        {"objectives", cell.objectives},
    };
    cells.push_back(std::move(c));
  }
  return json{
      {"build_id", result.build_id},
      {"gen", gen_params_to_json(result.gen)},
      {"sweep", sweep_spec_to_json(result.spec)},
      {"cells", cells},
  };
}

std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

std::string sweep_result_to_csv(const experiments::SweepResult& result) {
  std::string out = "swept_value,scheme,trial,objective\n";
  for (const auto& cell : result.cells) {
    for (size_t t = 0; t < cell.objectives.size(); ++t) {
      out += format_double(cell.value);
      out += ',';
      out += baselines::scheme_name(cell.scheme);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += format_double(cell.objectives[t]);
      out += '\n';
    }
  }
  return out;
}

std::vector<SweepCsvRow> parse_sweep_csv(const std::string& csv) {
  std::vector<SweepCsvRow> rows;
  std::istringstream stream(csv);
  std::string line;
  bool first = true;
  while (std::getline(stream, line)) {
    if (first) {  // header
      first = false;
      continue;
    }
    if (line.empty()) continue;
    SweepCsvRow row;
    std::istringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    row.swept_value = std::stod(field);
    std::getline(fields, row.scheme, ',');
    std::getline(fields, field, ',');
    row.trial = std::stoi(field);
    std::getline(fields, field, ',');
    row.objective = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed for " + target.string() + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace ehmec::io

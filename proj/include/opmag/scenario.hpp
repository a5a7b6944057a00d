// Scenario configuration: JSON documents and the embedded presets.
#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "opmag/atom.hpp"
#include "opmag/steady_state.hpp"

namespace opmag {

inline constexpr int kScenarioSchemaVersion = 1;

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure, carrying the offending path in the message.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Spacing { linear, log_symmetric };

struct SweepSpec {
  double delta_min = -5e9;
  double delta_max = 15e9;
  int npoints = 61;
  Spacing spacing = Spacing::linear;
};

/// Which quantities a sweep computes and emits.
struct OutputSelection {
  bool sz = true;
  bool populations = false;
  bool light_shift = true;
  bool linewidth = true;
  bool response_curve = false;

  bool empty() const { return !(sz || populations || light_shift || linewidth || response_curve); }
  bool needs_resonance() const { return light_shift || linewidth || response_curve; }
};

/// Optional far-detuned calibration: light shifts are reported relative to the value at delta_ref.
struct Calibration {
  bool enabled = false;
  double delta_ref = 1e12;
};

struct SolverOverrides {
  SteadyStateOptions steady;
  int scan_points = 401;
};

struct ValidationSpec {
  std::vector<double> omegas{1e4, 3e3, 1e3};  ///< Omega ladder, Hz
  bool integrator_check = true;               ///< time-evolve the largest rung as well
  double integrator_time = 0.1;               ///< s
  double sz_tolerance = 1e-16;                ///< fixed-point tolerance for both solves
};

struct ScenarioConfig {
  std::string name = "custom";
  AtomSpec atom;
  ExperimentParams params;
  SweepSpec sweep;
  OutputSelection outputs;
  Calibration calibration;
  SolverOverrides solver;
  ValidationSpec validation;

  void validate() const {
    try {
      atom.validate();
      params.validate();
      solver.steady.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(sweep.delta_min < sweep.delta_max)) throw ConfigError("sweep.delta_min must be below sweep.delta_max");
    if (sweep.npoints < 2) throw ConfigError("sweep.npoints must be at least 2");
    if (solver.scan_points < 3) throw ConfigError("solver.scan_points must be at least 3");
    if (calibration.enabled && !std::isfinite(calibration.delta_ref)) {
      throw ConfigError("calibration.delta_ref_hz must be finite");
    }
    if (validation.omegas.empty()) throw ConfigError("validation.omega_hz must not be empty");
    for (double w : validation.omegas) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("validation.omega_hz entries must be >= 0");
    }
    if (!(validation.sz_tolerance > 0.0) || !(validation.integrator_time > 0.0)) {
      throw ConfigError("validation tolerances and times must be positive");
    }
  }

  /// Detuning grid. log-symmetric places points uniformly in asinh(delta / gamma_pb),
  /// which is dense within a pressure width of zero and logarithmic beyond it.
  std::vector<double> deltas() const {
    std::vector<double> out(static_cast<std::size_t>(sweep.npoints));
    const double n = sweep.npoints - 1;
    if (sweep.spacing == Spacing::linear) {
      for (int k = 0; k < sweep.npoints; ++k) {
        out[k] = sweep.delta_min + (sweep.delta_max - sweep.delta_min) * k / n;
      }
    } else {
      const double scale = params.gamma_pb > 0.0 ? params.gamma_pb : 1.0;
      const double lo = std::asinh(sweep.delta_min / scale), hi = std::asinh(sweep.delta_max / scale);
      for (int k = 0; k < sweep.npoints; ++k) out[k] = scale * std::sinh(lo + (hi - lo) * k / n);
    }
    out.front() = sweep.delta_min;
    out.back() = sweep.delta_max;
    return out;
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline AtomSpec atom_from_json(const json& j) {
  reject_unknown(j, "atom", {"species", "nuclear_spin_twice", "delta_s_hz", "delta_p_hz",
                             "gyromagnetic_ratio_hz_per_gauss"});
  std::string species = "cs133";
  read(j, "species", species, "atom");
  AtomSpec a;
  if (species == "cs133") {
    a = AtomSpec::cesium133();
  } else if (species == "rb87") {
    a = AtomSpec::rubidium87();
  } else if (species != "custom") {
    throw ConfigError("atom.species must be cs133, rb87 or custom");
  }
  int twice = a.nuclear_spin.twice();
  read(j, "nuclear_spin_twice", twice, "atom");
  if (twice < 1 || twice % 2 == 0) throw ConfigError("atom.nuclear_spin_twice must be a positive odd integer");
  a.nuclear_spin = HalfInt::from_twice(twice);
  read(j, "delta_s_hz", a.delta_s, "atom");
  read(j, "delta_p_hz", a.delta_p, "atom");
  read(j, "gyromagnetic_ratio_hz_per_gauss", a.gyromagnetic_ratio_e, "atom");
  return a;
}

inline ExperimentParams params_from_json(const json& j) {
  reject_unknown(j, "params", {"rabi_hz", "rabi_prime_hz", "detuning_hz", "gamma_pb_hz", "gamma_sd_optical_hz",
                               "gamma_se_hz", "gamma_sd_collision_hz", "b_z_gauss", "b_x_gauss",
                               "rf_frequency_hz", "pump_sign"});
  if (j.contains("rabi_hz") && j.contains("rabi_prime_hz")) {
    throw ConfigError("give either params.rabi_hz or params.rabi_prime_hz, not both");
  }
  ExperimentParams p;
  if (j.contains("rabi_hz")) {
    double w = 0.0;
    read(j, "rabi_hz", w, "params");
    p.set_rabi(w);
  }
  read(j, "rabi_prime_hz", p.rabi_prime, "params");
  read(j, "detuning_hz", p.detuning, "params");
  read(j, "gamma_pb_hz", p.gamma_pb, "params");
  read(j, "gamma_sd_optical_hz", p.gamma_sd_optical, "params");
  read(j, "gamma_se_hz", p.gamma_se, "params");
  read(j, "gamma_sd_collision_hz", p.gamma_sd_collision, "params");
  read(j, "b_z_gauss", p.b_z, "params");
  read(j, "b_x_gauss", p.b_x, "params");
  read(j, "rf_frequency_hz", p.rf_frequency, "params");
  read(j, "pump_sign", p.pump_sign, "params");
  return p;
}

inline const char* spacing_name(Spacing s) { return s == Spacing::linear ? "linear" : "log-symmetric"; }

}  // namespace detail

/// Parses a scenario document. Missing keys keep their defaults; unknown keys are rejected.
inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  detail::reject_unknown(j, "config", {"schema_version", "name", "atom", "params", "sweep", "outputs",
                                       "calibration", "solver", "validation"});
  if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
  int version = 0;
  read(j, "schema_version", version, "config");
  if (version != kScenarioSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kScenarioSchemaVersion) + ")");
  }
  ScenarioConfig c;
  read(j, "name", c.name, "config");
  if (j.contains("atom")) c.atom = detail::atom_from_json(j.at("atom"));
  if (j.contains("params")) c.params = detail::params_from_json(j.at("params"));

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::reject_unknown(s, "sweep", {"delta_min_hz", "delta_max_hz", "npoints", "spacing"});
    read(s, "delta_min_hz", c.sweep.delta_min, "sweep");
    read(s, "delta_max_hz", c.sweep.delta_max, "sweep");
    read(s, "npoints", c.sweep.npoints, "sweep");
    std::string spacing = detail::spacing_name(c.sweep.spacing);
    read(s, "spacing", spacing, "sweep");
    if (spacing == "linear") {
      c.sweep.spacing = Spacing::linear;
    } else if (spacing == "log-symmetric") {
      c.sweep.spacing = Spacing::log_symmetric;
    } else {
      throw ConfigError("sweep.spacing must be linear or log-symmetric");
    }
  }

  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (!o.is_array()) throw ConfigError("outputs must be an array of names");
    c.outputs = OutputSelection{false, false, false, false, false};
    for (const auto& item : o) {
      if (!item.is_string()) throw ConfigError("outputs entries must be strings");
      const std::string name = item.get<std::string>();
      if (name == "sz") c.outputs.sz = true;
      else if (name == "populations") c.outputs.populations = true;
      else if (name == "light_shift") c.outputs.light_shift = true;
      else if (name == "linewidth") c.outputs.linewidth = true;
      else if (name == "response_curve") c.outputs.response_curve = true;
      else throw ConfigError("unknown output '" + name + "'");
    }
  }

  if (j.contains("calibration")) {
    const auto& cal = j.at("calibration");
    detail::reject_unknown(cal, "calibration", {"mode", "delta_ref_hz"});
    std::string mode = "none";
    read(cal, "mode", mode, "calibration");
    if (mode == "none") {
      c.calibration.enabled = false;
    } else if (mode == "far_detuned_reference") {
      c.calibration.enabled = true;
    } else {
      throw ConfigError("calibration.mode must be none or far_detuned_reference");
    }
    read(cal, "delta_ref_hz", c.calibration.delta_ref, "calibration");
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown(s, "solver", {"alpha", "max_iter", "sz_tolerance", "residual_tolerance",
                                         "rank_tolerance", "initial_sz", "scan_points"});
    read(s, "alpha", c.solver.steady.alpha, "solver");
    read(s, "max_iter", c.solver.steady.max_iter, "solver");
    read(s, "sz_tolerance", c.solver.steady.sz_tolerance, "solver");
    read(s, "residual_tolerance", c.solver.steady.residual_tolerance, "solver");
    read(s, "rank_tolerance", c.solver.steady.rank_tolerance, "solver");
    read(s, "initial_sz", c.solver.steady.initial_sz, "solver");
    read(s, "scan_points", c.solver.scan_points, "solver");
  }

  if (j.contains("validation")) {
    const auto& v = j.at("validation");
    detail::reject_unknown(v, "validation", {"omega_hz", "integrator_check", "integrator_time_s", "sz_tolerance"});
    read(v, "omega_hz", c.validation.omegas, "validation");
    read(v, "integrator_check", c.validation.integrator_check, "validation");
    read(v, "integrator_time_s", c.validation.integrator_time, "validation");
    read(v, "sz_tolerance", c.validation.sz_tolerance, "validation");
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json outputs = nlohmann::json::array();
  if (c.outputs.sz) outputs.push_back("sz");
  if (c.outputs.populations) outputs.push_back("populations");
  if (c.outputs.light_shift) outputs.push_back("light_shift");
  if (c.outputs.linewidth) outputs.push_back("linewidth");
  if (c.outputs.response_curve) outputs.push_back("response_curve");
  return {
      {"schema_version", kScenarioSchemaVersion},
      {"name", c.name},
      {"atom",
       {{"species", "custom"},
        {"nuclear_spin_twice", c.atom.nuclear_spin.twice()},
        {"delta_s_hz", c.atom.delta_s},
        {"delta_p_hz", c.atom.delta_p},
        {"gyromagnetic_ratio_hz_per_gauss", c.atom.gyromagnetic_ratio_e}}},
      {"params",
       {{"rabi_prime_hz", c.params.rabi_prime},
        {"detuning_hz", c.params.detuning},
        {"gamma_pb_hz", c.params.gamma_pb},
        {"gamma_sd_optical_hz", c.params.gamma_sd_optical},
        {"gamma_se_hz", c.params.gamma_se},
        {"gamma_sd_collision_hz", c.params.gamma_sd_collision},
        {"b_z_gauss", c.params.b_z},
        {"b_x_gauss", c.params.b_x},
        {"rf_frequency_hz", c.params.rf_frequency},
        {"pump_sign", c.params.pump_sign}}},
      {"sweep",
       {{"delta_min_hz", c.sweep.delta_min},
        {"delta_max_hz", c.sweep.delta_max},
        {"npoints", c.sweep.npoints},
        {"spacing", detail::spacing_name(c.sweep.spacing)}}},
      {"outputs", outputs},
      {"calibration",
       {{"mode", c.calibration.enabled ? "far_detuned_reference" : "none"},
        {"delta_ref_hz", c.calibration.delta_ref}}},
      {"solver",
       {{"alpha", c.solver.steady.alpha},
        {"max_iter", c.solver.steady.max_iter},
        {"sz_tolerance", c.solver.steady.sz_tolerance},
        {"residual_tolerance", c.solver.steady.residual_tolerance},
        {"rank_tolerance", c.solver.steady.rank_tolerance},
        {"initial_sz", c.solver.steady.initial_sz},
        {"scan_points", c.solver.scan_points}}},
      {"validation",
       {{"omega_hz", c.validation.omegas},
        {"integrator_check", c.validation.integrator_check},
        {"integrator_time_s", c.validation.integrator_time},
        {"sz_tolerance", c.validation.sz_tolerance}}},
  };
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"cs-100torr", "cs-700torr", "fig5", "rb87-validation"};
  return names;
}

/// Cesium with the 100 torr N2 rates. The pump handedness is encoded by reversing B_z.
inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.atom = AtomSpec::cesium133();
  c.params.set_rabi(4.1e6);
  c.params.gamma_se = 1.31e3;
  c.params.gamma_sd_collision = 1.53e3 - 1.31e3;
  c.params.gamma_pb = 0.6e9;
  c.params.b_z = 0.1;
  c.params.pump_sign = -1;
  if (name == "cs-100torr") {
    // defaults above
  } else if (name == "cs-700torr") {
    c.params.gamma_sd_collision = 1.65e3 - 1.31e3;
    c.params.gamma_pb = 4.2e9;
  } else if (name == "fig5") {
    c.params.gamma_pb = 0.2e9;
    c.params.set_rabi(0.5e6);
    c.sweep = {-2e9, 12e9, 141, Spacing::linear};
  } else if (name == "rb87-validation") {
    c.atom = AtomSpec::rubidium87();
    c.params.pump_sign = 1;
    c.sweep = {-2e9, 2e9, 5, Spacing::linear};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace opmag

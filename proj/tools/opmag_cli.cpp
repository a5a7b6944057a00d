// opmag: steady states, resonance curves, detuning sweeps and oracle validation.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "opmag/analytics.hpp"
#include "opmag/linear_response.hpp"
#include "opmag/scenario.hpp"
#include "opmag/steady_state.hpp"
#include "opmag/sweep.hpp"
#include "opmag/validation.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kSolverError = 3, kIoError = 4 };

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::string out_dir = "opmag-out";
  unsigned threads = 1;
  std::string calibrate;
  std::optional<double> delta;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_delta) {
  cmd->add_option("--config", o.config_path, "scenario JSON file");
  cmd->add_option("--preset", o.preset_name, "embedded scenario (see `presets`)");
  cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();
  cmd->add_option("--calibrate", o.calibrate, "far-detuned reference detuning in Hz, or 'off'");
  if (with_delta) cmd->add_option("--delta", o.delta, "pump detuning in Hz (overrides the config)");
}

opmag::ScenarioConfig resolve_config(const CommonOptions& o, const std::string& fallback_preset) {
  if (!o.config_path.empty() && !o.preset_name.empty()) {
    throw opmag::ConfigError("give either --config or --preset, not both");
  }
  opmag::ScenarioConfig c = !o.config_path.empty() ? opmag::load_config(o.config_path)
                            : opmag::preset(o.preset_name.empty() ? fallback_preset : o.preset_name);
  if (!o.calibrate.empty()) {
    if (o.calibrate == "off") {
      c.calibration.enabled = false;
    } else {
      try {
        std::size_t used = 0;
        c.calibration.delta_ref = std::stod(o.calibrate, &used);
        if (used != o.calibrate.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw opmag::ConfigError("--calibrate expects a detuning in Hz or 'off', got '" + o.calibrate + "'");
      }
      c.calibration.enabled = true;
    }
  }
  if (o.delta) c.params.detuning = *o.delta;
  c.validate();
  return c;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw opmag::IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

int cmd_steady(const CommonOptions& o) {
  const opmag::ScenarioConfig c = resolve_config(o, "cs-100torr");
  const opmag::SteadyStateSolution s = opmag::solve_steady_state(c.atom, c.params, c.solver.steady);
  nlohmann::json pops = nlohmann::json::array();
  for (const auto& p : opmag::populations(s)) {
    pops.push_back({{"f", p.f.value()}, {"m", p.m.value()}, {"p", p.p}});
  }
  const auto st = opmag::spin_temperature_test(c.atom, s.populations);
  const nlohmann::json j = {{"scenario", c.name},
                            {"delta_hz", c.params.detuning},
                            {"sz", s.mean_sz},
                            {"iterations", s.iterations},
                            {"residual", s.residual},
                            {"degenerate", s.degenerate},
                            {"spin_temperature", st.is_spin_temperature},
                            {"spin_temperature_max_deviation", st.max_deviation},
                            {"populations", pops}};
  ensure_dir(o.out_dir);
  opmag::write_file(std::filesystem::path(o.out_dir) / "steady.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_response(const CommonOptions& o) {
  opmag::ScenarioConfig c = resolve_config(o, "cs-100torr");
  c.params.b_x = opmag::linear_regime_b_x(c.atom, c.params);
  const opmag::SteadyStateSolution s = opmag::solve_steady_state(c.atom, c.params, c.solver.steady);
  opmag::ScanWindow w = opmag::default_scan_window(c.atom, c.params, s);
  w.npoints = c.solver.scan_points;
  const opmag::ResponseCurve curve = opmag::extract_resonance(c.atom, c.params, s, w, o.threads);
  const std::filesystem::path dir(o.out_dir);
  ensure_dir(dir);
  const std::filesystem::path file = dir / opmag::response_file_name(c.params.detuning);
  opmag::write_file(file, opmag::response_csv(curve));
  std::printf("delta %.6g Hz: <S_z> %.8g, omega_0 %.10g Hz, light shift %.6g Hz, linewidth %.6g Hz\n",
              c.params.detuning, s.mean_sz, curve.omega_zero, curve.light_shift(), curve.linewidth);
  std::printf("wrote %s\n", file.string().c_str());
  return kOk;
}

int cmd_sweep(const CommonOptions& o) {
  const opmag::ScenarioConfig c = resolve_config(o, "cs-100torr");
  const opmag::SweepTable t = opmag::run_sweep(c, o.threads);
  for (const std::string& notice : opmag::write_sweep_outputs(c, t, o.out_dir)) {
    std::cerr << "notice: " << notice << "\n";
  }
  int failed = 0;
  for (const auto& r : t.rows) failed += r.ok() ? 0 : 1;
  if (t.b_x_downscaled) std::cerr << "notice: B_x reduced to " << t.b_x_used << " G to stay in the linear regime\n";
  std::printf("%zu points (%d failed) written to %s\n", t.rows.size(), failed, o.out_dir.c_str());
  return kOk;
}

int cmd_validate(const CommonOptions& o) {
  const opmag::ScenarioConfig c = resolve_config(o, "rb87-validation");
  const opmag::ValidationReport r = opmag::run_validation(c);
  const nlohmann::json j = opmag::report_to_json(c, r);
  ensure_dir(o.out_dir);
  opmag::write_file(std::filesystem::path(o.out_dir) / "report.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return r.all_ok() ? kOk : kSolverError;
}

int cmd_presets(const CommonOptions& o) {
  if (!o.preset_name.empty()) {
    std::cout << opmag::config_to_json(opmag::preset(o.preset_name)).dump(2) << "\n";
    return kOk;
  }
  for (const std::string& name : opmag::preset_names()) std::cout << name << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optically pumped alkali magnetometer simulator"};
  app.require_subcommand(1);
  CommonOptions opts;
  CLI::App* steady = app.add_subcommand("steady", "self-consistent ground steady state at one detuning");
  CLI::App* response = app.add_subcommand("response", "magnetic-resonance curve and its zero crossing");
  CLI::App* sweep = app.add_subcommand("sweep", "polarization, light shift and linewidth versus detuning");
  CLI::App* validate = app.add_subcommand("validate", "full master equation versus the effective equation");
  CLI::App* presets = app.add_subcommand("presets", "list presets, or print one with --preset");
  add_common(steady, opts, true);
  add_common(response, opts, true);
  add_common(sweep, opts, false);
  add_common(validate, opts, false);
  presets->add_option("--preset", opts.preset_name, "preset to print as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (steady->parsed()) return cmd_steady(opts);
    if (response->parsed()) return cmd_response(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (validate->parsed()) return cmd_validate(opts);
    if (presets->parsed()) return cmd_presets(opts);
  } catch (const opmag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const opmag::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverError;
  }
  return kConfigError;
}

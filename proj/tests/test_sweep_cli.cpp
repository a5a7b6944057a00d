#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "opmag/scenario.hpp"
#include "opmag/sweep.hpp"
#include "opmag/validation.hpp"

using namespace opmag;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_sweep() {
  ScenarioConfig c = preset("cs-100torr");
  c.sweep = {-1e9, 1e9, 4, Spacing::linear};
  c.solver.scan_points = 121;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("opmag_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPMAG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  for (const std::string& name : preset_names()) {
    const ScenarioConfig c = preset(name);
    const nlohmann::json j = config_to_json(c);
    const ScenarioConfig back = config_from_json(j);
    EXPECT_EQ(config_to_json(back), j) << name;
    EXPECT_EQ(back.params.rabi_prime, c.params.rabi_prime);
    EXPECT_EQ(back.atom.nuclear_spin, c.atom.nuclear_spin);
  }
}

TEST(Config, MissingKeysKeepDefaults) {
  const ScenarioConfig c = config_from_json(nlohmann::json{{"schema_version", 1}, {"params", {{"rabi_hz", 2e6}}}});
  EXPECT_NEAR(c.params.rabi(), 2e6, 1e-6);
  EXPECT_EQ(c.sweep.npoints, SweepSpec{}.npoints);
  EXPECT_TRUE(c.outputs.sz);
}

TEST(Config, RejectsMalformedDocuments) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json{{"params", json::object()}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 2}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"params", {{"gama_pb_hz", 1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"sweep", {{"delta_min_hz", 5}, {"delta_max_hz", 1}}}}),
               ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"params", {{"gamma_pb_hz", -1.0}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"params", {{"gamma_pb_hz", "wide"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"schema_version", 1}, {"outputs", {"sz", "phase"}}}), ConfigError);
  EXPECT_THROW(preset("cs-1torr"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/opmag.json"), IoError);
}

TEST(Config, LogSymmetricGrid) {
  ScenarioConfig c;
  c.sweep = {-1e10, 1e10, 21, Spacing::log_symmetric};
  const std::vector<double> d = c.deltas();
  ASSERT_EQ(d.size(), 21u);
  EXPECT_EQ(d.front(), -1e10);
  EXPECT_EQ(d.back(), 1e10);
  EXPECT_NEAR(d[10], 0.0, 1e-3);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(d[k], -d[d.size() - 1 - k], 1e-3);
  // Dense near zero: the central step is much finer than the outer one.
  EXPECT_LT(d[11] - d[10], 0.1 * (d[20] - d[19]));
}

TEST(Csv, FormatsNonFiniteValues) {
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(INFINITY), "inf");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Sweep, CsvRoundTripIsExact) {
  const SweepTable t = run_sweep(small_sweep());
  const std::string csv = sweep_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
  const std::vector<SweepRow> rows = parse_sweep_csv(csv);
  ASSERT_EQ(rows.size(), t.rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].delta, t.rows[k].delta);
    EXPECT_EQ(rows[k].sz, t.rows[k].sz);
    EXPECT_EQ(rows[k].light_shift, t.rows[k].light_shift);
    EXPECT_EQ(rows[k].linewidth, t.rows[k].linewidth);
    EXPECT_EQ(rows[k].iterations, t.rows[k].iterations);
    EXPECT_EQ(rows[k].status, t.rows[k].status);
  }
  SweepTable again;
  again.rows = rows;
  EXPECT_EQ(sweep_csv(again), csv);
}

TEST(Sweep, DeterministicAndThreadIndependent) {
  const ScenarioConfig c = small_sweep();
  const std::string serial = sweep_csv(run_sweep(c, 1));
  EXPECT_EQ(sweep_csv(run_sweep(c, 1)), serial);
  EXPECT_EQ(sweep_csv(run_sweep(c, 3)), serial);
}

TEST(Sweep, DownscalesStrongDrive) {
  ScenarioConfig c = small_sweep();
  c.sweep.npoints = 2;
  c.outputs = {true, false, false, false, false};
  c.params.b_x = 1.0;
  const SweepTable t = run_sweep(c);
  EXPECT_TRUE(t.b_x_downscaled);
  EXPECT_NEAR(t.b_x_used * c.atom.gyromagnetic_ratio_e, 0.01 * c.params.gamma_total(), 1e-9);
  c.params.b_x = 1e-9;
  EXPECT_FALSE(run_sweep(c).b_x_downscaled);
}

TEST(Sweep, CalibrationSubtractsReference) {
  ScenarioConfig c = small_sweep();
  c.sweep.npoints = 2;
  const SweepTable raw = run_sweep(c);
  c.calibration.enabled = true;
  const SweepTable cal = run_sweep(c);
  EXPECT_NE(cal.calibration_offset, 0.0);
  for (std::size_t k = 0; k < raw.rows.size(); ++k) {
    EXPECT_NEAR(cal.rows[k].light_shift, raw.rows[k].light_shift - cal.calibration_offset, 1e-9);
  }
}

TEST(Sweep, FailedPointsAreRecorded) {
  ScenarioConfig c = small_sweep();
  c.sweep.npoints = 2;
  c.solver.steady.max_iter = 1;
  const SweepTable t = run_sweep(c);
  for (const SweepRow& r : t.rows) {
    EXPECT_EQ(r.status, "nonconvergence");
    EXPECT_TRUE(std::isnan(r.sz));
  }
}

// Resolved hyperfine lines: polarization peaks where each ground-excited pair is on resonance.
TEST(Sweep, FourResonantPolarizationFeatures) {
  ScenarioConfig c = preset("fig5");
  c.outputs = {true, false, false, false, false};
  const SweepTable t = run_sweep(c);
  std::vector<double> maxima;
  for (std::size_t k = 1; k + 1 < t.rows.size(); ++k) {
    if (t.rows[k].sz > t.rows[k - 1].sz && t.rows[k].sz >= t.rows[k + 1].sz) maxima.push_back(t.rows[k].delta);
  }
  const double ds = c.atom.delta_s, dp = c.atom.delta_p;
  const double step = (c.sweep.delta_max - c.sweep.delta_min) / (c.sweep.npoints - 1);
  ASSERT_EQ(maxima.size(), 4u);
  const double expected[] = {0.0, dp, ds, ds + dp};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(maxima[k], expected[k], 2.0 * step) << k;
}

TEST(Outputs, PlotScriptAndFiles) {
  ScenarioConfig c = small_sweep();
  c.sweep.npoints = 2;
  c.outputs = {true, true, true, true, true};
  const SweepTable t = run_sweep(c);
  const fs::path dir = scratch_dir("outputs");
  EXPECT_TRUE(write_sweep_outputs(c, t, dir).empty());
  const std::string gp = read_file(dir / "plot.gp");
  EXPECT_NE(gp.find("multiplot"), std::string::npos);
  EXPECT_NE(gp.find("y2"), std::string::npos);
  EXPECT_NE(gp.find("sweep.csv"), std::string::npos);
  const std::string pops = read_file(dir / "populations.csv");
  EXPECT_EQ(pops.substr(0, pops.find('\n')).find("delta_hz,p_2f8_2m8"), 0u);
  EXPECT_TRUE(fs::exists(dir / response_file_name(-1e9)));
  EXPECT_EQ(read_file(dir / response_file_name(1e9)).substr(0, 20), "omega_hz,re_sx,im_sx");
}

TEST(Outputs, EmptySelectionSkipsPlot) {
  const fs::path dir = scratch_dir("empty");
  const PlotResult r = emit_plots(OutputSelection{false, true, false, false, false}, dir);
  EXPECT_FALSE(r.written);
  EXPECT_FALSE(r.notice.empty());
  EXPECT_FALSE(fs::exists(dir / "plot.gp"));
}

TEST(Validation, LogLogSlope) {
  const auto s = log_log_slope({1, 10, 100}, {3, 300, 30000});
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(*s, 2.0, 1e-12);
  EXPECT_FALSE(log_log_slope({1}, {1}).has_value());
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  EXPECT_EQ(run_cli("presets"), 0);
  EXPECT_EQ(run_cli("steady --preset cs-100torr --delta 0 --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "steady.json"));
  EXPECT_EQ(run_cli("steady --preset nope --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("steady --bogus-flag"), 2);
  EXPECT_EQ(run_cli("steady --config /nonexistent/x.json --out " + dir.string()), 4);

  write_file(dir / "bad.json", R"({"schema_version": 1, "sweep": {"npoints": 1}})");
  EXPECT_EQ(run_cli("sweep --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);

  // Output path blocked by a regular file.
  write_file(dir / "blocker", "x");
  EXPECT_EQ(run_cli("steady --preset cs-100torr --out " + (dir / "blocker" / "sub").string()), 4);
}

TEST(Cli, SweepWritesOutputs) {
  const fs::path dir = scratch_dir("cli_sweep");
  nlohmann::json j = config_to_json(small_sweep());
  j["sweep"]["npoints"] = 2;
  write_file(dir / "c.json", j.dump());
  ASSERT_EQ(run_cli("sweep --config " + (dir / "c.json").string() + " --threads 2 --out " + (dir / "o").string()), 0);
  const std::vector<SweepRow> rows = parse_sweep_csv(read_file(dir / "o" / "sweep.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_TRUE(fs::exists(dir / "o" / "plot.gp"));
}

// Detuning sweeps, CSV tables and gnuplot scripts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "opmag/linear_response.hpp"
#include "opmag/scenario.hpp"
#include "opmag/steady_state.hpp"

namespace opmag {

struct SweepRow {
  double delta = 0.0;
  double sz = std::numeric_limits<double>::quiet_NaN();
  double light_shift = std::numeric_limits<double>::quiet_NaN();
  double linewidth = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double residual = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";  ///< ok | nonconvergence | no_resonance | error

  std::vector<double> populations;  ///< basis order, filled when requested
  ResponseCurve response;           ///< filled when the response curve is requested

  bool ok() const { return status == "ok"; }
};

struct SweepTable {
  std::vector<SweepRow> rows;
  double b_x_used = 0.0;             ///< G, after automatic down-scaling
  bool b_x_downscaled = false;
  double calibration_offset = 0.0;   ///< Hz subtracted from every light shift
};

/// Keeps the RF drive in the linear regime: gamma_e B_x <= 0.01 gamma.
inline double linear_regime_b_x(const AtomSpec& atom, const ExperimentParams& params) {
  const double limit = 0.01 * params.gamma_total() / atom.gyromagnetic_ratio_e;
  return (limit > 0.0 && std::abs(params.b_x) > limit) ? std::copysign(limit, params.b_x) : params.b_x;
}

namespace detail {

inline SweepRow sweep_point(const ScenarioConfig& config, const ExperimentParams& base, double delta) {
  SweepRow row;
  row.delta = delta;
  ExperimentParams p = base;
  p.detuning = delta;
  try {
    const SteadyStateSolution steady = solve_steady_state(config.atom, p, config.solver.steady);
    row.sz = steady.mean_sz;
    row.iterations = steady.iterations;
    row.residual = steady.residual;
    if (config.outputs.populations) {
      row.populations.assign(steady.populations.data(), steady.populations.data() + steady.populations.size());
    }
    if (config.outputs.needs_resonance()) {
      ScanWindow w = default_scan_window(config.atom, p, steady);
      w.npoints = config.solver.scan_points;
      ResponseCurve c = extract_resonance(config.atom, p, steady, w);
      row.light_shift = c.light_shift();
      row.linewidth = c.linewidth;
      if (config.outputs.response_curve) row.response = std::move(c);
    }
  } catch (const NonConvergenceError&) {
    row.status = "nonconvergence";
  } catch (const ResonanceError&) {
    row.status = "no_resonance";
  } catch (const std::exception&) {
    row.status = "error";
  }
  return row;
}

}  // namespace detail

/// Steady state and resonance extraction at every detuning of the grid. A failing point
/// is recorded with its status and NaN values; the sweep continues. Points are
/// independent, so the table does not depend on `threads`.
inline SweepTable run_sweep(const ScenarioConfig& config, unsigned threads = 1) {
  config.validate();
  SweepTable table;
  ExperimentParams base = config.params;
  base.b_x = linear_regime_b_x(config.atom, config.params);
  table.b_x_used = base.b_x;
  table.b_x_downscaled = base.b_x != config.params.b_x;

  const std::vector<double> deltas = config.deltas();
  table.rows.resize(deltas.size());
  parallel_for(deltas.size(), threads, [&](std::size_t k) { table.rows[k] = detail::sweep_point(config, base, deltas[k]); });

  if (config.calibration.enabled && config.outputs.light_shift) {
    ScenarioConfig ref = config;
    ref.outputs = OutputSelection{false, false, true, false, false};
    const SweepRow r = detail::sweep_point(ref, base, config.calibration.delta_ref);
    if (!r.ok()) throw NonConvergenceError("calibration point failed (" + r.status + ")", {});
    table.calibration_offset = r.light_shift;
    for (SweepRow& row : table.rows) row.light_shift -= r.light_shift;
  }
  return table;
}

inline const char* kSweepCsvHeader = "delta_hz,sz,light_shift_hz,linewidth_hz,iterations,residual,status";

/// 17 significant digits, enough for every finite double to read back exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sweep_csv(const SweepTable& table) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const SweepRow& r : table.rows) {
    out += format_double(r.delta) + "," + format_double(r.sz) + "," + format_double(r.light_shift) + "," +
           format_double(r.linewidth) + "," + std::to_string(r.iterations) + "," + format_double(r.residual) +
           "," + r.status + "\n";
  }
  return out;
}

namespace detail {

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("malformed number '" + s + "' in CSV");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// Inverse of sweep_csv for the tabulated columns.
inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) throw ConfigError("unexpected sweep CSV header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 7) throw ConfigError("sweep CSV row with " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.delta = detail::parse_double(f[0]);
    r.sz = detail::parse_double(f[1]);
    r.light_shift = detail::parse_double(f[2]);
    r.linewidth = detail::parse_double(f[3]);
    r.iterations = std::stoi(f[4]);
    r.residual = detail::parse_double(f[5]);
    r.status = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string response_csv(const ResponseCurve& c) {
  std::string out = "omega_hz,re_sx,im_sx\n";
  for (std::size_t k = 0; k < c.omegas.size(); ++k) {
    out += format_double(c.omegas[k]) + "," + format_double(c.sx_plus[k].real()) + "," +
           format_double(c.sx_plus[k].imag()) + "\n";
  }
  return out;
}

inline std::string populations_csv(const AtomSpec& atom, const SweepTable& table) {
  const HyperfineBasis basis(atom);
  std::string out = "delta_hz";
  for (int i = 0; i < basis.ground_dim(); ++i) {
    const Level& l = basis.level(i);
    out += ",p_2f" + std::to_string(l.f.twice()) + "_2m" + std::to_string(l.m.twice());
  }
  out += "\n";
  for (const SweepRow& r : table.rows) {
    out += format_double(r.delta);
    for (int i = 0; i < basis.ground_dim(); ++i) {
      out += "," + format_double(r.populations.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                       : r.populations[static_cast<std::size_t>(i)]);
    }
    out += "\n";
  }
  return out;
}

/// Writes bytes verbatim (binary mode, so line endings stay '\n').
inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// File name used for the response curve at a given detuning, e.g. response_-1.5e+09.csv.
inline std::string response_file_name(double delta) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "response_%.6g.csv", delta);
  return buf;
}

struct PlotResult {
  bool written = false;
  std::string notice;
};

/// gnuplot script for the sweep CSV: polarization on its own panel, light shift and
/// linewidth sharing a panel on left and right axes. Nothing is written when no
/// plottable column is selected.
inline PlotResult emit_plots(const OutputSelection& outputs, const std::filesystem::path& dir,
                             const std::string& csv_name = "sweep.csv") {
  const bool shift = outputs.light_shift, width = outputs.linewidth;
  if (!outputs.sz && !shift && !width) {
    return {false, "no plottable output selected; plot script skipped"};
  }
  std::string s;
  s += "# columns: 1 delta_hz, 2 sz, 3 light_shift_hz, 4 linewidth_hz\n";
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set terminal pngcairo size 900," + std::string(outputs.sz && (shift || width) ? "900" : "500") + "\n";
  s += "set output 'sweep.png'\n";
  s += "set xlabel 'Detuning (GHz)'\n";
  if (outputs.sz && (shift || width)) s += "set multiplot layout 2,1\n";
  if (outputs.sz) {
    s += "set ylabel '<S_z>'\n";
    s += "plot '" + csv_name + "' using ($1/1e9):2 with lines lw 2 lc rgb 'black' title '<S_z>'\n";
  }
  if (shift || width) {
    std::vector<std::string> curves;
    if (shift) {
      s += "set ylabel 'Light shift (Hz)'\n";
      curves.push_back("'" + csv_name + "' using ($1/1e9):3 axes x1y1 with lines lw 2 lc rgb 'black' title 'light shift'");
    }
    if (width) {
      if (shift) {
        s += "set y2label 'Line width (Hz)'\nset ytics nomirror\nset y2tics\n";
      } else {
        s += "set ylabel 'Line width (Hz)'\n";
      }
      curves.push_back("'" + csv_name + "' using ($1/1e9):4 axes x1y" + std::string(shift ? "2" : "1") +
                       " with lines lw 2 lc rgb 'red' title 'line width'");
    }
    s += "plot ";
    for (std::size_t k = 0; k < curves.size(); ++k) s += (k ? ", \\\n     " : "") + curves[k];
    s += "\n";
  }
  if (outputs.sz && (shift || width)) s += "unset multiplot\n";
  write_file(dir / "plot.gp", s);
  return {true, ""};
}

/// Writes sweep.csv, plot.gp and, when selected, populations.csv and response_<delta>.csv.
inline std::vector<std::string> write_sweep_outputs(const ScenarioConfig& config, const SweepTable& table,
                                                    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::string> notices;
  write_file(dir / "sweep.csv", sweep_csv(table));
  if (config.outputs.populations) write_file(dir / "populations.csv", populations_csv(config.atom, table));
  if (config.outputs.response_curve) {
    for (const SweepRow& r : table.rows) {
      if (r.ok() && !r.response.omegas.empty()) write_file(dir / response_file_name(r.delta), response_csv(r.response));
    }
  }
  const PlotResult plot = emit_plots(config.outputs, dir);
  if (!plot.written) notices.push_back(plot.notice);
  return notices;
}

}  // namespace opmag

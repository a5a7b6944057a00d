// Full master equation versus the effective ground equation over a ladder of Rabi frequencies.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opmag/full_liouvillian.hpp"
#include "opmag/scenario.hpp"
#include "opmag/steady_state.hpp"

namespace opmag {

struct ValidationRung {
  double omega = 0.0;                  ///< Hz
  double sz_full = std::numeric_limits<double>::quiet_NaN();
  double sz_effective = std::numeric_limits<double>::quiet_NaN();
  double sz_error = std::numeric_limits<double>::quiet_NaN();          ///< |full - effective|
  double population_error = std::numeric_limits<double>::quiet_NaN();  ///< max over ground levels
  double excited_population = std::numeric_limits<double>::quiet_NaN();
  double residual_full = std::numeric_limits<double>::quiet_NaN();
  double residual_effective = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct IntegratorCheck {
  double omega = 0.0;
  double t_final = 0.0;
  double sz_evolved = 0.0;
  double sz_null_space = 0.0;
  double relative_difference = 0.0;
  double trace = 0.0;
  int steps = 0;
  bool completed = false;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationRung> rungs;
  std::optional<double> error_slope;     ///< d log|sz error| / d log Omega
  std::optional<double> excited_slope;   ///< d log(excited population) / d log Omega
  std::optional<IntegratorCheck> integrator;

  bool all_ok() const {
    return std::all_of(rungs.begin(), rungs.end(), [](const ValidationRung& r) { return r.status == "ok"; });
  }
};

/// Least-squares slope of log y against log x over the points with x, y > 0.
inline std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || !(std::abs(den) > 0.0)) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

inline ValidationRung validation_rung(const AtomSpec& atom, ExperimentParams params, double omega,
                                      const SteadyStateOptions& options) {
  ValidationRung r;
  r.omega = omega;
  params.set_rabi(omega);
  try {
    const FullSteadyState full = solve_full_steady_state(atom, params, options);
    const SteadyStateSolution eff = solve_steady_state(atom, params, options);
    r.sz_full = full.mean_sz;
    r.sz_effective = eff.mean_sz;
    r.sz_error = std::abs(full.mean_sz - eff.mean_sz);
    r.population_error = (full.ground_populations - eff.populations).cwiseAbs().maxCoeff();
    r.excited_population = full.excited_population;
    r.residual_full = full.residual;
    r.residual_effective = eff.residual;
  } catch (const NonConvergenceError& e) {
    r.status = std::string("nonconvergence: ") + e.what();
  }
  return r;
}

/// Starts from the unpolarized ground state and integrates the full equation for
/// spec.integrator_time, then compares with the null-space steady state.
inline IntegratorCheck integrator_check(const AtomSpec& atom, ExperimentParams params, double omega,
                                        double t_final, double sz_null_space) {
  params.set_rabi(omega);
  const HyperfineBasis basis(atom);
  CMatrix rho = CMatrix::Zero(basis.full_dim(), basis.full_dim());
  for (int i = 0; i < basis.ground_dim(); ++i) rho(i, i) = 1.0 / basis.ground_dim();
  EvolveOptions opts;
  opts.rtol = 1e-9;
  opts.keep_states = false;
  const Trajectory tr = evolve_full(atom, params, rho, t_final, opts);
  IntegratorCheck c;
  c.omega = omega;
  c.t_final = tr.last().t;
  c.sz_evolved = tr.last().sz;
  c.sz_null_space = sz_null_space;
  c.relative_difference = std::abs(c.sz_evolved - sz_null_space) / std::max(std::abs(sz_null_space), 1e-300);
  c.trace = tr.last().trace;
  c.steps = static_cast<int>(tr.points.size()) - 1;
  c.completed = tr.completed;
  c.message = tr.message;
  return c;
}

/// Runs every rung of config.validation.omegas. The atom should be small (I = 3/2): the
/// full superspace has (8I + 4)^2 elements.
inline ValidationReport run_validation(const ScenarioConfig& config) {
  config.validate();
  SteadyStateOptions options = config.solver.steady;
  options.sz_tolerance = config.validation.sz_tolerance;
  options.max_iter = std::max(options.max_iter, 2000);

  ValidationReport report;
  for (double omega : config.validation.omegas) {
    report.rungs.push_back(validation_rung(config.atom, config.params, omega, options));
  }
  std::vector<double> x, err, exc;
  for (const ValidationRung& r : report.rungs) {
    if (r.status != "ok") continue;
    x.push_back(r.omega);
    err.push_back(r.sz_error);
    exc.push_back(r.excited_population);
  }
  report.error_slope = log_log_slope(x, err);
  report.excited_slope = log_log_slope(x, exc);

  if (config.validation.integrator_check) {
    const auto best = std::max_element(report.rungs.begin(), report.rungs.end(),
                                       [](const ValidationRung& a, const ValidationRung& b) {
                                         return (a.status == "ok" ? a.omega : -1.0) < (b.status == "ok" ? b.omega : -1.0);
                                       });
    if (best != report.rungs.end() && best->status == "ok" && best->omega > 0.0) {
      report.integrator = integrator_check(config.atom, config.params, best->omega,
                                           config.validation.integrator_time, best->sz_full);
    }
  }
  return report;
}

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? finite_or_null(*v) : nlohmann::json();
}
}  // namespace detail

inline nlohmann::json report_to_json(const ScenarioConfig& config, const ValidationReport& report) {
  using detail::finite_or_null;
  nlohmann::json rungs = nlohmann::json::array();
  for (const ValidationRung& r : report.rungs) {
    rungs.push_back({{"omega_hz", r.omega},
                     {"sz_full", finite_or_null(r.sz_full)},
                     {"sz_effective", finite_or_null(r.sz_effective)},
                     {"sz_abs_error", finite_or_null(r.sz_error)},
                     {"population_max_abs_error", finite_or_null(r.population_error)},
                     {"excited_population", finite_or_null(r.excited_population)},
                     {"residual_full", finite_or_null(r.residual_full)},
                     {"residual_effective", finite_or_null(r.residual_effective)},
                     {"status", r.status}});
  }
  nlohmann::json j = {{"scenario", config.name},
                      {"nuclear_spin_twice", config.atom.nuclear_spin.twice()},
                      {"gamma_pb_hz", config.params.gamma_pb},
                      {"detuning_hz", config.params.detuning},
                      {"rungs", rungs},
                      {"sz_error_log_log_slope", detail::optional_json(report.error_slope)},
                      {"excited_population_log_log_slope", detail::optional_json(report.excited_slope)}};
  if (report.integrator) {
    const IntegratorCheck& c = *report.integrator;
    j["integrator_check"] = {{"omega_hz", c.omega},
                             {"t_final_s", c.t_final},
                             {"sz_evolved", c.sz_evolved},
                             {"sz_null_space", c.sz_null_space},
                             {"relative_difference", c.relative_difference},
                             {"trace", c.trace},
                             {"steps", c.steps},
                             {"completed", c.completed},
                             {"message", c.message}};
  }
  return j;
}

}  // namespace opmag

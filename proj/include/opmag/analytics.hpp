// Closed-form estimates for light shift, line broadening and pumping rates.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "opmag/atom.hpp"
#include "opmag/basis.hpp"
#include "opmag/effective_liouvillian.hpp"

namespace opmag {

namespace detail {
inline double two_i_plus_one(const AtomSpec& atom) { return atom.nuclear_spin.twice() + 1.0; }
}  // namespace detail

/// Linear light shift near Delta = 0: Omega^2 Delta / ((2I+1)(Gamma^2 + Delta_s^2)).
inline double analytic_light_shift(const AtomSpec& atom, const ExperimentParams& params) {
  const double w2 = params.rabi() * params.rabi();
  const double g = params.gamma_pb;
  return w2 * params.detuning / (detail::two_i_plus_one(atom) * (g * g + atom.delta_s * atom.delta_s));
}

/// Precession frequency of the |a, a-1><a, a| coherence: |omega_L| + Omega^2 Delta_aa / ((2I+1)(Gamma^2 + Delta_aa^2)).
inline double tilde_omega(const AtomSpec& atom, const ExperimentParams& params) {
  const double w2 = params.rabi() * params.rabi();
  const double g = params.gamma_pb;
  const double daa = params.detuning - atom.delta_s;
  return std::abs(params.larmor(atom)) + w2 * daa / (detail::two_i_plus_one(atom) * (g * g + daa * daa));
}

/// Expansion of tilde_omega about Delta = 0: |omega_L| - Omega^2 Delta_s / ((2I+1)(Gamma^2 + Delta_s^2)) + delta_omega.
inline double tilde_omega_near_zero(const AtomSpec& atom, const ExperimentParams& params) {
  const double w2 = params.rabi() * params.rabi();
  const double g = params.gamma_pb;
  const double ds = atom.delta_s;
  return std::abs(params.larmor(atom)) - w2 * ds / (detail::two_i_plus_one(atom) * (g * g + ds * ds)) +
         analytic_light_shift(atom, params);
}

/// Line broadening of the |a, a-1><a, a| coherence for electron polarization mean_sz:
/// Omega^2 Gamma / ((2I+1)(Gamma^2 + Delta_aa^2)) + (I+1) gamma / (2I+1)
///   - gamma_se / (2I+1) - 2I gamma_se <S_z> / (2I+1).
inline double analytic_linewidth(const AtomSpec& atom, const ExperimentParams& params, double mean_sz) {
  const double n = detail::two_i_plus_one(atom);
  const double i = atom.nuclear_spin.value();
  const double w2 = params.rabi() * params.rabi();
  const double g = params.gamma_pb;
  const double daa = params.detuning - atom.delta_s;
  const double pump = (g * g + daa * daa) > 0.0 ? w2 * g / (n * (g * g + daa * daa)) : 0.0;
  return pump + (i + 1.0) * params.gamma_total() / n - params.gamma_se / n -
         2.0 * i * params.gamma_se * mean_sz / n;
}

/// Fully polarized form: Omega^2 Gamma / ((2I+1)(Gamma^2 + Delta_aa^2)) + (I+1) gamma_sd / (2I+1).
inline double analytic_linewidth_polarized(const AtomSpec& atom, const ExperimentParams& params) {
  const double n = detail::two_i_plus_one(atom);
  const double i = atom.nuclear_spin.value();
  const double w2 = params.rabi() * params.rabi();
  const double g = params.gamma_pb;
  const double daa = params.detuning - atom.delta_s;
  const double pump = (g * g + daa * daa) > 0.0 ? w2 * g / (n * (g * g + daa * daa)) : 0.0;
  return pump + (i + 1.0) * params.gamma_sd_collision / n;
}

inline double gamma_op(const ExperimentParams& params, double eta_ratio = 1.0) {
  return compact_rates(params, eta_ratio).gamma_op;
}

inline double delta_ls_compact(const ExperimentParams& params, double eta_ratio = 1.0) {
  return compact_rates(params, eta_ratio).delta_ls;
}

struct AnalyticEstimates {
  double tilde_omega = 0.0;
  double tilde_gamma = 0.0;
  double delta_omega_ls = 0.0;
  double gamma_op = 0.0;
  double delta_ls_compact = 0.0;
};

inline AnalyticEstimates analytic_estimates(const AtomSpec& atom, const ExperimentParams& params, double mean_sz) {
  const CompactRates c = compact_rates(params);
  return {tilde_omega(atom, params), analytic_linewidth(atom, params, mean_sz),
          analytic_light_shift(atom, params), c.gamma_op, c.delta_ls};
}

struct SpinTemperatureResult {
  bool is_spin_temperature = true;
  double max_deviation = 0.0;   ///< max over shared M of |p(a,M) - p(b,M)| / max(p(a,M), p(b,M))
  HalfInt worst_m;              ///< M with the largest absolute difference |p(a,M) - p(b,M)|
  double max_abs_difference = 0.0;
};

/// Compares the populations of |a, M> and |b, M> for every M shared by both multiplets.
inline SpinTemperatureResult spin_temperature_test(const AtomSpec& atom, const Eigen::VectorXd& populations,
                                                   double tolerance = 1e-3) {
  const HyperfineBasis basis(atom);
  SpinTemperatureResult r;
  const HalfInt b = atom.lower_f();
  for (HalfInt m = b; m >= -b; m = m - 1) {
    const double pa = populations(basis.ground_index(atom.upper_f(), m));
    const double pb = populations(basis.ground_index(b, m));
    const double diff = std::abs(pa - pb);
    const double scale = std::max(std::abs(pa), std::abs(pb));
    const double rel = scale > 0.0 ? diff / scale : 0.0;
    r.max_deviation = std::max(r.max_deviation, rel);
    if (diff > r.max_abs_difference) {
      r.max_abs_difference = diff;
      r.worst_m = m;
    }
  }
  r.is_spin_temperature = r.max_deviation < tolerance;
  return r;
}

}  // namespace opmag

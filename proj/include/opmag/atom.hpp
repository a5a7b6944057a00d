// Atomic species and experimental scenario parameters.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "opmag/angular_momentum.hpp"
#include "opmag/units.hpp"

namespace opmag {

/// Nuclear spin and hyperfine splittings of an alkali atom on its D1 line.
struct AtomSpec {
  HalfInt nuclear_spin = HalfInt::from_twice(7);
  double delta_s = 9.193e9;  ///< ground hyperfine splitting, Hz
  double delta_p = 1.168e9;  ///< P1/2 hyperfine splitting, Hz
  double gyromagnetic_ratio_e = kElectronGyromagneticRatio;  ///< Hz/G

  HalfInt upper_f() const { return nuclear_spin + kHalf; }  ///< a = I + 1/2
  HalfInt lower_f() const { return nuclear_spin - kHalf; }  ///< b = I - 1/2
  int ground_dim() const { return 2 * nuclear_spin.twice() + 2; }
  int full_dim() const { return 2 * ground_dim(); }

  void validate() const {
    if (nuclear_spin.twice() < 1) {
      throw std::invalid_argument("nuclear spin must be at least 1/2");
    }
    if (!(delta_s > 0.0) || !(delta_p > 0.0)) {
      throw std::invalid_argument("hyperfine splittings must be positive");
    }
    if (!(gyromagnetic_ratio_e > 0.0)) {
      throw std::invalid_argument("gyromagnetic ratio must be positive");
    }
  }

  static AtomSpec cesium133() { return {}; }

  static AtomSpec rubidium87() {
    AtomSpec a;
    a.nuclear_spin = HalfInt::from_twice(3);
    a.delta_s = 6.834682611e9;
    a.delta_p = 0.8148e9;
    return a;
  }
};

/// Pump, collision and field parameters for one scenario. Frequencies in Hz, fields in gauss.
struct ExperimentParams {
  double rabi_prime = 4.1e6 / std::sqrt(2.0 / 3.0);  ///< Omega' of the orbital coupling
  double detuning = 0.0;                             ///< Delta, rotating-frame excited-state energy
  double gamma_pb = 0.6e9;                           ///< pressure broadening
  double gamma_sd_optical = 0.0;                     ///< spontaneous decay of P1/2
  double gamma_se = 1.31e3;                          ///< alkali-alkali spin exchange
  double gamma_sd_collision = 0.22e3;                ///< spin destruction
  double b_z = 0.1;                                  ///< static field, G
  double b_x = 3.0 * kGaussPerNanotesla;             ///< RF amplitude, G
  double rf_frequency = 0.0;                         ///< omega, Hz
  int pump_sign = +1;  ///< -1 models opposite circular polarization by reversing b_z

  /// Effective D1 Rabi frequency Omega = sqrt(2/3) Omega'.
  double rabi() const { return std::sqrt(2.0 / 3.0) * rabi_prime; }
  void set_rabi(double omega) { rabi_prime = omega / std::sqrt(2.0 / 3.0); }

  double gamma_total() const { return gamma_se + gamma_sd_collision; }
  double effective_b_z() const { return pump_sign * b_z; }

  /// Signed Larmor frequency gamma_e B_z / (2I + 1) of the F = a multiplet.
  double larmor(const AtomSpec& atom) const {
    return atom.gyromagnetic_ratio_e * effective_b_z() / (atom.nuclear_spin.twice() + 1.0);
  }

  /// Set when Omega exceeds a tenth of the optical-coherence damping.
  bool weak_driving_violated() const {
    return rabi() > 0.1 * (0.5 * gamma_sd_optical + gamma_pb);
  }

  void validate() const {
    const auto non_negative = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be a finite non-negative rate");
      }
    };
    non_negative(rabi_prime, "rabi_prime");
    non_negative(gamma_pb, "gamma_pb");
    non_negative(gamma_sd_optical, "gamma_sd_optical");
    non_negative(gamma_se, "gamma_se");
    non_negative(gamma_sd_collision, "gamma_sd_collision");
    if (!std::isfinite(detuning) || !std::isfinite(b_z) || !std::isfinite(b_x) ||
        !std::isfinite(rf_frequency)) {
      throw std::invalid_argument("detuning, fields and rf frequency must be finite");
    }
    if (pump_sign != 1 && pump_sign != -1) {
      throw std::invalid_argument("pump_sign must be +1 or -1");
    }
  }
};

}  // namespace opmag

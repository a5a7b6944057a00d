#pragma once

#include <numbers>

namespace opmag {

// Every frequency and rate in the public API is a regular frequency in Hz,
// and every generator this library assembles is expressed in the same units:
// d(rho)/dt = kTwoPi * L * rho with t in seconds. Steady states and
// frequency-domain response are invariant under this uniform scaling, so only
// the time integrator ever applies the factor.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kHz = 1.0;
inline constexpr double kKHz = 1e3;
inline constexpr double kMHz = 1e6;
inline constexpr double kGHz = 1e9;

/// Electron gyromagnetic ratio g_s * mu_B / h in Hz per gauss.
inline constexpr double kElectronGyromagneticRatio = 2.8024952e6;

inline constexpr double kGaussPerNanotesla = 1e-5;

}  // namespace opmag

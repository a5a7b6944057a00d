// Linear response of the ground state to a weak transverse RF field.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opmag/analytics.hpp"
#include "opmag/effective_liouvillian.hpp"
#include "opmag/parallel.hpp"
#include "opmag/steady_state.hpp"

namespace opmag {

/// Solves (L0 - i omega) rho+ + L1+ rho0 = 0 for the positive-frequency part rho+.
///
/// L0 is the effective generator at the stationary <S_z>. The spin-exchange
/// feedback through Tr[S_+ rho+] and Tr[S_- rho+] is kept exact by carrying the two
/// traces as extra unknowns. By default the solve is restricted to the
/// Delta M = +-1 coherences, which L0 does not couple to anything else.
class ResponseSolver {
 public:
  ResponseSolver(const AtomSpec& atom, const ExperimentParams& params, const SteadyStateSolution& steady,
                 bool full_superspace = false) {
    const HyperfineBasis basis(atom);
    const SpinOperators s = electron_spin_ops(basis);
    const Liouvillian gen = assemble_effective_liouvillian(atom, params, {steady.mean_sz, 0.0});
    const Superspace& space = gen.space;

    std::vector<int> keep;
    if (full_superspace) {
      for (int k = 0; k < space.size(); ++k) keep.push_back(k);
    } else {
      keep = space.select([&](int i, int j) {
        return std::abs(basis.level(i).m.twice() - basis.level(j).m.twice()) == 2;
      });
    }
    const int n = static_cast<int>(keep.size());
    const auto restrict_vec = [&](const CVector& v) {
      CVector out(n);
      for (int k = 0; k < n; ++k) out(k) = v(keep[k]);
      return out;
    };
    const auto restrict_row = [&](const Eigen::RowVectorXcd& v) {
      Eigen::RowVectorXcd out(n);
      for (int k = 0; k < n; ++k) out(k) = v(keep[k]);
      return out;
    };

    const CMatrix l0 = gen.at({steady.mean_sz, 0.0});
    system_ = CMatrix::Zero(n + 2, n + 2);
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) system_(p, q) = l0(keep[p], keep[q]);
    }
    const CVector rho0 = space.vectorize(steady.rho0);
    system_.block(0, n, n, 1) = restrict_vec(gen.splus_part * rho0);
    system_.block(0, n + 1, n, 1) = restrict_vec(gen.sminus_part * rho0);
    system_.block(n, 0, 1, n) = -restrict_row(space.trace_functional(s.plus));
    system_.block(n + 1, 0, 1, n) = -restrict_row(space.trace_functional(s.minus));
    system_(n, n) = 1.0;
    system_(n + 1, n + 1) = 1.0;

    const double drive = atom.gyromagnetic_ratio_e * params.b_x;
    const CMatrix src = cplx(0.0, -0.5) * drive * (s.x * steady.rho0 - steady.rho0 * s.x);
    rhs_ = CVector::Zero(n + 2);
    rhs_.head(n) = -restrict_vec(space.vectorize(src));
    readout_ = Eigen::RowVectorXcd::Zero(n + 2);
    readout_.head(n) = 2.0 * restrict_row(space.trace_functional(s.x));
    space_ = space;
    keep_ = std::move(keep);
    n_ = n;
  }

  /// <S_x^+>(omega) = 2 Tr[S_x rho+].
  cplx at(double omega) const { return (readout_ * solve(omega))(0); }

  CMatrix rho_plus(double omega) const {
    const CVector x = solve(omega);
    CVector full = CVector::Zero(space_.size());
    for (int k = 0; k < n_; ++k) full(keep_[k]) = x(k);
    return space_.matrix(full);
  }

  int subspace_size() const { return n_; }

 private:
  CVector solve(double omega) const {
    CMatrix a = system_;
    for (int k = 0; k < n_; ++k) a(k, k) -= cplx(0.0, omega);
    const Eigen::PartialPivLU<CMatrix> lu(a);
    const CVector x = lu.solve(rhs_);
    if (!x.allFinite() || !(std::abs(lu.determinant()) > 0.0)) {
      throw std::runtime_error("response system singular at omega = " + std::to_string(omega) + " Hz");
    }
    return x;
  }

  Superspace space_;
  std::vector<int> keep_;
  int n_ = 0;
  CMatrix system_;
  CVector rhs_;
  Eigen::RowVectorXcd readout_;
};

inline cplx response_at(const AtomSpec& atom, const ExperimentParams& params, const SteadyStateSolution& steady,
                        double omega, bool full_superspace = false) {
  return ResponseSolver(atom, params, steady, full_superspace).at(omega);
}

struct ScanWindow {
  double center = 0.0;
  double halfwidth = 0.0;
  int npoints = 401;
};

struct ResponseCurve {
  std::vector<double> omegas;
  std::vector<cplx> sx_plus;
  double omega_zero = 0.0;
  double linewidth = 0.0;
  double omega_max = 0.0;  ///< location of the maximum of Re<S_x^+>
  double omega_min = 0.0;  ///< location of the minimum of Re<S_x^+>
  double larmor = 0.0;     ///< |omega_L| from B_z
  std::vector<double> resonance_crossings;  ///< every resonance-direction crossing on the grid (interpolated)

  double light_shift() const { return omega_zero - larmor; }
};

class ResonanceError : public std::runtime_error {
 public:
  ResonanceError(const std::string& what, ResponseCurve scan)
      : std::runtime_error(what), scan_(std::move(scan)) {}
  const ResponseCurve& scan() const { return scan_; }

 private:
  ResponseCurve scan_;
};

/// Centered on |omega_L| with halfwidth max(10 gamma~, 50 |shift estimate|), capped at 0.9 |omega_L|
/// so the scan never reaches the counter-rotating resonance.
inline ScanWindow default_scan_window(const AtomSpec& atom, const ExperimentParams& params,
                                      const SteadyStateSolution& steady) {
  const double larmor = std::abs(params.larmor(atom));
  const double width = std::abs(analytic_linewidth(atom, params, std::abs(steady.mean_sz)));
  const double shift = std::max(std::abs(tilde_omega(atom, params) - larmor),
                                std::abs(tilde_omega_near_zero(atom, params) - larmor));
  double half = std::max(10.0 * width, 50.0 * shift);
  if (larmor > 0.0) half = std::min(half, 0.9 * larmor);
  return {larmor, half, 401};
}

namespace detail {

inline double bisect_zero(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double f_lo = f(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Location of the maximum of f on [lo, hi] (unimodal).
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct ResonanceTolerances {
  double zero_crossing = 1e-4;  ///< Hz
  double extrema = 1e-3;        ///< Hz
};

/// Scans Re<S_x^+> on a grid, then refines the zero crossing lying between the
/// scan's maximum and minimum by bisection and both extrema by golden section.
inline ResponseCurve extract_resonance(const AtomSpec& atom, const ExperimentParams& params,
                                       const SteadyStateSolution& steady, std::optional<ScanWindow> scan = {},
                                       unsigned threads = 1, ResonanceTolerances tol = {},
                                       bool full_superspace = false) {
  const ScanWindow w = scan ? *scan : default_scan_window(atom, params, steady);
  if (w.npoints < 3 || !(w.halfwidth > 0.0)) throw std::invalid_argument("scan window needs >= 3 points and positive width");
  const ResponseSolver solver(atom, params, steady, full_superspace);

  ResponseCurve c;
  c.larmor = std::abs(params.larmor(atom));
  c.omegas.resize(static_cast<std::size_t>(w.npoints));
  c.sx_plus.resize(c.omegas.size());
  for (int k = 0; k < w.npoints; ++k) {
    c.omegas[static_cast<std::size_t>(k)] = w.center - w.halfwidth + 2.0 * w.halfwidth * k / (w.npoints - 1);
  }
  parallel_for(c.omegas.size(), threads, [&](std::size_t k) { c.sx_plus[k] = solver.at(c.omegas[k]); });

  const auto re = [&](double om) { return solver.at(om).real(); };
  std::size_t imax = 0, imin = 0;
  for (std::size_t k = 1; k < c.omegas.size(); ++k) {
    if (c.sx_plus[k].real() > c.sx_plus[imax].real()) imax = k;
    if (c.sx_plus[k].real() < c.sx_plus[imin].real()) imin = k;
  }
  // A resonance crosses zero in the direction of the min -> max ordering; crossings the
  // other way between two resonances are anti-resonances and are skipped.
  const std::size_t a = std::min(imax, imin), b = std::max(imax, imin);
  const bool rising = imin < imax;
  std::optional<std::size_t> cross;
  double best_slope = -1.0;
  for (std::size_t k = a; k < b; ++k) {
    const double y0 = c.sx_plus[k].real(), y1 = c.sx_plus[k + 1].real();
    if (((y0 > 0.0) != (y1 > 0.0) || y0 == 0.0) && (y1 > y0) == rising) {
      c.resonance_crossings.push_back(c.omegas[k] + (c.omegas[k + 1] - c.omegas[k]) * y0 / (y0 - y1));
      const double slope = std::abs(y1 - y0);
      if (slope > best_slope) {
        best_slope = slope;
        cross = k;
      }
    }
  }
  if (!cross || a == b) {
    throw ResonanceError("no sign change of Re<S_x^+> in the scan window (window too small?)", c);
  }
  c.omega_zero = detail::bisect_zero(re, c.omegas[*cross], c.omegas[*cross + 1], tol.zero_crossing);

  const auto bracket = [&](std::size_t k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = std::min(k + 1, c.omegas.size() - 1);
    return std::pair<double, double>{c.omegas[lo], c.omegas[hi]};
  };
  const auto [max_lo, max_hi] = bracket(imax);
  const auto [min_lo, min_hi] = bracket(imin);
  c.omega_max = detail::golden_max(re, max_lo, max_hi, tol.extrema);
  c.omega_min = detail::golden_max([&](double om) { return -re(om); }, min_lo, min_hi, tol.extrema);
  c.linewidth = 0.5 * std::abs(c.omega_max - c.omega_min);
  return c;
}

}  // namespace opmag

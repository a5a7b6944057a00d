// Ground-manifold generator after adiabatic elimination of the P1/2 states.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "opmag/atom.hpp"
#include "opmag/basis.hpp"
#include "opmag/full_liouvillian.hpp"
#include "opmag/superspace.hpp"

namespace opmag {

/// Pump-induced rates for one scenario. Multiplets are indexed 0 = a, 1 = b; the
/// magnetic index of a matrix row/column is the position within the multiplet
/// (M descending), so gamma1[f][fp](i, j) is Gamma^(1)_{F M_i F' M_j}.
struct EffectiveRates {
  HyperfineBasis basis;
  double omega = 0.0;     ///< Omega = sqrt(2/3) Omega'
  double gamma_pb = 0.0;  ///< Gamma
  RMatrix detuning;       ///< Delta_FF' (2 x 2)
  CMatrix tilde_detuning; ///< Delta_FF' - i Gamma
  std::array<std::array<CMatrix, 2>, 2> gamma1, gamma2, gamma3;
  std::array<CVector, 2> gamma4;

  HalfInt f_value(int f) const { return f == 0 ? basis.atom().upper_f() : basis.atom().lower_f(); }
  int size(int f) const { return f_value(f).twice() + 1; }
  HalfInt m_value(int f, int i) const { return f_value(f) - i; }
  /// Depletion / light-shift coefficient Gamma_FM = -i Gamma^(4)_FM.
  cplx depletion(int f, int i) const { return cplx(0.0, -1.0) * gamma4[f](i); }
};

namespace detail {

// CG_F(n, M) with zero for projections outside the multiplet.
inline double cg_or_zero(const AtomSpec& atom, int n, HalfInt f, HalfInt m) {
  if (!valid_projection(f, m)) return 0.0;
  return cg_f(atom, n, f, m);
}

}  // namespace detail

/// Delta_FF' = (excited F' energy) - (ground F energy) in the rotating frame.
inline RMatrix hyperfine_detunings(const AtomSpec& atom, const ExperimentParams& params) {
  RMatrix d(2, 2);
  d(0, 0) = params.detuning - atom.delta_s;
  d(0, 1) = params.detuning - atom.delta_s - atom.delta_p;
  d(1, 0) = params.detuning;
  d(1, 1) = params.detuning - atom.delta_p;
  return d;
}

inline EffectiveRates compute_effective_rates(const AtomSpec& atom, const ExperimentParams& params) {
  params.validate();
  EffectiveRates r{HyperfineBasis(atom)};
  r.omega = params.rabi();
  r.gamma_pb = params.gamma_pb;
  r.detuning = hyperfine_detunings(atom, params);
  r.tilde_detuning = r.detuning.cast<cplx>() - CMatrix::Constant(2, 2, cplx(0.0, params.gamma_pb));
  for (int f = 0; f < 2; ++f) {
    for (int fp = 0; fp < 2; ++fp) {
      if (std::abs(r.tilde_detuning(f, fp)) == 0.0) {
        throw std::domain_error("singular detuning: Delta_FF' = 0 with zero pressure broadening (F=" +
                                std::to_string(f) + ", F'=" + std::to_string(fp) + ")");
      }
    }
  }

  const double w2 = r.omega * r.omega;
  const double g = params.gamma_pb;
  const auto cg = [&](int n, int f, HalfInt m) { return detail::cg_or_zero(atom, n, r.f_value(f), m); };
  const HalfInt one = HalfInt::from_twice(2);
  const HalfInt two = HalfInt::from_twice(4);

  for (int f = 0; f < 2; ++f) {
    const int n = r.size(f);
    // Second-order amplitudes through the intermediate excited multiplet F1:
    // u(M) = sum_F1 CG_F1(1, M+1)^2 / tilde(F, F1), v(M) = sum_F1 CG_F1(1, M+1) CG_F1(2, M+1) / tilde(F, F1).
    CVector u(n), v(n);
    for (int i = 0; i < n; ++i) {
      const HalfInt m = r.m_value(f, i);
      u(i) = 0.0;
      v(i) = 0.0;
      for (int f1 = 0; f1 < 2; ++f1) {
        const double c1 = cg(1, f1, m + one);
        u(i) += c1 * c1 / r.tilde_detuning(f, f1);
        v(i) += c1 * cg(2, f1, m + one) / r.tilde_detuning(f, f1);
      }
    }
    r.gamma4[f] = CVector::Zero(n);
    for (int i = 0; i < n; ++i) {
      const HalfInt m = r.m_value(f, i);
      const double c2 = cg(2, f, m);
      for (int fp = 0; fp < 2; ++fp) {
        const double c1 = cg(1, fp, m + one);
        r.gamma4[f](i) += w2 / r.tilde_detuning(f, fp) * c2 * c2 * c1 * c1;
      }
    }
    for (int fp = 0; fp < 2; ++fp) {
      CMatrix g1 = CMatrix::Zero(n, n), g2 = CMatrix::Zero(n, n), g3 = CMatrix::Zero(n, n);
      const double inv_abs2 = 1.0 / std::norm(r.tilde_detuning(f, fp));
      for (int i = 0; i < n; ++i) {
        const HalfInt m = r.m_value(f, i);
        for (int j = 0; j < n; ++j) {
          const HalfInt mp = r.m_value(f, j);
          const double g2_ground = cg(2, f, m) * cg(2, f, mp);
          if (g2_ground == 0.0) continue;
          g1(i, j) = g * w2 * inv_abs2 * g2_ground * cg(1, fp, m + one) * cg(1, fp, mp + one);
          g2(i, j) = g * w2 * g2_ground * cg(2, fp, m) * cg(2, fp, mp) * u(i) * std::conj(u(j));
          g3(i, j) = g * w2 * g2_ground * cg(1, fp, m + two) * cg(1, fp, mp + two) * v(i) * std::conj(v(j));
        }
      }
      r.gamma1[f][fp] = g1;
      r.gamma2[f][fp] = g2;
      r.gamma3[f][fp] = g3;
    }
  }
  return r;
}

/// Ground-manifold hyperfine + Zeeman Hamiltonian.
inline CMatrix ground_hamiltonian(const HyperfineBasis& basis, const ExperimentParams& params) {
  const int n = basis.ground_dim();
  return full_static_hamiltonian(basis, params).topLeftCorner(n, n);
}

/// Adds the three jump sums and the depletion term of the effective equation.
inline void add_pump_terms(SuperopBuilder& b, const EffectiveRates& r) {
  const HyperfineBasis& basis = r.basis;
  const std::array<int, 3> shift{1, 0, 2};  // J^(1): M+1, J^(2): M, J^(3): M+2
  for (int f = 0; f < 2; ++f) {
    const int n = r.size(f);
    for (int fp = 0; fp < 2; ++fp) {
      const std::array<const CMatrix*, 3> tables{&r.gamma1[f][fp], &r.gamma2[f][fp], &r.gamma3[f][fp]};
      for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < n; ++i) {
          const int target_i = basis.ground_index(r.f_value(fp), r.m_value(f, i) + shift[k]);
          if (target_i < 0) continue;
          for (int j = 0; j < n; ++j) {
            const cplx rate = (*tables[k])(i, j);
            if (rate == cplx(0.0)) continue;
            const int target_j = basis.ground_index(r.f_value(fp), r.m_value(f, j) + shift[k]);
            if (target_j < 0) continue;
            b.element(rate, target_i, target_j, basis.ground_index(r.f_value(f), r.m_value(f, i)),
                      basis.ground_index(r.f_value(f), r.m_value(f, j)));
          }
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      const int gi = basis.ground_index(r.f_value(f), r.m_value(f, i));
      for (int j = 0; j < n; ++j) {
        const int gj = basis.ground_index(r.f_value(f), r.m_value(f, j));
        b.element(-(r.depletion(f, i) + std::conj(r.depletion(f, j))), gi, gj, gi, gj);
      }
    }
  }
}

/// Hamiltonian and collision terms shared by every ground-manifold generator.
inline Liouvillian ground_base_liouvillian(const HyperfineBasis& basis, const ExperimentParams& params,
                                           const Superspace& space, const MeanFields& mean_fields) {
  params.validate();
  check_mean_fields(mean_fields);
  Liouvillian l = empty_liouvillian(space, mean_fields);
  SuperopBuilder(l.space, l.base).hamiltonian(ground_hamiltonian(basis, params));
  add_spin_collisions(l, electron_spin_ops(basis), params.gamma_total(), params.gamma_se);
  return l;
}

/// Effective generator on the ground superspace with a-b coherences dropped.
inline Liouvillian assemble_effective_liouvillian(const AtomSpec& atom, const ExperimentParams& params,
                                                  const EffectiveRates& rates, const MeanFields& mean_fields) {
  const HyperfineBasis basis(atom);
  Liouvillian l = ground_base_liouvillian(basis, params, Superspace::same_multiplet(basis), mean_fields);
  SuperopBuilder b(l.space, l.base);
  add_pump_terms(b, rates);
  return l;
}

inline Liouvillian assemble_effective_liouvillian(const AtomSpec& atom, const ExperimentParams& params,
                                                  const MeanFields& mean_fields = {}) {
  return assemble_effective_liouvillian(atom, params, compute_effective_rates(atom, params), mean_fields);
}

/// Optical pumping rate and light shift of the single-Lorentzian limit.
/// eta defaults to Omega; the light shift sign follows the Hamiltonian convention
/// used throughout (excited energy +Delta), i.e. Delta_LS = +eta^2 Delta / (Gamma^2 + Delta^2).
struct CompactRates {
  double gamma_op = 0.0;
  double delta_ls = 0.0;
};

inline CompactRates compact_rates(const ExperimentParams& params, double eta_ratio = 1.0) {
  const double eta = eta_ratio * params.rabi();
  const double g = params.gamma_pb;
  const double d = params.detuning;
  const double den = g * g + d * d;
  if (den == 0.0) throw std::domain_error("compact rates undefined for Gamma = Delta = 0");
  return {eta * eta * g / den, eta * eta * d / den};
}

/// Ground generator with optical pumping reduced to Gamma_OP and Delta_LS (full ground superspace).
inline Liouvillian compact_form_liouvillian(const AtomSpec& atom, const ExperimentParams& params,
                                            const MeanFields& mean_fields = {}, double eta_ratio = 1.0) {
  const HyperfineBasis basis(atom);
  Liouvillian l = ground_base_liouvillian(basis, params, Superspace::full(basis.ground_dim()), mean_fields);
  const CompactRates c = compact_rates(params, eta_ratio);
  const SpinOperators s = electron_spin_ops(basis);
  SuperopBuilder b(l.space, l.base);
  b.sandwich(c.gamma_op, s.plus, s.minus);
  b.sandwich(c.gamma_op, s.z, s.z);
  b.anticommutator(0.5 * c.gamma_op, s.z);
  b.sandwich(-0.75 * c.gamma_op, CMatrix::Identity(basis.ground_dim(), basis.ground_dim()),
             CMatrix::Identity(basis.ground_dim(), basis.ground_dim()));
  b.hamiltonian(c.delta_ls * s.z);
  return l;
}

}  // namespace opmag

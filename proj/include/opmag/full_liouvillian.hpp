// Master equation on the full D1 space (S1/2 + P1/2) and its time integration.
// This is the brute-force reference against which the ground-state effective
// generator is validated.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "opmag/atom.hpp"
#include "opmag/basis.hpp"
#include "opmag/superspace.hpp"
#include "opmag/units.hpp"

namespace opmag {

inline void check_mean_fields(const MeanFields& f) {
  if (!(std::abs(f.sz) <= 0.5 + 1e-12)) {
    throw std::invalid_argument("mean field <S_z> = " + std::to_string(f.sz) + " exceeds 1/2");
  }
  if (!(std::abs(f.s_plus) <= 0.5 + 1e-12)) {
    throw std::invalid_argument("mean field |<S_+>| exceeds 1/2");
  }
}

/// Adds the alkali collision terms carried by every generator in this library:
///   gamma (S.rho.S - 1/2 {rho, S.S})
///   + gamma_se <S_z> (S+ rho S- - S- rho S+ + {rho, S_z})
///   + gamma_se <S_+> (S- rho S_z - S_z rho S- + 1/2 {rho, S-})  + H.c. of the last line.
/// Both mean-field coefficients are fixed by requiring d<S>/dt = 0 when gamma = gamma_se.
/// The mean-field lines go into the parts of `l` that scale with <S_z>, <S_+>, <S_->.
inline void add_spin_collisions(Liouvillian& l, const SpinOperators& s, double gamma, double gamma_se) {
  SuperopBuilder base(l.space, l.base);
  base.sandwich(gamma, s.x, s.x);
  base.sandwich(gamma, s.y, s.y);
  base.sandwich(gamma, s.z, s.z);
  const CMatrix s_squared = s.x * s.x + s.y * s.y + s.z * s.z;
  base.anticommutator(-0.5 * gamma, s_squared);

  SuperopBuilder z(l.space, l.sz_part);
  z.sandwich(gamma_se, s.plus, s.minus);
  z.sandwich(-gamma_se, s.minus, s.plus);
  z.anticommutator(gamma_se, s.z);

  SuperopBuilder p(l.space, l.splus_part);
  p.sandwich(gamma_se, s.minus, s.z);
  p.sandwich(-gamma_se, s.z, s.minus);
  p.anticommutator(0.5 * gamma_se, s.minus);

  SuperopBuilder m(l.space, l.sminus_part);
  m.sandwich(gamma_se, s.z, s.plus);
  m.sandwich(-gamma_se, s.plus, s.z);
  m.anticommutator(0.5 * gamma_se, s.plus);
}

inline Liouvillian empty_liouvillian(const Superspace& space, const MeanFields& fields) {
  Liouvillian l;
  l.space = space;
  const auto n = space.size();
  l.base = CMatrix::Zero(n, n);
  l.sz_part = CMatrix::Zero(n, n);
  l.splus_part = CMatrix::Zero(n, n);
  l.sminus_part = CMatrix::Zero(n, n);
  l.fields = fields;
  return l;
}

/// Hyperfine + Zeeman Hamiltonian in the full space: ground a at +delta_s,
/// excited states at +detuning with excited b lowered by delta_p, and the
/// linear ground Zeeman term M * omega_F with omega_a = -omega_b = omega_L.
inline CMatrix full_static_hamiltonian(const HyperfineBasis& basis, const ExperimentParams& params) {
  const AtomSpec& atom = basis.atom();
  const double omega_l = params.larmor(atom);
  CMatrix h = CMatrix::Zero(basis.full_dim(), basis.full_dim());
  for (int i = 0; i < basis.full_dim(); ++i) {
    const Level& lv = basis.level(i);
    const bool upper = (lv.f == atom.upper_f());
    if (lv.manifold == Manifold::ground) {
      h(i, i) = (upper ? atom.delta_s : 0.0) + lv.m.value() * (upper ? omega_l : -omega_l);
    } else {
      h(i, i) = params.detuning - (upper ? 0.0 : atom.delta_p);
    }
  }
  return h;
}

/// Pump coupling Omega' (|s><p_1| + h.c.) restricted to the D1 manifold.
inline CMatrix pump_hamiltonian(const HyperfineBasis& basis, const ExperimentParams& params) {
  const OpticalJumpOps d = optical_jump_ops(basis);
  return params.rabi_prime * (d[1] + d[1].adjoint());
}

struct FullOperators {
  SpinOperators spin;  // ground electron spin embedded in the full space
  QuenchJumpOps quench;
  OpticalJumpOps optical;
};

inline FullOperators full_operators(const HyperfineBasis& basis) {
  const SpinOperators g = electron_spin_ops(basis);
  return {{embed_ground(basis, g.x), embed_ground(basis, g.y), embed_ground(basis, g.z),
           embed_ground(basis, g.plus), embed_ground(basis, g.minus)},
          quench_jump_ops(basis),
          optical_jump_ops(basis)};
}

/// Light-matter, hyperfine/Zeeman and collision terms of the full master equation,
/// linear for frozen mean fields. The RF drive is provided by `RfDrive`.
inline Liouvillian assemble_full_liouvillian(const AtomSpec& atom, const ExperimentParams& params,
                                             const MeanFields& mean_fields) {
  params.validate();
  check_mean_fields(mean_fields);
  const HyperfineBasis basis(atom);
  const FullOperators ops = full_operators(basis);

  Liouvillian l = empty_liouvillian(Superspace::full(basis.full_dim()), mean_fields);
  SuperopBuilder b(l.space, l.base);
  b.hamiltonian(full_static_hamiltonian(basis, params) + pump_hamiltonian(basis, params));
  for (int q = -1; q <= 1; ++q) b.dissipator(params.gamma_sd_optical, ops.optical[q]);
  b.dissipator(params.gamma_pb, ops.quench.a0);
  b.dissipator(params.gamma_pb, ops.quench.a_plus);
  b.dissipator(params.gamma_pb, ops.quench.a_minus);
  add_spin_collisions(l, ops.spin, params.gamma_total(), params.gamma_se);
  return l;
}

/// Mean fields <S_z>, <S_+> of the ground electron spin for a full-space density matrix.
inline MeanFields full_mean_fields(const FullOperators& ops, const CMatrix& rho) {
  return {(ops.spin.z * rho).trace().real(), (ops.spin.plus * rho).trace()};
}

/// Time-dependent RF term -i gamma_e B_x cos(2 pi omega t) [S_x, rho] over a given superspace.
class RfDrive {
 public:
  RfDrive(const Superspace& space, const CMatrix& s_x, double amplitude_hz, double frequency_hz)
      : amplitude_(amplitude_hz), frequency_(frequency_hz) {
    commutator_ = CMatrix::Zero(space.size(), space.size());
    SuperopBuilder(space, commutator_).hamiltonian(s_x);
  }

  double amplitude() const { return amplitude_; }
  double frequency() const { return frequency_; }
  CMatrix at(double t) const { return amplitude_ * std::cos(kTwoPi * frequency_ * t) * commutator_; }
  /// The superoperator -i [S_x, .] (unit amplitude).
  const CMatrix& commutator() const { return commutator_; }

 private:
  double amplitude_;
  double frequency_;
  CMatrix commutator_;
};

inline RfDrive rf_drive_generator(const AtomSpec& atom, const ExperimentParams& params) {
  const HyperfineBasis basis(atom);
  const FullOperators ops = full_operators(basis);
  return RfDrive(Superspace::full(basis.full_dim()), ops.spin.x,
                 atom.gyromagnetic_ratio_e * params.b_x, params.rf_frequency);
}

/// Restricts `gen` to the elements reachable from the support of v0 through base and
/// sz_part. Returns `gen` unchanged if <S_+> could become nonzero on that set, since the
/// s_plus terms would then couple back to the discarded elements.
inline Liouvillian restrict_to_reachable(const Liouvillian& gen, const CVector& v0, const CMatrix& s_plus) {
  const Superspace& space = gen.space;
  const int n = space.size();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> queue;
  for (int k = 0; k < n; ++k) {
    if (v0(k) != cplx(0.0)) {
      seen[static_cast<std::size_t>(k)] = 1;
      queue.push_back(k);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int k = queue[head];
    for (int p = 0; p < n; ++p) {
      if (!seen[static_cast<std::size_t>(p)] && (gen.base(p, k) != cplx(0.0) || gen.sz_part(p, k) != cplx(0.0))) {
        seen[static_cast<std::size_t>(p)] = 1;
        queue.push_back(p);
      }
    }
  }
  if (static_cast<int>(queue.size()) == n) return gen;
  const Eigen::RowVectorXcd t = space.trace_functional(s_plus);
  for (int k : queue) {
    if (t(k) != cplx(0.0)) return gen;
  }
  const Superspace sub = Superspace::filtered(space.hilbert_dim(), [&](int i, int j) {
    const int k = space.index(i, j);
    return k >= 0 && seen[static_cast<std::size_t>(k)];
  });
  return restrict_liouvillian(gen, sub);
}

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 1e-7;  // s
  double min_step = 1e-16;     // s
  double max_step = std::numeric_limits<double>::infinity();
  int max_steps = 200000;
  bool include_rf_drive = false;
  bool keep_states = true;  // store rho at every accepted step
};

struct TrajectoryPoint {
  double t = 0.0;
  double sz = 0.0;
  cplx s_plus = 0.0;
  double trace = 1.0;
  CMatrix rho;  // empty unless keep_states, except for the final point
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  bool completed = false;
  std::string message;
  int rejected_steps = 0;

  const TrajectoryPoint& last() const { return points.back(); }
};

/// Integrates the full master equation with mean fields re-linearized every step.
/// Each step is an exponential midpoint rule (exact for the frozen linear
/// generator, second order in the mean-field variation); step-doubling gives the
/// local error estimate. On step-size underflow the trajectory is returned with
/// completed = false and the last accepted state.
inline Trajectory evolve_full(const AtomSpec& atom, const ExperimentParams& params, const CMatrix& rho0,
                              double t_final, const EvolveOptions& options = {}) {
  params.validate();
  const HyperfineBasis basis(atom);
  if (rho0.rows() != basis.full_dim() || rho0.cols() != basis.full_dim()) {
    throw std::invalid_argument("initial state has wrong dimension");
  }
  const FullOperators ops = full_operators(basis);
  Liouvillian gen = assemble_full_liouvillian(atom, params, {});
  if (!options.include_rf_drive) gen = restrict_to_reachable(gen, gen.space.vectorize(rho0), ops.spin.plus);
  const Superspace& space = gen.space;
  const RfDrive drive(space, ops.spin.x, atom.gyromagnetic_ratio_e * params.b_x, params.rf_frequency);

  const auto generator = [&](const CVector& v, double t) {
    const CMatrix rho = space.matrix(v);
    MeanFields f = full_mean_fields(ops, rho);
    f.sz = std::clamp(f.sz, -0.5, 0.5);
    if (std::abs(f.s_plus) > 0.5) f.s_plus *= 0.5 / std::abs(f.s_plus);
    CMatrix l = gen.at(f);
    if (options.include_rf_drive) l += drive.at(t);
    return l;
  };
  const auto step = [&](const CVector& v, double t, double dt) -> CVector {
    const CMatrix l0 = generator(v, t);
    const CVector mid = (kTwoPi * 0.5 * dt * l0).exp() * v;
    const CMatrix lm = generator(mid, t + 0.5 * dt);
    return (kTwoPi * dt * lm).exp() * v;
  };
  const auto record = [&](double t, const CVector& v, bool keep) {
    const CMatrix rho = space.matrix(v);
    const MeanFields f = full_mean_fields(ops, rho);
    TrajectoryPoint p{t, f.sz, f.s_plus, rho.trace().real(), keep ? rho : CMatrix()};
    return p;
  };

  Trajectory traj;
  CVector v = space.vectorize(rho0);
  double t = 0.0;
  double dt = std::min(options.initial_step, t_final);
  traj.points.push_back(record(t, v, true));
  int steps = 0;
  while (t < t_final) {
    if (++steps > options.max_steps) {
      traj.message = "maximum number of steps exceeded at t = " + std::to_string(t);
      traj.points.back().rho = space.matrix(v);
      return traj;
    }
    dt = std::min({dt, t_final - t, options.max_step});
    const CVector coarse = step(v, t, dt);
    const CVector half = step(v, t, 0.5 * dt);
    const CVector fine = step(half, t + 0.5 * dt, 0.5 * dt);
    const double scale = options.atol + options.rtol * fine.cwiseAbs().maxCoeff();
    const double err = (fine - coarse).cwiseAbs().maxCoeff() / scale;
    if (std::isfinite(err) && err <= 1.0) {
      t += dt;
      v = fine;
      traj.points.push_back(record(t, v, options.keep_states));
    } else {
      ++traj.rejected_steps;
    }
    const double factor = (err == 0.0) ? 4.0 : std::clamp(0.9 * std::cbrt(1.0 / err), 0.2, 4.0);
    dt *= std::isfinite(factor) ? factor : 0.2;
    if (dt < options.min_step && t < t_final) {
      traj.message = "step size underflow at t = " + std::to_string(t);
      traj.points.back().rho = space.matrix(v);
      return traj;
    }
  }
  traj.points.back().rho = space.matrix(v);
  traj.completed = true;
  return traj;
}

}  // namespace opmag

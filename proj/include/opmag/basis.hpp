// Hyperfine bases of the S1/2 and P1/2 manifolds and the operators built on them.
//
// Level ordering is fixed: ground manifold first, then excited; within a
// manifold F = a before F = b; within a multiplet M descending. Uncoupled
// product states |m_I> (x) |m_s> are ordered m_I descending, then m_s
// descending. All couplings put the nucleus first: |F M> = sum <I m_I; 1/2 m|F M>.
#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "opmag/angular_momentum.hpp"
#include "opmag/atom.hpp"

namespace opmag {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

enum class Manifold { ground, excited };

struct Level {
  Manifold manifold;
  HalfInt f;
  HalfInt m;
};

/// CG_F(n, M) = <I, M - s; 1/2, s | F M> with s = +1/2 for n = 1 and s = -1/2 for n = 2.
inline double cg_f(const AtomSpec& atom, int n, HalfInt f, HalfInt m) {
  const HalfInt s = (n == 1) ? kHalf : -kHalf;
  return clebsch_gordan(atom.nuclear_spin, m - s, kHalf, s, f, m);
}

class HyperfineBasis {
 public:
  explicit HyperfineBasis(const AtomSpec& atom) : atom_(atom) {
    atom_.validate();
    const std::array<HalfInt, 2> multiplets{atom_.upper_f(), atom_.lower_f()};
    for (Manifold manifold : {Manifold::ground, Manifold::excited}) {
      for (HalfInt f : multiplets) {
        for (HalfInt m = f; m >= -f; m = m - 1) levels_.push_back({manifold, f, m});
      }
    }
    const int n = atom_.ground_dim();
    // Electron spin (ground) and J = 1/2 (excited) couple to the nucleus identically.
    coupling_ = RMatrix::Zero(n, n);
    for (int col = 0; col < n; ++col) {
      const Level& lv = levels_[static_cast<std::size_t>(col)];
      for (HalfInt ms : {kHalf, -kHalf}) {
        const HalfInt mi = lv.m - ms;
        if (!valid_projection(atom_.nuclear_spin, mi)) continue;
        coupling_(uncoupled_index(mi, ms), col) =
            clebsch_gordan(atom_.nuclear_spin, mi, kHalf, ms, lv.f, lv.m);
      }
    }
    // |J = 1/2, m_J> in |m_L> (x) |m_s>, rows ordered (m_L = 1, 0, -1) x (m_s = +1/2, -1/2).
    fine_coupling_ = RMatrix::Zero(6, 2);
    for (int col = 0; col < 2; ++col) {
      const HalfInt mj = (col == 0) ? kHalf : -kHalf;
      for (int ml = 1; ml >= -1; --ml) {
        for (HalfInt ms : {kHalf, -kHalf}) {
          const int row = 2 * (1 - ml) + spin_index(ms);
          fine_coupling_(row, col) = clebsch_gordan(HalfInt::from_twice(2), HalfInt::from_twice(2 * ml),
                                                    kHalf, ms, kHalf, mj);
        }
      }
    }
  }

  const AtomSpec& atom() const { return atom_; }
  int ground_dim() const { return atom_.ground_dim(); }
  int full_dim() const { return atom_.full_dim(); }
  const std::vector<Level>& levels() const { return levels_; }
  const Level& level(int i) const { return levels_[static_cast<std::size_t>(i)]; }

  /// Full-space index of |manifold, F, M>, or -1 when the state does not exist.
  int index(Manifold manifold, HalfInt f, HalfInt m) const {
    if (!valid_projection(f, m)) return -1;
    int offset = (manifold == Manifold::excited) ? ground_dim() : 0;
    if (f == atom_.lower_f()) {
      offset += atom_.upper_f().twice() + 1;
    } else if (f != atom_.upper_f()) {
      return -1;
    }
    return offset + (f.twice() - m.twice()) / 2;
  }
  int ground_index(HalfInt f, HalfInt m) const { return index(Manifold::ground, f, m); }

  /// 0 for the F = a multiplet, 1 for F = b.
  int multiplet(int i) const { return level(i).f == atom_.upper_f() ? 0 : 1; }

  /// Unitary |m_I, m_s> -> |F M> table shared by both manifolds (columns are coupled states).
  const RMatrix& coupling_table() const { return coupling_; }
  const RMatrix& fine_coupling_table() const { return fine_coupling_; }

  int uncoupled_index(HalfInt mi, HalfInt ms) const {
    return 2 * ((atom_.nuclear_spin.twice() - mi.twice()) / 2) + spin_index(ms);
  }
  static int spin_index(HalfInt ms) { return ms.twice() > 0 ? 0 : 1; }

 private:
  AtomSpec atom_;
  std::vector<Level> levels_;
  RMatrix coupling_;
  RMatrix fine_coupling_;
};

inline HyperfineBasis build_basis(const AtomSpec& atom) { return HyperfineBasis(atom); }

/// Cartesian and ladder components of an angular-momentum vector operator.
struct SpinOperators {
  CMatrix x, y, z, plus, minus;
};

namespace detail {

// Spin-1/2 matrices in the (+1/2, -1/2) basis.
inline SpinOperators pauli_half() {
  SpinOperators s;
  s.plus = CMatrix::Zero(2, 2);
  s.plus(0, 1) = 1.0;
  s.minus = s.plus.adjoint();
  s.z = CMatrix::Zero(2, 2);
  s.z(0, 0) = 0.5;
  s.z(1, 1) = -0.5;
  s.x = 0.5 * (s.plus + s.minus);
  s.y = cplx(0.0, -0.5) * (s.plus - s.minus);
  return s;
}

inline SpinOperators spin_matrices(HalfInt j) {
  const int n = j.twice() + 1;
  SpinOperators s;
  s.z = CMatrix::Zero(n, n);
  s.plus = CMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double m = j.value() - k;
    s.z(k, k) = m;
    if (k > 0) s.plus(k - 1, k) = std::sqrt(j.value() * (j.value() + 1.0) - m * (m + 1.0));
  }
  s.minus = s.plus.adjoint();
  s.x = 0.5 * (s.plus + s.minus);
  s.y = cplx(0.0, -0.5) * (s.plus - s.minus);
  return s;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Rounding residue from the basis change is flushed to exact zeros so that
// sparsity-driven superoperator assembly sees the true selection rules.
inline CMatrix chop(CMatrix m, double tol = 1e-14) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      cplx& v = m(i, j);
      v = cplx(std::abs(v.real()) < tol ? 0.0 : v.real(), std::abs(v.imag()) < tol ? 0.0 : v.imag());
    }
  }
  return m;
}

inline CMatrix to_coupled(const HyperfineBasis& basis, const CMatrix& uncoupled) {
  const CMatrix u = basis.coupling_table().cast<cplx>();
  return chop(u.adjoint() * uncoupled * u);
}

inline SpinOperators transform(const HyperfineBasis& basis, const SpinOperators& s) {
  return {to_coupled(basis, s.x), to_coupled(basis, s.y), to_coupled(basis, s.z),
          to_coupled(basis, s.plus), to_coupled(basis, s.minus)};
}

}  // namespace detail

/// Electron spin S of the ground manifold in the coupled |F M> basis.
inline SpinOperators electron_spin_ops(const HyperfineBasis& basis) {
  const auto s = detail::pauli_half();
  const CMatrix id = CMatrix::Identity(basis.atom().nuclear_spin.twice() + 1,
                                       basis.atom().nuclear_spin.twice() + 1);
  return detail::transform(basis, {detail::kron(id, s.x), detail::kron(id, s.y),
                                   detail::kron(id, s.z), detail::kron(id, s.plus),
                                   detail::kron(id, s.minus)});
}

/// Nuclear spin I of the ground manifold in the coupled basis.
inline SpinOperators nuclear_spin_ops(const HyperfineBasis& basis) {
  const auto i = detail::spin_matrices(basis.atom().nuclear_spin);
  const CMatrix id = CMatrix::Identity(2, 2);
  return detail::transform(basis, {detail::kron(i.x, id), detail::kron(i.y, id),
                                   detail::kron(i.z, id), detail::kron(i.plus, id),
                                   detail::kron(i.minus, id)});
}

/// Total angular momentum F = I + S of the ground manifold.
inline SpinOperators total_angular_momentum_ops(const HyperfineBasis& basis) {
  const auto s = electron_spin_ops(basis);
  const auto i = nuclear_spin_ops(basis);
  return {s.x + i.x, s.y + i.y, s.z + i.z, s.plus + i.plus, s.minus + i.minus};
}

/// Places a ground-manifold operator in the ground block of the full D1 space.
inline CMatrix embed_ground(const HyperfineBasis& basis, const CMatrix& op) {
  CMatrix out = CMatrix::Zero(basis.full_dim(), basis.full_dim());
  out.topLeftCorner(basis.ground_dim(), basis.ground_dim()) = op;
  return out;
}

/// Full-space operator whose excited -> ground block is `uncoupled_block` in product bases.
inline CMatrix lowering_from_uncoupled(const HyperfineBasis& basis, const CMatrix& uncoupled_block) {
  const int n = basis.ground_dim();
  CMatrix out = CMatrix::Zero(basis.full_dim(), basis.full_dim());
  out.block(0, n, n, n) = detail::to_coupled(basis, uncoupled_block);
  return out;
}

/// Buffer-gas quenching jump operators A_0, A_{+1}, A_{-1} acting on J = 1/2 (x) nucleus.
struct QuenchJumpOps {
  CMatrix a0, a_plus, a_minus;
};

inline QuenchJumpOps quench_jump_ops(const HyperfineBasis& basis) {
  const int ni = basis.atom().nuclear_spin.twice() + 1;
  const CMatrix id = CMatrix::Identity(ni, ni);
  CMatrix keep = CMatrix::Identity(2, 2);  // |S, m><P, m|
  CMatrix flip_down = CMatrix::Zero(2, 2);  // |S, -1/2><P, +1/2|
  flip_down(1, 0) = 1.0;
  CMatrix flip_up = CMatrix::Zero(2, 2);  // |S, +1/2><P, -1/2|
  flip_up(0, 1) = 1.0;
  return {lowering_from_uncoupled(basis, detail::kron(id, keep)),
          lowering_from_uncoupled(basis, detail::kron(id, flip_down)),
          lowering_from_uncoupled(basis, detail::kron(id, flip_up))};
}

/// Orbital lowering |s><p_l| (x) 1_spin (x) 1_nucleus restricted to P1/2, indexed by l + 1.
struct OpticalJumpOps {
  std::array<CMatrix, 3> d;
  const CMatrix& operator[](int l) const { return d[static_cast<std::size_t>(l + 1)]; }
};

inline OpticalJumpOps optical_jump_ops(const HyperfineBasis& basis) {
  const int ni = basis.atom().nuclear_spin.twice() + 1;
  const CMatrix id = CMatrix::Identity(ni, ni);
  const RMatrix& fine = basis.fine_coupling_table();
  OpticalJumpOps ops;
  for (int l = -1; l <= 1; ++l) {
    // <s, m_s| D_l |J = 1/2, m_J> = <1 l; 1/2 m_s | 1/2 m_J>
    CMatrix block = CMatrix::Zero(2, 2);
    for (int is = 0; is < 2; ++is) {
      for (int jm = 0; jm < 2; ++jm) block(is, jm) = fine(2 * (1 - l) + is, jm);
    }
    ops.d[static_cast<std::size_t>(l + 1)] = lowering_from_uncoupled(basis, detail::kron(id, block));
  }
  return ops;
}

}  // namespace opmag

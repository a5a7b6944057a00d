// Vectorized density matrices and superoperator assembly.
#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opmag/basis.hpp"

namespace opmag {

/// An ordered set of retained matrix elements (i, j) of a Hilbert-space operator.
/// Elements are enumerated row-major; dropped elements are identically zero.
class Superspace {
 public:
  Superspace() = default;

  static Superspace full(int dim) {
    return filtered(dim, [](int, int) { return true; });
  }

  static Superspace filtered(int dim, const std::function<bool(int, int)>& keep) {
    Superspace s;
    s.dim_ = dim;
    s.lookup_.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), -1);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        if (!keep(i, j)) continue;
        s.lookup_[static_cast<std::size_t>(i * dim + j)] = static_cast<int>(s.pairs_.size());
        s.pairs_.emplace_back(i, j);
      }
    }
    return s;
  }

  /// Ground-manifold elements within a single hyperfine multiplet (a-b coherences dropped).
  static Superspace same_multiplet(const HyperfineBasis& basis) {
    return filtered(basis.ground_dim(),
                    [&](int i, int j) { return basis.multiplet(i) == basis.multiplet(j); });
  }

  int hilbert_dim() const { return dim_; }
  int size() const { return static_cast<int>(pairs_.size()); }
  std::pair<int, int> element(int k) const { return pairs_[static_cast<std::size_t>(k)]; }
  int index(int i, int j) const { return lookup_[static_cast<std::size_t>(i * dim_ + j)]; }

  CVector vectorize(const CMatrix& op) const {
    CVector v(size());
    for (int k = 0; k < size(); ++k) v(k) = op(pairs_[k].first, pairs_[k].second);
    return v;
  }

  CMatrix matrix(const CVector& v) const {
    CMatrix op = CMatrix::Zero(dim_, dim_);
    for (int k = 0; k < size(); ++k) op(pairs_[k].first, pairs_[k].second) = v(k);
    return op;
  }

  /// Row vector t with t . vec(X) = Tr[op X] over the retained elements.
  Eigen::RowVectorXcd trace_functional(const CMatrix& op) const {
    Eigen::RowVectorXcd t(size());
    for (int k = 0; k < size(); ++k) t(k) = op(pairs_[k].second, pairs_[k].first);
    return t;
  }

  /// Positions (within this superspace) of elements satisfying `pred`.
  std::vector<int> select(const std::function<bool(int, int)>& pred) const {
    std::vector<int> out;
    for (int k = 0; k < size(); ++k) {
      if (pred(pairs_[k].first, pairs_[k].second)) out.push_back(k);
    }
    return out;
  }

 private:
  int dim_ = 0;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<int> lookup_;
};

/// Accumulates superoperator terms into a dense matrix over a Superspace.
class SuperopBuilder {
 public:
  SuperopBuilder(const Superspace& space, CMatrix& target) : space_(space), m_(target) {
    if (m_.rows() != space.size() || m_.cols() != space.size()) {
      m_ = CMatrix::Zero(space.size(), space.size());
    }
  }

  /// c * A rho B
  void sandwich(cplx c, const CMatrix& a, const CMatrix& b) {
    if (c == cplx(0.0)) return;
    const int n = space_.hilbert_dim();
    std::vector<std::vector<std::pair<int, cplx>>> a_rows(static_cast<std::size_t>(n));
    std::vector<std::vector<std::pair<int, cplx>>> b_cols(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        if (a(i, k) != cplx(0.0)) a_rows[i].emplace_back(k, a(i, k));
        if (b(i, k) != cplx(0.0)) b_cols[k].emplace_back(i, b(i, k));
      }
    }
    for (int p = 0; p < space_.size(); ++p) {
      const auto [i, j] = space_.element(p);
      for (const auto& [k, aik] : a_rows[i]) {
        for (const auto& [l, blj] : b_cols[j]) {
          const int q = space_.index(k, l);
          if (q >= 0) m_(p, q) += c * aik * blj;
        }
      }
    }
  }

  /// c * A rho
  void left(cplx c, const CMatrix& a) { sandwich(c, a, identity()); }
  /// c * rho B
  void right(cplx c, const CMatrix& b) { sandwich(c, identity(), b); }
  /// c * {rho, A}
  void anticommutator(cplx c, const CMatrix& a) {
    left(c, a);
    right(c, a);
  }
  /// -i [H, rho]
  void hamiltonian(const CMatrix& h) {
    left(cplx(0.0, -1.0), h);
    right(cplx(0.0, 1.0), h);
  }
  /// rate * (L rho L^dagger - 1/2 {L^dagger L, rho})
  void dissipator(double rate, const CMatrix& l) {
    if (rate == 0.0) return;
    sandwich(rate, l, l.adjoint());
    const CMatrix ldl = l.adjoint() * l;
    anticommutator(-0.5 * rate, ldl);
  }
  /// Adds c to the coupling (i, j) <- (k, l) when both elements are retained.
  void element(cplx c, int i, int j, int k, int l) {
    const int p = space_.index(i, j);
    const int q = space_.index(k, l);
    if (p >= 0 && q >= 0) m_(p, q) += c;
  }

 private:
  CMatrix identity() const { return CMatrix::Identity(space_.hilbert_dim(), space_.hilbert_dim()); }
  const Superspace& space_;
  CMatrix& m_;
};

/// Self-consistent spin-exchange mean fields <S_z> and <S_+>.
struct MeanFields {
  double sz = 0.0;
  cplx s_plus = 0.0;
};

/// A generator that is affine in the mean fields:
/// L(s) = base + sz * sz_part + s_plus * splus_part + conj(s_plus) * sminus_part.
struct Liouvillian {
  Superspace space;
  CMatrix base;
  CMatrix sz_part;
  CMatrix splus_part;
  CMatrix sminus_part;
  MeanFields fields;

  CMatrix at(const MeanFields& f) const {
    CMatrix m = base + f.sz * sz_part;
    if (f.s_plus != cplx(0.0)) m += f.s_plus * splus_part + std::conj(f.s_plus) * sminus_part;
    return m;
  }
  CMatrix matrix() const { return at(fields); }

  /// L rho for an operator rho, with the stored mean fields.
  CMatrix apply(const CMatrix& rho) const { return space.matrix(matrix() * space.vectorize(rho)); }
};

/// Restriction of `l` to a sub-superspace of the same Hilbert space. Exact only when
/// the retained elements form an invariant subspace of every part of the generator.
inline Liouvillian restrict_liouvillian(const Liouvillian& l, const Superspace& sub) {
  if (sub.hilbert_dim() != l.space.hilbert_dim()) throw std::invalid_argument("Hilbert dimensions differ");
  std::vector<int> map(static_cast<std::size_t>(sub.size()));
  for (int k = 0; k < sub.size(); ++k) {
    const auto [i, j] = sub.element(k);
    map[static_cast<std::size_t>(k)] = l.space.index(i, j);
    if (map[static_cast<std::size_t>(k)] < 0) throw std::invalid_argument("sub-superspace not contained in parent");
  }
  const auto cut = [&](const CMatrix& m) {
    CMatrix out(sub.size(), sub.size());
    for (int p = 0; p < sub.size(); ++p) {
      for (int q = 0; q < sub.size(); ++q) out(p, q) = m(map[p], map[q]);
    }
    return out;
  };
  return {sub, cut(l.base), cut(l.sz_part), cut(l.splus_part), cut(l.sminus_part), l.fields};
}

/// Dimensionless steady-state residual ||L v||_inf / (||L||_inf ||v||_inf).
inline double relative_residual(const CMatrix& l, const CVector& v) {
  const double scale = l.cwiseAbs().rowwise().sum().maxCoeff() * v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (l * v).cwiseAbs().maxCoeff() / scale;
}

}  // namespace opmag

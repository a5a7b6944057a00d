#pragma once

#include <random>

#include "opmag/atom.hpp"
#include "opmag/basis.hpp"

namespace opmag::testing {

/// Hydrogen-like I = 1/2 atom: the smallest system with two hyperfine multiplets.
inline AtomSpec spin_half_atom() {
  AtomSpec a;
  a.nuclear_spin = HalfInt::from_twice(1);
  a.delta_s = 1.42e9;
  a.delta_p = 0.3e9;
  return a;
}

/// G G^dagger / Tr with complex Gaussian G: a full-rank random state.
inline CMatrix random_density_matrix(int dim, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = cplx(n(rng), n(rng));
  }
  CMatrix rho = g * g.adjoint();
  return rho / rho.trace();
}

}  // namespace opmag::testing

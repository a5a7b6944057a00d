// Population-only reduction of the effective equation.
#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "opmag/effective_liouvillian.hpp"
#include "opmag/steady_state.hpp"

namespace opmag {

/// dp/dt = (base + <S_z> sz_part) p on the 4I+2 ground populations (basis order).
struct RateEquations {
  Eigen::MatrixXd base;
  Eigen::MatrixXd sz_part;

  Eigen::MatrixXd at(double sz) const { return base + sz * sz_part; }
};

/// Built from transition probabilities |<j|S_k|i>|^2 and the diagonal pump rates,
/// without reference to the superoperator.
inline RateEquations rate_equations(const AtomSpec& atom, const ExperimentParams& params,
                                    const EffectiveRates& rates) {
  const HyperfineBasis basis(atom);
  const SpinOperators s = electron_spin_ops(basis);
  const int n = basis.ground_dim();
  const double gamma = params.gamma_total();
  const double gse = params.gamma_se;

  RateEquations eq{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      eq.base(j, i) += gamma * (std::norm(s.x(j, i)) + std::norm(s.y(j, i)) + std::norm(s.z(j, i)));
      eq.sz_part(j, i) += gse * (std::norm(s.plus(j, i)) - std::norm(s.minus(j, i)));
    }
    eq.base(j, j) -= 0.75 * gamma;
    eq.sz_part(j, j) += 2.0 * gse * s.z(j, j).real();
  }

  const std::array<int, 3> shift{1, 0, 2};
  for (int f = 0; f < 2; ++f) {
    for (int i = 0; i < rates.size(f); ++i) {
      const HalfInt m = rates.m_value(f, i);
      const int from = basis.ground_index(rates.f_value(f), m);
      eq.base(from, from) -= 2.0 * rates.depletion(f, i).real();
      for (int fp = 0; fp < 2; ++fp) {
        const std::array<const CMatrix*, 3> tables{&rates.gamma1[f][fp], &rates.gamma2[f][fp],
                                                   &rates.gamma3[f][fp]};
        for (int k = 0; k < 3; ++k) {
          const int to = basis.ground_index(rates.f_value(fp), m + shift[k]);
          if (to >= 0) eq.base(to, from) += (*tables[k])(i, i).real();
        }
      }
    }
  }
  return eq;
}

struct RateSteadyState {
  Eigen::VectorXd populations;
  double mean_sz = 0.0;
  int iterations = 0;
};

inline RateSteadyState solve_rate_equations(const AtomSpec& atom, const ExperimentParams& params,
                                            const SteadyStateOptions& options = {}) {
  options.validate();
  const HyperfineBasis basis(atom);
  const RateEquations eq = rate_equations(atom, params, compute_effective_rates(atom, params));
  const Eigen::VectorXd sz = electron_spin_ops(basis).z.diagonal().real();
  const int n = basis.ground_dim();
  const auto solve_at = [&](double s) {
    Eigen::MatrixXd a = eq.at(s);
    a.row(0).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;
    return Eigen::VectorXd(a.partialPivLu().solve(rhs));
  };
  const FixedPointResult fp = damped_fixed_point([&](double s) { return sz.dot(solve_at(s)); },
                                                 options.initial_sz, options.alpha, options.max_iter,
                                                 options.sz_tolerance);
  if (!fp.converged) throw NonConvergenceError("rate-equation mean-field iteration did not converge", fp.history);
  RateSteadyState out;
  out.populations = solve_at(fp.s);
  out.mean_sz = sz.dot(out.populations);
  out.iterations = fp.iterations;
  return out;
}

}  // namespace opmag

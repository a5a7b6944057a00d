// Self-consistent steady states of the mean-field generators.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opmag/atom.hpp"
#include "opmag/basis.hpp"
#include "opmag/effective_liouvillian.hpp"
#include "opmag/full_liouvillian.hpp"
#include "opmag/superspace.hpp"

namespace opmag {

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct SteadyStateOptions {
  double alpha = 0.5;            ///< damping of the mean-field update
  int max_iter = 2000;
  double sz_tolerance = 1e-12;   ///< on |s_{k+1} - s_k|
  double residual_tolerance = 1e-10;
  double initial_sz = 0.0;
  double rank_tolerance = 1e-12; ///< relative pivot threshold for degeneracy detection

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");
    if (!(sz_tolerance > 0.0) || !(residual_tolerance > 0.0) || !(rank_tolerance > 0.0)) {
      throw std::invalid_argument("tolerances must be positive");
    }
  }
};

/// Result of a scalar damped fixed-point search s = g(s).
struct FixedPointResult {
  double s = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_bisection = false;
  std::vector<double> history;
};

/// Damped iteration s <- (1 - alpha) s + alpha g(s) on [-1/2, 1/2]. When the
/// increments keep alternating in sign without shrinking, the last two iterates
/// bracket the root of g(s) - s and the search switches to bisection.
inline FixedPointResult damped_fixed_point(const std::function<double(double)>& g, double s0,
                                           double alpha, int max_iter, double tol) {
  FixedPointResult r;
  double s = std::clamp(s0, -0.5, 0.5);
  r.history.push_back(s);
  double prev_step = 0.0;
  int alternations = 0;
  for (int k = 1; k <= max_iter; ++k) {
    const double gs = g(s);
    const double step = alpha * (gs - s);
    const double next = std::clamp(s + step, -0.5, 0.5);
    r.iterations = k;
    r.history.push_back(next);
    if (std::abs(next - s) < tol) {
      r.s = next;
      r.converged = true;
      return r;
    }
    const bool alternating = prev_step != 0.0 && (step > 0.0) != (prev_step > 0.0) &&
                             std::abs(step) > 0.7 * std::abs(prev_step);
    alternations = alternating ? alternations + 1 : 0;
    if (alternations >= 6) {
      double lo = std::min(s, next), hi = std::max(s, next);
      double f_lo = g(lo) - lo;
      const double f_hi = g(hi) - hi;
      if ((f_lo > 0.0) != (f_hi > 0.0)) {
        r.used_bisection = true;
        while (hi - lo >= tol && r.iterations < max_iter) {
          const double mid = 0.5 * (lo + hi);
          const double f_mid = g(mid) - mid;
          ++r.iterations;
          r.history.push_back(mid);
          if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
          } else {
            hi = mid;
          }
        }
        r.s = 0.5 * (lo + hi);
        r.converged = hi - lo < tol;
        return r;
      }
      alternations = 0;
    }
    prev_step = step;
    s = next;
  }
  r.s = s;
  return r;
}

/// Solves L v = 0 with t.v = 1 by replacing one row of L with the trace functional t.
/// The replaced row is the first population row, which is redundant because the
/// population rows of a trace-preserving generator sum to zero.
inline CVector null_vector_with_trace(const CMatrix& l, const Eigen::RowVectorXcd& trace_row, int replace_row) {
  CMatrix a = l;
  a.row(replace_row) = trace_row;
  CVector rhs = CVector::Zero(a.rows());
  rhs(replace_row) = 1.0;
  return a.partialPivLu().solve(rhs);
}

/// Number of independent stationary states of L (1 unless the dynamics is reducible).
inline int null_space_dimension(const CMatrix& l, double rank_tolerance) {
  Eigen::FullPivLU<CMatrix> lu(l);
  lu.setThreshold(rank_tolerance);
  return static_cast<int>(l.cols() - lu.rank());
}

/// Self-consistent stationary state of an affine mean-field generator.
struct GeneratorSteadyState {
  CMatrix rho;
  double mean_sz = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool degenerate = false;
  bool used_bisection = false;
  std::vector<double> history;
};

/// `s_z` is the electron-spin operator on the generator's Hilbert space; <S_+> is pinned to 0.
inline GeneratorSteadyState solve_generator_steady_state(const Liouvillian& gen, const CMatrix& s_z,
                                                         const SteadyStateOptions& options = {}) {
  options.validate();
  const Superspace& space = gen.space;
  const int dim = space.hilbert_dim();
  const Eigen::RowVectorXcd trace_row = space.trace_functional(CMatrix::Identity(dim, dim));
  const Eigen::RowVectorXcd sz_row = space.trace_functional(s_z);
  const int replace_row = space.index(0, 0);
  if (replace_row < 0) throw std::logic_error("superspace must retain the first population");

  GeneratorSteadyState out;
  const auto solve_at = [&](double s) { return null_vector_with_trace(gen.at({s, 0.0}), trace_row, replace_row); };

  if (null_space_dimension(gen.at({options.initial_sz, 0.0}), options.rank_tolerance) > 1) {
    out.degenerate = true;
    out.rho = CMatrix::Identity(dim, dim) / static_cast<double>(dim);
    out.mean_sz = (s_z * out.rho).trace().real();
    out.residual = relative_residual(gen.at({out.mean_sz, 0.0}), space.vectorize(out.rho));
    return out;
  }

  const auto g = [&](double s) { return std::clamp((sz_row * solve_at(s))(0).real(), -0.5, 0.5); };
  FixedPointResult fp = damped_fixed_point(g, options.initial_sz, options.alpha, options.max_iter,
                                           options.sz_tolerance);
  if (!fp.converged) {
    throw NonConvergenceError("mean-field iteration did not converge in " + std::to_string(fp.iterations) +
                                  " iterations (last <S_z> = " + std::to_string(fp.s) + ")",
                              fp.history);
  }
  const CVector v = solve_at(fp.s);
  out.rho = space.matrix(v);
  out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
  out.mean_sz = (s_z * out.rho).trace().real();
  out.iterations = fp.iterations;
  out.used_bisection = fp.used_bisection;
  out.history = std::move(fp.history);
  out.residual = relative_residual(gen.at({out.mean_sz, 0.0}), space.vectorize(out.rho));
  if (!(out.residual <= options.residual_tolerance)) {
    throw NonConvergenceError("steady-state residual " + std::to_string(out.residual) + " above tolerance",
                              out.history);
  }
  return out;
}

/// Stationary state of the effective ground equation.
struct SteadyStateSolution {
  AtomSpec atom;
  CMatrix rho0;
  double mean_sz = 0.0;
  Eigen::VectorXd populations;  ///< diagonal of rho0 in basis order
  int iterations = 0;
  double residual = 0.0;
  bool degenerate = false;
  double transverse = 0.0;  ///< |Tr[S_+ rho0]|, expected to vanish
  std::vector<double> history;
};

inline SteadyStateSolution make_solution(const AtomSpec& atom, GeneratorSteadyState g, const CMatrix& s_plus) {
  SteadyStateSolution s;
  s.atom = atom;
  s.rho0 = std::move(g.rho);
  s.mean_sz = g.mean_sz;
  s.populations = s.rho0.diagonal().real();
  s.iterations = g.iterations;
  s.residual = g.residual;
  s.degenerate = g.degenerate;
  s.transverse = std::abs((s_plus * s.rho0).trace());
  s.history = std::move(g.history);
  return s;
}

inline SteadyStateSolution solve_steady_state(const AtomSpec& atom, const ExperimentParams& params,
                                              const SteadyStateOptions& options = {}) {
  const HyperfineBasis basis(atom);
  const SpinOperators s = electron_spin_ops(basis);
  const Liouvillian gen = assemble_effective_liouvillian(atom, params);
  return make_solution(atom, solve_generator_steady_state(gen, s.z, options), s.plus);
}

inline SteadyStateSolution solve_compact_steady_state(const AtomSpec& atom, const ExperimentParams& params,
                                                      const SteadyStateOptions& options = {},
                                                      double eta_ratio = 1.0) {
  const HyperfineBasis basis(atom);
  const SpinOperators s = electron_spin_ops(basis);
  const Liouvillian gen = compact_form_liouvillian(atom, params, {}, eta_ratio);
  return make_solution(atom, solve_generator_steady_state(gen, s.z, options), s.plus);
}

/// Stationary state of the full D1 master equation (no RF drive).
struct FullSteadyState {
  CMatrix rho;
  double mean_sz = 0.0;
  Eigen::VectorXd ground_populations;
  double excited_population = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

inline FullSteadyState solve_full_steady_state(const AtomSpec& atom, const ExperimentParams& params,
                                               SteadyStateOptions options = {}) {
  const HyperfineBasis basis(atom);
  const FullOperators ops = full_operators(basis);
  const Liouvillian gen = assemble_full_liouvillian(atom, params, {});
  // The full generator spans GHz to kHz scales, so its residual is judged against a looser bound.
  options.residual_tolerance = std::max(options.residual_tolerance, 1e-8);
  GeneratorSteadyState g = solve_generator_steady_state(gen, ops.spin.z, options);
  FullSteadyState out;
  const int n = basis.ground_dim();
  out.ground_populations = g.rho.diagonal().real().head(n);
  out.excited_population = g.rho.diagonal().real().tail(n).sum();
  out.rho = std::move(g.rho);
  out.mean_sz = g.mean_sz;
  out.iterations = g.iterations;
  out.residual = g.residual;
  return out;
}

struct PopulationEntry {
  HalfInt f;
  HalfInt m;
  double p = 0.0;
};

/// Populations of the ground levels in basis order (F = a then b, M descending).
inline std::vector<PopulationEntry> populations(const SteadyStateSolution& solution) {
  const HyperfineBasis basis(solution.atom);
  std::vector<PopulationEntry> out;
  for (int i = 0; i < basis.ground_dim(); ++i) {
    out.push_back({basis.level(i).f, basis.level(i).m, solution.populations(i)});
  }
  return out;
}

/// Total population of the F = a (index 0) or F = b (index 1) multiplet.
inline double multiplet_population(const SteadyStateSolution& solution, int multiplet) {
  const HyperfineBasis basis(solution.atom);
  double p = 0.0;
  for (int i = 0; i < basis.ground_dim(); ++i) {
    if (basis.multiplet(i) == multiplet) p += solution.populations(i);
  }
  return p;
}

}  // namespace opmag

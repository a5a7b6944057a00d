#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "opmag/effective_liouvillian.hpp"
#include "opmag/rate_equations.hpp"
#include "opmag/steady_state.hpp"
#include "test_util.hpp"

using namespace opmag;
using opmag::testing::spin_half_atom;

namespace {

ExperimentParams pumped(double detuning) {
  ExperimentParams p;
  p.detuning = detuning;
  return p;
}

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(EffectiveRates, HyperfineDetunings) {
  const AtomSpec cs = AtomSpec::cesium133();
  const RMatrix d = hyperfine_detunings(cs, pumped(1e9));
  EXPECT_DOUBLE_EQ(d(0, 0), 1e9 - cs.delta_s);
  EXPECT_DOUBLE_EQ(d(0, 1), 1e9 - cs.delta_s - cs.delta_p);
  EXPECT_DOUBLE_EQ(d(1, 0), 1e9);
  EXPECT_DOUBLE_EQ(d(1, 1), 1e9 - cs.delta_p);
}

TEST(EffectiveRates, ScaleWithRabiSquared) {
  const AtomSpec cs = AtomSpec::cesium133();
  ExperimentParams p = pumped(2e8);
  const EffectiveRates r1 = compute_effective_rates(cs, p);
  p.set_rabi(2.0 * p.rabi());
  const EffectiveRates r2 = compute_effective_rates(cs, p);
  for (int f = 0; f < 2; ++f) {
    EXPECT_LT(max_abs(r2.gamma4[f] - 4.0 * r1.gamma4[f]), 1e-12 * max_abs(r2.gamma4[f]));
    for (int fp = 0; fp < 2; ++fp) {
      EXPECT_LT(max_abs(r2.gamma1[f][fp] - 4.0 * r1.gamma1[f][fp]), 1e-12 * max_abs(r2.gamma1[f][fp]) + 1e-300);
      EXPECT_LT(max_abs(r2.gamma2[f][fp] - 4.0 * r1.gamma2[f][fp]), 1e-12 * max_abs(r2.gamma2[f][fp]) + 1e-300);
      EXPECT_LT(max_abs(r2.gamma3[f][fp] - 4.0 * r1.gamma3[f][fp]), 1e-12 * max_abs(r2.gamma3[f][fp]) + 1e-300);
    }
  }
}

// Each jump-rate table is a Lindblad coefficient matrix: Hermitian and positive semidefinite.
TEST(EffectiveRates, JumpTablesArePositive) {
  for (const AtomSpec& atom : {AtomSpec::cesium133(), AtomSpec::rubidium87()}) {
    for (double delta : {-3e9, 0.0, 4e9, 9.2e9}) {
      const EffectiveRates r = compute_effective_rates(atom, pumped(delta));
      for (int f = 0; f < 2; ++f) {
        for (int fp = 0; fp < 2; ++fp) {
          for (const CMatrix* t : {&r.gamma1[f][fp], &r.gamma2[f][fp], &r.gamma3[f][fp]}) {
            const double scale = std::max(max_abs(*t), 1e-300);
            EXPECT_LT(max_abs(*t - t->adjoint()), 1e-12 * scale);
            const Eigen::SelfAdjointEigenSolver<CMatrix> es(*t);
            EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12 * scale);
          }
        }
        EXPECT_TRUE(r.gamma4[f].allFinite());
        for (int i = 0; i < r.size(f); ++i) EXPECT_GE(r.depletion(f, i).real(), -1e-12);
      }
    }
  }
}

// sigma+ light only couples m_s = -1/2, so the stretched state |a, a> is dark.
TEST(EffectiveRates, StretchedStateIsDark) {
  const EffectiveRates r = compute_effective_rates(AtomSpec::cesium133(), pumped(0.0));
  EXPECT_EQ(r.depletion(0, 0), cplx(0.0));
  for (int fp = 0; fp < 2; ++fp) {
    EXPECT_EQ(max_abs(r.gamma1[0][fp].row(0)), 0.0);
    EXPECT_EQ(max_abs(r.gamma2[0][fp].row(0)), 0.0);
    EXPECT_EQ(max_abs(r.gamma3[0][fp].row(0)), 0.0);
  }
  for (int f = 0; f < 2; ++f) {
    for (int i = 1; i < r.size(f); ++i) EXPECT_GT(r.depletion(f, i).real(), 0.0);
  }
}

// Gamma^(1) leaves through A_0, which keeps (F, M) of the excited state; a ground state
// |F, M> therefore feeds |F', M + 1> in proportion to CG_F'(1, M + 1)^2.
TEST(EffectiveRates, Gamma1SelectionRule) {
  const AtomSpec rb = AtomSpec::rubidium87();
  const EffectiveRates r = compute_effective_rates(rb, pumped(5e8));
  for (int f = 0; f < 2; ++f) {
    for (int fp = 0; fp < 2; ++fp) {
      for (int i = 0; i < r.size(f); ++i) {
        const HalfInt target = r.m_value(f, i) + 1;
        if (!valid_projection(r.f_value(fp), target)) EXPECT_EQ(r.gamma1[f][fp](i, i), cplx(0.0));
      }
    }
  }
}

TEST(EffectiveRates, SingularDetuningThrows) {
  ExperimentParams p;
  p.gamma_pb = 0.0;
  p.detuning = AtomSpec::cesium133().delta_s;
  EXPECT_THROW(compute_effective_rates(AtomSpec::cesium133(), p), std::domain_error);
}

TEST(EffectiveLiouvillian, TracePreservingAndHermitian) {
  std::mt19937 rng(3);
  for (const AtomSpec& atom : {AtomSpec::cesium133(), AtomSpec::rubidium87(), spin_half_atom()}) {
    for (double delta : {-1e9, 0.0, 9e9}) {
      const Liouvillian l = assemble_effective_liouvillian(atom, pumped(delta), {0.2, cplx(0.05, 0.1)});
      const int dim = l.space.hilbert_dim();
      const Eigen::RowVectorXcd tr = l.space.trace_functional(CMatrix::Identity(dim, dim));
      for (const CMatrix* part : {&l.base, &l.sz_part, &l.splus_part, &l.sminus_part}) {
        EXPECT_LT((tr * *part).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, max_abs(*part)));
      }
      CMatrix rho = opmag::testing::random_density_matrix(dim, rng);
      rho = l.space.matrix(l.space.vectorize(rho));  // drop a-b coherences
      const CMatrix out = l.apply(rho);
      EXPECT_LT(max_abs(out - out.adjoint()), 1e-12 * max_abs(out));
    }
  }
}

TEST(CompactForm, TracePreservingAndRates) {
  ExperimentParams p = pumped(3e8);
  const Liouvillian l = compact_form_liouvillian(AtomSpec::rubidium87(), p);
  const Eigen::RowVectorXcd tr = l.space.trace_functional(CMatrix::Identity(8, 8));
  EXPECT_LT((tr * l.base).cwiseAbs().maxCoeff(), 1e-12 * max_abs(l.base));
  const CompactRates c = compact_rates(p);
  const double w2 = p.rabi() * p.rabi();
  EXPECT_NEAR(c.gamma_op, w2 * p.gamma_pb / (p.gamma_pb * p.gamma_pb + 9e16), 1e-12 * c.gamma_op);
  EXPECT_NEAR(c.delta_ls, w2 * 3e8 / (p.gamma_pb * p.gamma_pb + 9e16), 1e-12 * std::abs(c.delta_ls));
  EXPECT_NEAR(compact_rates(p, 2.0).gamma_op, 4.0 * c.gamma_op, 1e-12 * c.gamma_op);
}

// With optical pumping alone the compact form drives <S_z> towards +1/2 at Gamma_OP:
// d<S_z>/dt = Gamma_OP (1/2 - <S_z>), once the hyperfine precession term is removed.
TEST(CompactForm, PumpsElectronSpin) {
  std::mt19937 rng(5);
  ExperimentParams p = pumped(0.0);
  p.gamma_se = 0.0;
  p.gamma_sd_collision = 0.0;
  const AtomSpec atom = AtomSpec::rubidium87();
  const HyperfineBasis b(atom);
  const SpinOperators s = electron_spin_ops(b);
  const Liouvillian l = compact_form_liouvillian(atom, p);
  CMatrix precession = CMatrix::Zero(l.space.size(), l.space.size());
  SuperopBuilder(l.space, precession).hamiltonian(ground_hamiltonian(b, p));
  const double gop = compact_rates(p).gamma_op;
  for (int k = 0; k < 5; ++k) {
    const CMatrix rho = opmag::testing::random_density_matrix(8, rng);
    const CVector v = l.space.vectorize(rho);
    const CMatrix d = l.space.matrix((l.base - precession) * v);
    const double sz = (s.z * rho).trace().real();
    EXPECT_NEAR((s.z * d).trace().real(), gop * (0.5 - sz), 1e-10 * gop);
  }
}

// Oracle: the full D1 master equation for I = 1/2 at weak driving.
TEST(EffectiveLiouvillian, MatchesFullMasterEquationAtWeakDriving) {
  const AtomSpec atom = spin_half_atom();
  ExperimentParams p;
  p.gamma_pb = 0.6e9;
  p.gamma_se = 1.0e3;
  p.gamma_sd_collision = 0.2e3;
  SteadyStateOptions o;
  o.sz_tolerance = 1e-16;
  std::vector<double> err;
  for (double w : {3e3, 1e3}) {
    p.set_rabi(w);
    const double full = solve_full_steady_state(atom, p, o).mean_sz;
    const double eff = solve_steady_state(atom, p, o).mean_sz;
    EXPECT_GT(eff, 0.0);
    EXPECT_LT(std::abs(full - eff), 1e-4 * std::abs(eff));
    err.push_back(std::abs(full - eff));
  }
  const double slope = std::log(err[0] / err[1]) / std::log(3.0);
  EXPECT_NEAR(slope, 2.0, 0.3);
}

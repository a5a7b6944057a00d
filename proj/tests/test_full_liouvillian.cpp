#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "opmag/effective_liouvillian.hpp"
#include "opmag/full_liouvillian.hpp"
#include "opmag/steady_state.hpp"
#include "test_util.hpp"

using namespace opmag;
using opmag::testing::random_density_matrix;
using opmag::testing::spin_half_atom;

namespace {

// Tr[X L(rho)] for the affine generator evaluated at the mean fields of rho itself.
cplx rate_of(const Liouvillian& l, const CMatrix& x, const CMatrix& rho, const MeanFields& f) {
  return (x * l.space.matrix(l.at(f) * l.space.vectorize(rho))).trace();
}

Liouvillian collisions_only(const HyperfineBasis& b, double gamma, double gamma_se) {
  Liouvillian l = empty_liouvillian(Superspace::full(b.ground_dim()), {});
  add_spin_collisions(l, electron_spin_ops(b), gamma, gamma_se);
  return l;
}

}  // namespace

TEST(FullLiouvillian, ClosedSystemSpectrumIsImaginary) {
  ExperimentParams p;
  p.gamma_pb = 0.0;
  p.gamma_se = 0.0;
  p.gamma_sd_collision = 0.0;
  p.set_rabi(2e7);
  p.detuning = 3e8;
  const Liouvillian l = assemble_full_liouvillian(spin_half_atom(), p, {});
  const Eigen::ComplexEigenSolver<CMatrix> es(l.base);
  EXPECT_LT(es.eigenvalues().real().cwiseAbs().maxCoeff(), 1e-6 * es.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(FullLiouvillian, AnnihilatesTraceAndPreservesHermiticity) {
  std::mt19937 rng(7);
  ExperimentParams p;
  p.gamma_sd_optical = 5e6;
  p.detuning = -2e8;
  for (const AtomSpec& atom : {spin_half_atom(), AtomSpec::rubidium87()}) {
    const HyperfineBasis b(atom);
    const Liouvillian l = assemble_full_liouvillian(atom, p, {});
    const int dim = b.full_dim();
    const Eigen::RowVectorXcd tr = l.space.trace_functional(CMatrix::Identity(dim, dim));
    for (const CMatrix* part : {&l.base, &l.sz_part, &l.splus_part, &l.sminus_part}) {
      EXPECT_LT((tr * *part).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, part->cwiseAbs().maxCoeff()));
    }
    for (int k = 0; k < 5; ++k) {
      const CMatrix rho = random_density_matrix(dim, rng);
      const MeanFields f{0.3, cplx(0.1, -0.2)};
      const CMatrix out = l.space.matrix(l.at(f) * l.space.vectorize(rho));
      EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * out.cwiseAbs().maxCoeff());
    }
  }
}

TEST(FullLiouvillian, RejectsUnphysicalMeanFields) {
  EXPECT_THROW(assemble_full_liouvillian(spin_half_atom(), {}, {0.6, 0.0}), std::invalid_argument);
  EXPECT_THROW(assemble_full_liouvillian(spin_half_atom(), {}, {0.0, cplx(0.4, 0.4)}), std::invalid_argument);
}

// Spin exchange conserves the total electron spin of the colliding pair.
TEST(Collisions, SpinExchangeConservesSpin) {
  std::mt19937 rng(11);
  const HyperfineBasis b(AtomSpec::cesium133());
  const SpinOperators s = electron_spin_ops(b);
  const Liouvillian l = collisions_only(b, 1.31e3, 1.31e3);
  for (int k = 0; k < 20; ++k) {
    const CMatrix rho = random_density_matrix(b.ground_dim(), rng);
    const MeanFields f{(s.z * rho).trace().real(), (s.plus * rho).trace()};
    for (const CMatrix* op : {&s.x, &s.y, &s.z}) EXPECT_LT(std::abs(rate_of(l, *op, rho, f)), 1e-12 * 1.31e3);
  }
}

// Linearized about the stretched state, pure spin exchange must not damp a rigid rotation:
// the rotated state is again fully polarized and stationary.
TEST(Collisions, SpinExchangeSparesRigidRotation) {
  const HyperfineBasis b(AtomSpec::cesium133());
  const SpinOperators s = electron_spin_ops(b);
  const SpinOperators f = total_angular_momentum_ops(b);
  const Liouvillian l = collisions_only(b, 1.31e3, 1.31e3);
  CMatrix rho0 = CMatrix::Zero(16, 16);
  rho0(0, 0) = 1.0;
  const CMatrix d = cplx(0.0, -1.0) * (f.x * rho0 - rho0 * f.x);
  const cplx ds = (s.plus * d).trace();
  const CVector v0 = l.space.vectorize(rho0);
  const CVector rate = l.at({0.5, 0.0}) * l.space.vectorize(d) + ds * (l.splus_part * v0) +
                       std::conj(ds) * (l.sminus_part * v0);
  EXPECT_LT(rate.norm(), 1e-12 * 1.31e3);
}

TEST(Collisions, SpinDestructionDampsSpin) {
  std::mt19937 rng(13);
  const HyperfineBasis b(AtomSpec::rubidium87());
  const SpinOperators s = electron_spin_ops(b);
  const double gsd = 220.0;
  const Liouvillian l = collisions_only(b, gsd, 0.0);
  for (int k = 0; k < 20; ++k) {
    const CMatrix rho = random_density_matrix(b.ground_dim(), rng);
    for (const CMatrix* op : {&s.x, &s.y, &s.z}) {
      const cplx expect = -gsd * (*op * rho).trace();
      EXPECT_LT(std::abs(rate_of(l, *op, rho, {}) - expect), 1e-12 * gsd);
    }
  }
}

TEST(FullLiouvillian, ExcitedPopulationDecaysAtPressureRate) {
  ExperimentParams p;
  p.set_rabi(0.0);
  p.gamma_se = 0.0;
  p.gamma_sd_collision = 0.0;
  const HyperfineBasis b(spin_half_atom());
  const Liouvillian l = assemble_full_liouvillian(spin_half_atom(), p, {});
  CMatrix rho = CMatrix::Zero(b.full_dim(), b.full_dim());
  rho(b.ground_dim(), b.ground_dim()) = 1.0;
  const CMatrix d = l.space.matrix(l.base * l.space.vectorize(rho));
  // Sum A^dagger A = 2 on P1/2, so d/dt Tr[P_e rho] = -2 Gamma_pb.
  EXPECT_NEAR(d.bottomRightCorner(4, 4).trace().real(), -2.0 * p.gamma_pb, 1e-6 * p.gamma_pb);
}

TEST(EvolveFull, SteadyStateIsStationary) {
  const AtomSpec atom = spin_half_atom();
  ExperimentParams p;
  p.set_rabi(3e6);
  p.gamma_se = 500.0;
  p.gamma_sd_collision = 300.0;
  const FullSteadyState ss = solve_full_steady_state(atom, p);
  EvolveOptions o;
  o.keep_states = false;
  const Trajectory tr = evolve_full(atom, p, ss.rho, 1e-3, o);
  ASSERT_TRUE(tr.completed) << tr.message;
  EXPECT_NEAR(tr.last().sz, ss.mean_sz, 1e-7 * std::max(1.0, std::abs(ss.mean_sz)));
  EXPECT_LT((tr.last().rho - ss.rho).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(EvolveFull, PreservesTraceAndRelaxesToSteadyState) {
  const AtomSpec atom = spin_half_atom();
  ExperimentParams p;
  p.set_rabi(3e6);
  p.gamma_se = 500.0;
  p.gamma_sd_collision = 300.0;
  const HyperfineBasis b(atom);
  CMatrix rho = CMatrix::Zero(b.full_dim(), b.full_dim());
  for (int i = 0; i < b.ground_dim(); ++i) rho(i, i) = 1.0 / b.ground_dim();
  EvolveOptions o;
  o.keep_states = false;
  const Trajectory tr = evolve_full(atom, p, rho, 0.05, o);
  ASSERT_TRUE(tr.completed) << tr.message;
  for (const TrajectoryPoint& pt : tr.points) EXPECT_NEAR(pt.trace, 1.0, 1e-6);
  const FullSteadyState ss = solve_full_steady_state(atom, p);
  EXPECT_NEAR(tr.last().sz, ss.mean_sz, 1e-5 * std::abs(ss.mean_sz));
}

TEST(EvolveFull, RfDriveTiltsSpin) {
  const AtomSpec atom = spin_half_atom();
  ExperimentParams p;
  p.set_rabi(0.0);
  p.gamma_pb = 1e8;
  p.gamma_se = 0.0;
  p.gamma_sd_collision = 0.0;
  p.b_x = 1e-3;
  p.b_z = 0.0;
  p.rf_frequency = 0.0;  // static transverse field
  const HyperfineBasis b(atom);
  CMatrix rho = CMatrix::Zero(b.full_dim(), b.full_dim());
  rho(0, 0) = 1.0;  // |a, a>, electron spin up
  EvolveOptions o;
  o.include_rf_drive = true;
  o.max_step = 1e-6;
  const Trajectory tr = evolve_full(atom, p, rho, 2e-5, o);
  ASSERT_TRUE(tr.completed) << tr.message;
  EXPECT_LT(tr.last().sz, 0.5 - 1e-4);
  EXPECT_GT(std::abs(tr.last().s_plus), 1e-3);
  EXPECT_NEAR(tr.last().trace, 1.0, 1e-9);
}

TEST(EvolveFull, RejectsWrongDimension) {
  EXPECT_THROW(evolve_full(spin_half_atom(), {}, CMatrix::Identity(3, 3), 1e-3), std::invalid_argument);
}

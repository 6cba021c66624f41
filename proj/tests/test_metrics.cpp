#include <gtest/gtest.h>

#include <vector>

#include "ocdma/metrics.hpp"

using namespace ocdma;

TEST(StepNorm, ThreeFourFive) {
  const Vector a = (Vector(2) << 1.0 + 3e-7, 2.0 + 4e-7).finished();
  const Vector b = (Vector(2) << 1.0, 2.0).finished();
  const double xi = step_norm(a, b);
  EXPECT_NEAR(xi, 5e-7, 1e-15);
  EXPECT_TRUE(is_converged(ConvergenceCriterion{}, Feasibility{0.0}, xi));
  EXPECT_EQ(step_norm(a, a), 0.0);
}

TEST(StepNorm, PermutationInvariant) {
  const Vector a = (Vector(3) << 1.0, 4.0, -2.0).finished();
  const Vector b = (Vector(3) << 0.5, 1.0, 3.0).finished();
  Eigen::PermutationMatrix<3> perm;
  perm.indices() << 2, 0, 1;
  EXPECT_DOUBLE_EQ(step_norm(perm * a, perm * b), step_norm(a, b));
}

TEST(StepNorm, LengthMismatch) { EXPECT_THROW(step_norm(Vector::Ones(2), Vector::Ones(3)), Error); }

TEST(FeasibilityTest, Definition) {
  const NetworkInstance inst = generate_instance(SystemParams{}, QosClass::class_II(), 8, 4);
  const PowerVector p = tarhuni_solve(inst).p;
  EXPECT_LE(feasibility(inst, p).or_infinity(), 1e-8);

  // Lower one user's power until its CIR sits 0.01 below target.
  NetworkInstance tweaked = inst;
  const Vector gamma = cir(inst, p);
  tweaked.cir_target(3) = gamma(3) + 0.01;
  EXPECT_NEAR(*feasibility(tweaked, p).value, 0.01, 1e-12);

  PowerVector out = p;
  out(0) = 1.5 * inst.p_max;
  const Feasibility f = feasibility(inst, out);
  EXPECT_FALSE(f.in_box());
  EXPECT_FALSE(f.within(1e3));
  EXPECT_FALSE(is_converged(ConvergenceCriterion{}, f, 0.0));
}

TEST(FeasibilityTest, OverSatisfiedConstraintsCountAsZero) {
  const NetworkInstance inst = generate_instance(SystemParams{}, QosClass::class_II(), 8, 4);
  const PowerVector p = 2.0 * tarhuni_solve(inst).p;
  EXPECT_EQ(*feasibility(inst, p).value, 0.0);
}

TEST(Nmse, Definition) {
  const Vector ps = (Vector(3) << 1.0, 2.0, 3.0).finished();
  EXPECT_EQ(nmse(ps, ps), 0.0);
  EXPECT_NEAR(nmse(2.0 * ps, ps), 1.0, 1e-15);
  const Vector q = (Vector(3) << 1.5, 2.0, 2.0).finished();
  EXPECT_NEAR(nmse(7.0 * q, 7.0 * ps), nmse(q, ps), 1e-15);
  try {
    nmse(ps, Vector::Zero(3));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNorm);
  }
}

TEST(Nmse, TrajectoryIsMeanOfRatios) {
  const Vector ps = Vector::Ones(2);
  const std::vector<PowerVector> traj = {2.0 * ps, ps, 3.0 * ps};
  // (1 + 0 + 4) / 3
  EXPECT_NEAR(nmse_trajectory(traj, ps), 5.0 / 3.0, 1e-15);
}

TEST(Robustness, Percentages) {
  EXPECT_DOUBLE_EQ(robustness(93, 100), 93.0);
  EXPECT_DOUBLE_EQ(robustness(100, 100), 100.0);
  EXPECT_DOUBLE_EQ(robustness(0, 1), 0.0);
  EXPECT_THROW(robustness(1, 0), Error);
  EXPECT_THROW(robustness(3, 2), Error);
}

TEST(Flops, KernelCounts) {
  FlopCounter c;
  flops_charge(c, "matvec", {4, 4});
  EXPECT_EQ(c.accumulated(), 32);
  flops_charge(c, "dot", {8, 0});
  EXPECT_EQ(c.accumulated(), 48);
  flops_charge(c, "solve", {3, 0});
  EXPECT_EQ(c.accumulated(), 84);
  EXPECT_EQ(FlopCounter::cost(Kernel::Axpy, {5, 0}), 10);
  EXPECT_EQ(FlopCounter::cost(Kernel::FdGradient, {6, 40}), 240);
  try {
    flops_charge(c, "fft", {8, 0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownKernel);
  }
  EXPECT_EQ(c.accumulated(), 84);
}

TEST(Criterion, Defaults) {
  const ConvergenceCriterion c;
  EXPECT_EQ(c.xi_tol, 1e-6);
  EXPECT_EQ(c.feas_tol, 1e-4);
  EXPECT_EQ(c.max_iters, 10);
  EXPECT_EQ(ConvergenceCriterion::under_perturbation().max_iters, 15);
  EXPECT_FALSE(is_converged(c, Feasibility{2e-4}, 0.0));
  EXPECT_FALSE(is_converged(c, Feasibility{0.0}, 1e-6));
}

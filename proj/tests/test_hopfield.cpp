#include <gtest/gtest.h>

#include <random>

#include "ocdma/harness.hpp"
#include "ocdma/solver_hopfield.hpp"
#include "support.hpp"

using namespace ocdma;

namespace {

NetworkInstance class_ii(Eigen::Index k, std::uint64_t seed) {
  return generate_instance(SystemParams{}, QosClass::class_II(), k, seed);
}

Vector state(const PowerVector& p, const Vector& q) {
  Vector v(p.size() + q.size());
  v << p, q;
  return v;
}

}  // namespace

TEST(ConstraintMap, ZeroAtOracle) {
  const NetworkInstance inst = class_ii(8, 3);
  const PowerVector ps = tarhuni_solve(inst).p;
  const ConstraintEval c = constraint_map(inst, state(ps, Vector::Zero(8)));
  EXPECT_LE(c.h.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConstraintMap, SlackColumnIsLinear) {
  const NetworkInstance inst = class_ii(4, 3);
  std::mt19937_64 rng(1);
  const PowerVector p = testsupport::random_point(inst, rng);
  Vector q = Vector::Constant(4, 0.01);
  const Vector h0 = constraint_map(inst, state(p, q)).h;
  q(2) += 0.003;
  const Vector h1 = constraint_map(inst, state(p, q)).h;
  EXPECT_NEAR(h0(2) - h1(2), 0.003, 1e-15);
  EXPECT_EQ(h0(0), h1(0));
}

TEST(ConstraintMap, JacobianMatchesDifferences) {
  const NetworkInstance inst = class_ii(4, 21);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const PowerVector p = testsupport::random_point(inst, rng);
    const ConstraintEval c = constraint_map(inst, state(p, Vector::Constant(4, 0.1)));
    const Matrix fd = testsupport::cir_jacobian_fd(inst, p);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    EXPECT_LE((c.jac.leftCols(4) - fd).cwiseAbs().maxCoeff(), 1e-5 * scale);
    EXPECT_TRUE(c.jac.rightCols(4).isApprox(-Matrix::Identity(4, 4)));
  }
}

TEST(Confine, LinearToyOneStep) {
  auto map = [](const Vector& v) {
    ConstraintEval c;
    c.h = Vector::Constant(1, v(0) + v(1) - 1.0);
    c.jac = Matrix::Ones(1, 2);
    return c;
  };
  const ConfineResult r = confine(map, (Vector(2) << 0.7, 0.7).finished());
  EXPECT_NEAR(r.v(0), 0.5, 1e-15);
  EXPECT_NEAR(r.v(1), 0.5, 1e-15);
  EXPECT_EQ(r.iterations, 1);
}

TEST(Confine, FixedPointOnManifold) {
  const NetworkInstance inst = class_ii(6, 5);
  const Vector v = state(tarhuni_solve(inst).p, Vector::Zero(6));
  const ConfineResult r = confine(inst, v);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.v, v);
}

TEST(Confine, RandomStartReachesManifold) {
  const NetworkInstance inst = class_ii(4, 17);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector v = state(testsupport::random_point(inst, rng), Vector::Zero(4));
    const ConfineResult r = confine(inst, v);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE(constraint_map(inst, r.v).h.norm(), 1e-10);
    EXPECT_LE(r.iterations, 50);
  }
}

TEST(Confine, RankDeficientJacobian) {
  auto map = [](const Vector& v) {
    ConstraintEval c;
    c.h = (Vector(2) << v(0) - 1.0, v(0) - 2.0).finished();
    c.jac = Matrix::Zero(2, 2);
    c.jac.col(0).setOnes();
    return c;
  };
  try {
    confine(map, Vector::Zero(2));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Confine, IterationCap) {
  const NetworkInstance inst = class_ii(4, 17);
  ConfineOptions o;
  o.max_iters = 0;
  try {
    confine(inst, state(Vector::Constant(4, 1e-3), Vector::Zero(4)), o);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
  }
}

TEST(Activate, RampBehaviour) {
  const HopfieldBox box{1e-10, 0.1, 5.0};
  const Vector inside = (Vector(4) << 1e-3, 2e-2, 0.5, 0.0).finished();
  EXPECT_EQ(activate(inside, box), inside);
  const Vector outside = (Vector(4) << 0.15, -1.0, -0.2, 9.0).finished();
  const Vector a = activate(outside, box);
  EXPECT_EQ(a(0), 0.1);
  EXPECT_EQ(a(1), 1e-10);
  EXPECT_EQ(a(2), 0.0);
  EXPECT_EQ(a(3), 5.0);
  EXPECT_EQ(activate(a, box), a);
}

TEST(Activate, SlackCapAboveReachableCir) {
  const NetworkInstance inst = class_ii(8, 2);
  const HopfieldBox box = hopfield_box(inst);
  EXPECT_GT(box.q_max, cir(inst, Vector::Constant(8, inst.p_max)).maxCoeff());
}

TEST(OptimizeStep, Arithmetic) {
  const Vector v = (Vector(4) << 0.5, 0.2, 0.3, 0.4).finished();
  const Vector a = optimize_step(v, 0.1);
  EXPECT_NEAR(a(0), 0.4, 1e-15);
  EXPECT_NEAR(a(1), 0.1, 1e-15);
  EXPECT_EQ(a.tail(2), v.tail(2));
  EXPECT_TRUE(optimize_step(optimize_step(v, 0.1), 0.1).isApprox(optimize_step(v, 0.2), 1e-15));
}

TEST(SolveHopfield, StartAtOracle) {
  const NetworkInstance inst = class_ii(8, 6);
  const PowerVector ps = tarhuni_solve(inst).p;
  const SolveResult r = solve_hopfield(inst, ps);
  EXPECT_TRUE(r.report.converged());
  EXPECT_LE(r.report.iterations, 2);
}

TEST(SolveHopfield, EightUsersClassII) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NetworkInstance inst = class_ii(8, seed);
    HopfieldOptions o;
    o.run.reference = tarhuni_solve(inst).p;
    const SolveResult r = solve_hopfield(inst, random_start(inst, seed, StartDistribution::Dbm), o);
    ASSERT_TRUE(r.report.converged()) << r.report.message;
    EXPECT_LE(r.report.iterations, 3);
    EXPECT_LE(*r.report.feasibility, 1e-4);
    EXPECT_LE(r.report.nmse_terminal, 1e-6);

    const PowerBox box = inst.box();
    for (const TraceEntry& e : r.trace.entries) EXPECT_TRUE(box.contains(e.p));
    for (std::size_t i = 2; i < r.trace.entries.size(); ++i)
      EXPECT_LE(r.trace.entries[i].sum_power, r.trace.entries[i - 1].sum_power + 1e-12);
    EXPECT_EQ(r.trace.entries.size(), static_cast<std::size_t>(r.report.iterations) + 1);
  }
}

TEST(SolveHopfield, RejectsBadStep) {
  const NetworkInstance inst = class_ii(4, 1);
  HopfieldOptions o;
  o.dt = 0.0;
  EXPECT_THROW(solve_hopfield(inst, Vector::Constant(4, 1e-3), o), Error);
}

TEST(SolveHopfield, IterationCap) {
  const NetworkInstance inst = class_ii(8, 1);
  HopfieldOptions o;
  o.run.criterion.max_iters = 1;
  const SolveResult r = solve_hopfield(inst, random_start(inst, 1, StartDistribution::Dbm), o);
  EXPECT_EQ(r.report.status, SolverStatus::MaxIterations);
  EXPECT_EQ(r.report.iterations, 1);
}

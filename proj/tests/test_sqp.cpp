#include <gtest/gtest.h>

#include <random>

#include "ocdma/harness.hpp"
#include "ocdma/qp.hpp"
#include "ocdma/solver_sqp.hpp"
#include "support.hpp"

using namespace ocdma;

namespace {

NetworkInstance class_ii(Eigen::Index k, std::uint64_t seed) {
  return generate_instance(SystemParams{}, QosClass::class_II(), k, seed);
}

double max_rel_error(const Matrix& a, const Matrix& ref) {
  return (a - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(FdGradient, LinearAndConstant) {
  const Vector x = (Vector(3) << 1e-3, 2e-3, 5e-4).finished();
  const Vector g = fd_gradient([](const Vector& v) { return v.sum(); }, x);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(g(i), 1.0, 1e-8);
  const Vector z = fd_gradient([](const Vector&) { return 4.2; }, x);
  EXPECT_EQ(z, Vector::Zero(3));
}

TEST(FdGradient, CirRowMatchesAnalytic) {
  const NetworkInstance inst = class_ii(4, 31);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const PowerVector p = testsupport::random_point(inst, rng);
    const Vector g = fd_gradient([&](const Vector& v) { return cir(inst, v)(0); }, p);
    const Vector ref = cir_jacobian(inst, p).row(0).transpose();
    EXPECT_LE((g - ref).norm() / ref.norm(), 1e-5);
  }
}

TEST(FdGradient, CirJacobianRandomPoints) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> users(2, 16);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkInstance inst = class_ii(users(rng), 1000 + static_cast<std::uint64_t>(trial));
    const PowerVector p = testsupport::random_point(inst, rng);
    EXPECT_LE(max_rel_error(fd_cir_jacobian(inst, p), cir_jacobian(inst, p)), 1e-4);
  }
}

TEST(BuildQp, ZeroMultipliersGiveShiftedIdentity) {
  const NetworkInstance inst = class_ii(5, 2);
  std::mt19937_64 rng(5);
  const PowerVector p = testsupport::random_point(inst, rng);
  const SqpSubproblem sub = build_qp(inst, p, Vector::Zero(5));
  EXPECT_EQ(sub.hessian, Matrix::Zero(5, 5));
  EXPECT_TRUE(sub.qp.Q.isApprox(sub.shift * Matrix::Identity(5, 5)));
  EXPECT_NEAR(sub.shift, 1e-8, 1e-20);
  EXPECT_EQ(sub.qp.g, Vector::Ones(5));
  EXPECT_TRUE(sub.qp.b.isApprox(inst.cir_target - cir(inst, p)));
  EXPECT_TRUE(sub.qp.lo.isApprox(Vector::Constant(5, inst.p_min) - p));
  EXPECT_TRUE(sub.qp.hi.isApprox(Vector::Constant(5, inst.p_max) - p));
}

TEST(BuildQp, ShiftMakesQuadraticTermPositiveDefinite) {
  const NetworkInstance inst = class_ii(6, 4);
  std::mt19937_64 rng(6);
  for (HessianShift s : {HessianShift::Eigen, HessianShift::Gershgorin}) {
    const PowerVector p = testsupport::random_point(inst, rng);
    const SqpSubproblem sub = build_qp(inst, p, Vector::Constant(6, 50.0), {}, s);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(sub.qp.Q);
    EXPECT_GT(es.eigenvalues()(0), 0.0);
    EXPECT_GE(sub.shift, 1e-8);
  }
}

TEST(BuildQp, RequiresPointInBox) {
  const NetworkInstance inst = class_ii(3, 2);
  EXPECT_THROW(build_qp(inst, Vector::Constant(3, 1.0), Vector::Zero(3)), Error);
}

TEST(IpQp, InteriorOptimumIsNewtonStep) {
  ocdma::QpProblem qp;
  qp.Q = (Matrix(2, 2) << 4.0, 1.0, 1.0, 3.0).finished();
  qp.g = (Vector(2) << 0.3, -0.2).finished();
  qp.A = (Matrix(1, 2) << 1.0, 1.0).finished();
  qp.b = Vector::Constant(1, -10.0);
  qp.lo = Vector::Constant(2, -5.0);
  qp.hi = Vector::Constant(2, 5.0);
  const QpSolution s = ip_qp_solve(qp);
  const Vector ref = -qp.Q.ldlt().solve(qp.g);
  EXPECT_LE((s.x - ref).norm(), 1e-8);
  EXPECT_LE(s.multipliers(0), 1e-8);
  EXPECT_FALSE(s.relaxed);
}

TEST(IpQp, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(11);
  for (Eigen::Index n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 6; ++trial) {
      const ocdma::QpProblem qp = testsupport::random_qp(n, n, rng);
      const testsupport::EnumeratedQp ref = testsupport::enumerate_qp(qp);
      ASSERT_TRUE(ref.found);
      const QpSolution s = ip_qp_solve(qp);
      EXPECT_NEAR(s.objective, ref.objective, 1e-8) << "n=" << n << " trial " << trial;
      EXPECT_LE((s.x - ref.x).norm(), 1e-6);
      EXPECT_TRUE((s.multipliers.array() >= 0.0).all());
    }
  }
}

TEST(IpQp, TwoUserSubproblemMatchesEnumeration) {
  const NetworkInstance inst = class_ii(2, 3);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const PowerVector p = testsupport::random_point(inst, rng);
    const SqpSubproblem sub = build_qp(inst, p, Vector::Constant(2, 1e-4 * trial));
    // Rescale rows so the enumeration's feasibility test is meaningful.
    ocdma::QpProblem qp = sub.qp;
    for (Eigen::Index i = 0; i < qp.rows(); ++i) {
      const double s = qp.A.row(i).norm();
      qp.A.row(i) /= s;
      qp.b(i) /= s;
    }
    const testsupport::EnumeratedQp ref = testsupport::enumerate_qp(qp, 1e-14);
    if (!ref.found) continue;
    QpOptions o;
    o.elastic_penalty = 0.0;
    const QpSolution s = ip_qp_solve(qp, o);
    EXPECT_LE((s.x - ref.x).norm(), 1e-6 * std::max(1.0, ref.x.norm()));
  }
}

TEST(IpQp, InconsistentRowsAreRelaxed) {
  ocdma::QpProblem qp;
  qp.Q = Matrix::Identity(1, 1);
  qp.g = Vector::Zero(1);
  qp.A = (Matrix(2, 1) << 1.0, -1.0).finished();
  qp.b = (Vector(2) << 1.0, 1.0).finished();  // x >= 1 and x <= -1
  qp.lo = Vector::Constant(1, -5.0);
  qp.hi = Vector::Constant(1, 5.0);
  QpOptions o;
  o.elastic_penalty = 1e3;
  const QpSolution s = ip_qp_solve(qp, o);
  EXPECT_TRUE(s.relaxed);
  EXPECT_EQ(s.elastic.size(), 2);
  EXPECT_NEAR(s.x(0), 0.0, 1e-6);
}

TEST(IpQp, IterationCapIsNumericalFailure) {
  std::mt19937_64 rng(13);
  const ocdma::QpProblem qp = testsupport::random_qp(4, 4, rng);
  QpOptions o;
  o.max_iters = 1;
  try {
    ip_qp_solve(qp, o);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NumericalFailure);
  }
}

TEST(SolveSqp, StartAtOracle) {
  const NetworkInstance inst = class_ii(8, 6);
  const SolveResult r = solve_sqp(inst, tarhuni_solve(inst).p);
  EXPECT_TRUE(r.report.converged());
  EXPECT_LE(r.report.iterations, 2);
}

TEST(SolveSqp, EightUsersClassII) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NetworkInstance inst = class_ii(8, seed);
    SqpOptions o;
    o.run.reference = tarhuni_solve(inst).p;
    const SolveResult r = solve_sqp(inst, random_start(inst, seed, StartDistribution::Dbm), o);
    ASSERT_TRUE(r.report.converged()) << r.report.message;
    EXPECT_LE(r.report.iterations, 4);
    EXPECT_LE(*r.report.feasibility, 1e-10);
    EXPECT_LE(r.report.nmse_terminal, 1e-3);
    const PowerBox box = inst.box();
    for (const TraceEntry& e : r.trace.entries) EXPECT_TRUE(box.contains(e.p));
  }
}

TEST(SolveSqp, GershgorinShiftStillConverges) {
  const NetworkInstance inst = class_ii(8, 2);
  SqpOptions o;
  o.shift = HessianShift::Gershgorin;
  const SolveResult r = solve_sqp(inst, random_start(inst, 2, StartDistribution::Dbm), o);
  EXPECT_TRUE(r.report.converged()) << r.report.message;
}

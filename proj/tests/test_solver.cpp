#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curveddg/solver.hpp"
#include "curveddg/study.hpp"

using namespace cdg;

namespace {

AnnulusDomain quarter() { return {DomainKind::QuarterAnnulus, 1.0, 1.384}; }

MatVec dense_op(const MatrixXd& a) {
  return [&a](const VectorXd& x, VectorXd& y) { y = a * x; };
}

std::pair<Discretization, BoundaryMap> poisson_setup(int kg, int level, int k) {
  const CurvedMesh mesh = generate_tobecurved_annulus(ElementKind::Triangle, kg, level, 1.0,
                                                      quarter());
  // keep the mesh alive by leaking a copy; test-local convenience
  auto* kept = new CurvedMesh(mesh);
  return {build_discretization(*kept, k),
          case_boundary_conditions(CaseKind::Poisson, GasModel::inviscid(), 0.0)};
}

double poisson_source_fn(const Vec2& x) {
  return -2.0 * M_PI * M_PI * std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
}

}  // namespace

TEST_CASE("gmres: identity and dense oracle") {
  {
    const MatrixXd eye = MatrixXd::Identity(20, 20);
    VectorXd b = VectorXd::LinSpaced(20, 1.0, 2.0);
    const auto res = gmres(dense_op(eye), b, 10, 1e-12);
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK((res.x - b).norm() < 1e-12);
  }
  {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    MatrixXd a(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) a(i, j) = unif(rng);
    a.diagonal().array() += 60.0;  // diagonally dominant
    VectorXd b(50);
    for (int i = 0; i < 50; ++i) b[i] = unif(rng);
    const auto res = gmres(dense_op(a), b, 25, 1e-12);
    const VectorXd oracle = a.partialPivLu().solve(b);
    CHECK(res.converged);
    CHECK((res.x - oracle).norm() / oracle.norm() < 1e-8);
    // recomputed true residual consistent with the convergence claim
    CHECK(res.true_residual <= 1e-12 * (1.0 + 1e-12));
  }
}

TEST_CASE("gmres: stagnation raises a breakdown error") {
  // cyclic shift: restarted GMRES with a short restart makes no progress
  const int n = 50;
  const MatVec shift = [n](const VectorXd& x, VectorXd& y) {
    y.resize(n);
    for (int i = 0; i < n; ++i) y[i] = x[(i + 1) % n];
  };
  VectorXd b = VectorXd::Zero(n);
  b[0] = 1.0;
  CHECK_THROWS_WITH_AS(gmres(shift, b, 5, 1e-12), doctest::Contains("stagnation"), Error);
}

TEST_CASE("cg: diagonal system, dense oracle, SPD guard") {
  {
    VectorXd d = VectorXd::LinSpaced(30, 1.0, 30.0);
    const MatVec op = [&d](const VectorXd& x, VectorXd& y) { y = d.asDiagonal() * x; };
    VectorXd b = VectorXd::Ones(30);
    const auto res = cg(op, b, 1e-13);
    CHECK(res.converged);
    CHECK(res.iterations <= 30);
    CHECK((res.x - (b.array() / d.array()).matrix()).norm() < 1e-11);
  }
  {
    // IP Poisson matrix on a straight (k_g = 1) level-1 mesh is SPD after
    // negation; compare against a dense solve
    auto [disc, bc] = poisson_setup(1, 1, 2);
    PoissonSystem sys(disc, bc, poisson_source_fn);
    BlockSparseMatrix jac(sys.pattern());
    sys.jacobian(VectorXd::Zero(sys.dofs()), jac);
    const MatrixXd a = -jac.dense();
    VectorXd b(sys.dofs());
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < b.size(); ++i) b[i] = unif(rng);
    const auto res = cg(dense_op(a), b, 1e-12, nullptr, 20000);
    const VectorXd oracle = a.partialPivLu().solve(b);
    CHECK(res.converged);
    CHECK((res.x - oracle).norm() / oracle.norm() < 1e-10);
  }
  {
    MatrixXd a(2, 2);
    a << 0.0, 1.0, -1.0, 0.0;  // skew: p^T A p = 0
    VectorXd b(2);
    b << 1.0, 1.0;
    CHECK_THROWS_WITH_AS(cg(dense_op(a), b, 1e-10), doctest::Contains("not SPD"), Error);
  }
}

TEST_CASE("block preconditioners") {
  // block-diagonal matrix: preconditioned GMRES converges in one iteration
  BlockPattern pat;
  pat.n_rows = 6;
  pat.block_size = 3;
  pat.cols.assign(6, {});
  for (int i = 0; i < 6; ++i) pat.cols[i] = {i};
  BlockSparseMatrix m(pat);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    MatrixXd blk(3, 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) blk(a, b) = unif(rng);
    blk.diagonal().array() += 4.0;
    m.block(i, i) = blk;
  }
  VectorXd b(18);
  for (int i = 0; i < 18; ++i) b[i] = unif(rng);
  const auto bj = block_jacobi_preconditioner(m);
  const MatVec op = [&m](const VectorXd& x, VectorXd& y) { m.multiply(x, y); };
  const auto res = gmres(op, b, 10, 1e-12, bj->op());
  CHECK(res.converged);
  CHECK(res.iterations <= 1);

  // identity blocks: apply is the identity
  BlockSparseMatrix eye(pat);
  for (int i = 0; i < 6; ++i) eye.block(i, i) = MatrixXd::Identity(3, 3);
  const auto id_prec = block_jacobi_preconditioner(eye);
  VectorXd out;
  id_prec->apply(b, out);
  CHECK((out - b).cwiseAbs().maxCoeff() < 1e-15);

  // singular diagonal block reported with the element id
  BlockSparseMatrix sing(pat);
  CHECK_THROWS_WITH_AS(block_jacobi_preconditioner(sing), doctest::Contains("element 0"), Error);
}

TEST_CASE("preconditioning reduces iteration counts") {
  auto [disc, bc] = poisson_setup(2, 2, 2);
  PoissonSystem sys(disc, bc, poisson_source_fn);
  BlockSparseMatrix jac(sys.pattern());
  sys.jacobian(VectorXd::Zero(sys.dofs()), jac);
  VectorXd r0;
  sys.residual(VectorXd::Zero(sys.dofs()), r0);
  const MatVec op = [&jac](const VectorXd& x, VectorXd& y) { jac.multiply(x, y); };
  const auto plain = gmres(op, -r0, 60, 1e-8, nullptr, 100000);
  const auto bj = block_jacobi_preconditioner(jac);
  const auto prec = gmres(op, -r0, 60, 1e-8, bj->op(), 100000);
  CHECK(plain.converged);
  CHECK(prec.converged);
  // measured on this matrix family: block Jacobi reduces the count but stays
  // under 2x; ILU0 delivers far more
  CHECK(prec.iterations < plain.iterations);
  const auto ilu = block_ilu0_preconditioner(jac);
  const auto prec2 = gmres(op, -r0, 60, 1e-8, ilu->op(), 100000);
  CHECK(prec2.converged);
  CHECK(prec2.iterations * 2 <= plain.iterations);
  CHECK(prec2.iterations <= prec.iterations);

  // euler jacobian: block-jacobi cuts iterations vs unpreconditioned
  const GasModel gas = GasModel::inviscid();
  const CurvedMesh mesh = generate_tobecurved_annulus(ElementKind::Triangle, 2, 1, 1.0, quarter());
  const Discretization edisc = build_discretization(mesh, 2);
  const BoundaryMap ebc = case_boundary_conditions(CaseKind::EulerVortex, gas, 0.0);
  EulerSystem esys(edisc, ebc, gas);
  const VectorXd u0 = initial_state(CaseKind::EulerVortex, edisc, gas, "exact");
  BlockSparseMatrix ejac(esys.pattern());
  esys.jacobian(u0, ejac);
  VectorXd er;
  esys.residual(u0, er);
  const MatVec eop = [&ejac](const VectorXd& x, VectorXd& y) { ejac.multiply(x, y); };
  const auto eplain = gmres(eop, -er, 60, 1e-8, nullptr, 100000);
  const auto ebj = block_jacobi_preconditioner(ejac);
  const auto eprec = gmres(eop, -er, 60, 1e-8, ebj->op(), 100000);
  CHECK(eprec.iterations < eplain.iterations);
}

TEST_CASE("newton: poisson converges in one step") {
  auto [disc, bc] = poisson_setup(2, 1, 2);
  PoissonSystem sys(disc, bc, poisson_source_fn);
  NewtonConfig cfg;
  cfg.linear_tol = 1e-4;  // tightened automatically near the root
  cfg.rel_tol = 1e-16;    // the absolute 1e-12 target is the contract here
  cfg.preconditioner = PreconditionerKind::ILU0;
  auto [u, report] = newton_solve(sys, VectorXd::Zero(sys.dofs()), cfg);
  CHECK(report.converged);
  CHECK(report.newton_iterations <= 2);
  VectorXd r;
  sys.residual(u, r);
  CHECK(r.norm() <= 1e-12);

  // CG path reaches the same solution
  NewtonConfig cg_cfg = cfg;
  cg_cfg.linear = LinearSolverKind::CG;
  auto [u2, report2] = newton_solve(sys, VectorXd::Zero(sys.dofs()), cg_cfg);
  CHECK(report2.converged);
  CHECK((u2 - u).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("newton: euler vortex quadratic contraction and machine residual") {
  const GasModel gas = GasModel::inviscid();
  const CurvedMesh mesh = generate_tobecurved_annulus(ElementKind::Triangle, 2, 1, 1.0, quarter());
  const Discretization disc = build_discretization(mesh, 2);
  const BoundaryMap bc = case_boundary_conditions(CaseKind::EulerVortex, gas, 0.0);
  EulerSystem sys(disc, bc, gas);
  const VectorXd u0 = initial_state(CaseKind::EulerVortex, disc, gas, "exact");
  NewtonConfig cfg;
  cfg.rel_tol = 1e-16;
  auto [u, report] = newton_solve(sys, u0, cfg);
  CHECK(report.converged);
  VectorXd r;
  sys.residual(u, r);
  CHECK(r.norm() <= 1e-12);
  // final step contracts at least superlinearly (down to the roundoff floor)
  const auto& hist = report.residual_history;
  REQUIRE(hist.size() >= 3);
  const double r_last = hist[hist.size() - 1], r_prev = hist[hist.size() - 2];
  CHECK(r_last <= std::max(1e6 * r_prev * r_prev, 2e-14));

  // determinism: identical residual history on a rerun
  auto [u_re, report_re] = newton_solve(sys, u0, cfg);
  REQUIRE(report_re.residual_history.size() == hist.size());
  for (size_t i = 0; i < hist.size(); ++i) CHECK(report_re.residual_history[i] == hist[i]);
}

TEST_CASE("newton: ns couette converges from the exact interpolant") {
  const GasModel gas = GasModel::viscous(1e-3);
  const CurvedMesh mesh = generate_tobecurved_annulus(
      ElementKind::Triangle, 2, 1, 1.0, {DomainKind::FullAnnulus, 0.5, 1.0});
  const Discretization disc = build_discretization(mesh, 2);
  const BoundaryMap bc = case_boundary_conditions(CaseKind::NsCouette, gas, gas.mu);
  NavierStokesSystem sys(disc, bc, gas);
  const VectorXd u0 = initial_state(CaseKind::NsCouette, disc, gas, "exact");
  NewtonConfig cfg;
  cfg.preconditioner = PreconditionerKind::ILU0;
  cfg.rel_tol = 1e-16;
  auto [u, report] = newton_solve(sys, u0, cfg);
  CHECK(report.converged);
  CHECK(report.newton_iterations <= 15);
  VectorXd r;
  sys.residual(u, r);
  CHECK(r.norm() <= 1e-12);
}

TEST_CASE("newton: analytic and finite-difference jacobians find the same root") {
  const GasModel gas = GasModel::inviscid();
  const CurvedMesh mesh = generate_tobecurved_annulus(ElementKind::Triangle, 2, 0, 1.0, quarter());
  const Discretization disc = build_discretization(mesh, 1);
  const BoundaryMap bc = case_boundary_conditions(CaseKind::EulerVortex, gas, 0.0);
  EulerSystem sys(disc, bc, gas);
  const VectorXd u0 = initial_state(CaseKind::EulerVortex, disc, gas, "exact");
  auto [ua, ra] = newton_solve(sys, u0);
  NewtonConfig fd_cfg;
  fd_cfg.jacobian_mode = JacobianMode::FiniteDifference;
  auto [uf, rf] = newton_solve(sys, u0, fd_cfg);
  CHECK(ra.converged);
  CHECK(rf.converged);
  CHECK((ua - uf).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("newton: pseudo-transient globalization from a perturbed state") {
  const GasModel gas = GasModel::inviscid();
  const CurvedMesh mesh = generate_tobecurved_annulus(ElementKind::Triangle, 2, 0, 1.0, quarter());
  const Discretization disc = build_discretization(mesh, 1);
  const BoundaryMap bc = case_boundary_conditions(CaseKind::EulerVortex, gas, 0.0);
  EulerSystem sys(disc, bc, gas);
  VectorXd u0 = initial_state(CaseKind::EulerVortex, disc, gas, "exact");
  u0 *= 1.15;  // physical but far from the solution
  NewtonConfig cfg;
  cfg.globalization = Globalization::PseudoTransient;
  cfg.max_newton = 200;
  cfg.rel_tol = 1e-16;
  auto [u, report] = newton_solve(sys, u0, cfg);
  CHECK(report.converged);
  VectorXd r;
  sys.residual(u, r);
  CHECK(r.norm() <= 1e-12);
}

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hdivmg/multigrid.hpp"

using namespace hdivmg;

namespace {

Vec random_vec(Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

VelocityBC zero_bc() {
  VelocityBC bcv;
  bcv.g = [](const Vec2&) { return Vec2::Zero().eval(); };
  return bcv;
}

/// Geometric-mean error contraction of the preconditioned iteration
/// e <- (I - B A) e in the energy norm.
Real contraction_rate(const MGPreconditioner& B, int steps = 10) {
  const SpMat& A = B.matrix();
  Vec e = random_vec(A.rows(), 21);
  Real e0 = std::sqrt(e.dot(A * e));
  for (int i = 0; i < steps; ++i) e -= B.apply(Vec(A * e));
  Real en = std::sqrt(e.dot(A * e));
  return std::pow(en / e0, 1.0 / steps);
}

}  // namespace

TEST_CASE("cycles contract the energy error") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  AssemblyOptions opt;
  for (auto cycle : {CycleKind::W, CycleKind::VariableV}) {
    MGOptions mg;
    mg.cycle = cycle;
    MGPreconditioner B(hier, 0, zero_bc(), opt, 1e6, mg);
    REQUIRE(contraction_rate(B) < 0.6);
  }
}

TEST_CASE("contraction improves with more smoothing") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  AssemblyOptions opt;
  Real prev = 1.0;
  for (int m : {1, 2, 4, 8}) {
    MGOptions mg;
    mg.smooth_steps = m;
    MGPreconditioner B(hier, 0, zero_bc(), opt, 1e6, mg);
    Real rate = contraction_rate(B);
    REQUIRE(rate < prev + 0.05);
    prev = rate;
  }
  REQUIRE(prev < 0.25);
}

TEST_CASE("contraction is robust in the penalty parameter") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  std::vector<Real> rates;
  for (Real inv_eps : {1e2, 1e8}) {
    AssemblyOptions opt;
    MGOptions mg;
    MGPreconditioner B(hier, 0, zero_bc(), opt, inv_eps, mg);
    rates.push_back(contraction_rate(B));
  }
  REQUIRE(rates[1] < rates[0] + 0.15);
  REQUIRE(rates[1] < 0.6);
}

TEST_CASE("the cycle is a symmetric preconditioner") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  AssemblyOptions opt;
  opt.beta = 1e3;
  for (auto smoother : {SmootherKind::Multiplicative, SmootherKind::Additive}) {
    MGOptions mg;
    mg.smoother = smoother;
    MGPreconditioner B(hier, 0, zero_bc(), opt, 1e6, mg);
    REQUIRE(B.symmetric());
    Vec u = random_vec(B.matrix().rows(), 31);
    Vec v = random_vec(B.matrix().rows(), 37);
    Real lhs = B.apply(u).dot(v);
    Real rhs = u.dot(B.apply(v));
    REQUIRE_THAT(lhs, Catch::Matchers::WithinRel(rhs, 1e-10));
  }
}

TEST_CASE("higher orders ride the lowest-order hierarchy") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  AssemblyOptions opt;
  for (int k : {1, 2}) {
    MGOptions mg;
    mg.smooth_steps = 2;
    MGPreconditioner B(hier, k, zero_bc(), opt, 1e6, mg);
    REQUIRE(B.space().k == k);
    REQUIRE(contraction_rate(B) < 0.7);
    Vec u = random_vec(B.matrix().rows(), 41);
    Vec v = random_vec(B.matrix().rows(), 43);
    REQUIRE_THAT(B.apply(u).dot(v), Catch::Matchers::WithinRel(u.dot(B.apply(v)), 1e-10));
  }
}

TEST_CASE("repeated construction applies identically") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 2);
  AssemblyOptions opt;
  MGOptions mg;
  MGPreconditioner B1(hier, 0, zero_bc(), opt, 1e6, mg);
  MGPreconditioner B2(hier, 0, zero_bc(), opt, 1e6, mg);
  Vec b = random_vec(B1.matrix().rows(), 47);
  Vec y1 = B1.apply(b);
  Vec y2 = B2.apply(b);
  REQUIRE((y1 - y2).norm() == 0.0);
}

TEST_CASE("preconditioned krylov solves the cavity operator quickly") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  auto lid = [](const Vec2& x) { return Vec2(4 * x.x() * (1 - x.x()), 0.0); };
  VelocityBC bcv;
  bcv.g = lid;
  for (Real beta : {0.0, 1e3}) {
    AssemblyOptions opt;
    opt.beta = beta;
    MGOptions mg;
    MGPreconditioner B(hier, 0, bcv, opt, 1e6, mg);
    LinearOperator A = [&](const Vec& v) { return Vec(B.matrix() * v); };
    Vec x = Vec::Zero(B.matrix().rows());
    SolveStats st = pcg(A, B.as_operator(), B.rhs(), x);
    REQUIRE(st.converged);
    REQUIRE(st.iterations <= 25);
  }
}

TEST_CASE("an advected operator is handled through gmres") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  auto rot = [](const Vec2& x) { return Vec2(x.y() - 0.5, 0.5 - x.x()); };
  HDGVelocity w = interpolate_hdg(hier.levels.back(), 0, rot);
  AssemblyOptions opt;
  opt.nu = 1e-2;
  opt.beta = 1.0;
  opt.advection = &w;
  opt.load = [](const Vec2& x) { return Vec2(std::sin(2 * x.x()), x.y()); };
  MGOptions mg;
  MGPreconditioner B(hier, 0, zero_bc(), opt, 1e4, mg);
  REQUIRE_FALSE(B.symmetric());
  LinearOperator A = [&](const Vec& v) { return Vec(B.matrix() * v); };
  Vec x = Vec::Zero(B.matrix().rows());
  SolveStats st = gmres(A, B.as_operator(), B.rhs(), x);
  REQUIRE(st.converged);
  REQUIRE(st.iterations <= 40);
  REQUIRE((B.rhs() - B.matrix() * x).norm() <=
          std::max(1e-8 * B.rhs().norm(), 1e-10));
}

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hdivmg/assembly.hpp"
#include "hdivmg/krylov.hpp"

using namespace hdivmg;

namespace {

Vec random_vec(Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

LinearOperator identity() {
  return [](const Vec& v) { return v; };
}

struct Setup {
  Mesh mesh;
  CompoundSpace V;
  Constraints con;
  SpMat A;

  Setup(Mesh m, Real inv_eps, const HDGVelocity* advection = nullptr)
      : mesh(std::move(m)), V(mesh, 0) {
    VelocityBC bcv;
    bcv.g = [](const Vec2&) { return Vec2::Zero().eval(); };
    con = Constraints::build(V, bcv);
    AssemblyOptions opt;
    opt.beta = 1.0;
    opt.advection = advection;
    A = assemble_condensed(mesh, V, con, opt).A +
        inv_eps * grad_div_matrix(V, con, con.g_full);
  }
};

}  // namespace

TEST_CASE("conjugate gradients hits the true residual target") {
  Setup s(unit_square_mesh(4), 1e4);
  LinearOperator apply = [&](const Vec& v) { return Vec(s.A * v); };
  Vec diag_inv = s.A.diagonal().cwiseInverse();
  LinearOperator jacobi = [&](const Vec& v) { return Vec(diag_inv.asDiagonal() * v); };
  Vec b = random_vec(s.con.n_free, 3);
  const Real target = std::max(1e-8 * b.norm(), 1e-10);
  for (const auto& M : {identity(), jacobi}) {
    Vec x = Vec::Zero(s.con.n_free);
    SolveStats st = pcg(apply, M, b, x);
    REQUIRE(st.converged);
    REQUIRE_FALSE(st.not_applicable);
    REQUIRE((b - s.A * x).norm() <= target);
    REQUIRE(st.iterations > 0);
  }
}

TEST_CASE("conjugate gradients reports a lost pairing instead of iterating") {
  Mat A = Mat::Identity(6, 6);
  A(5, 5) = -1.0;
  LinearOperator indefinite = [&](const Vec& v) { return Vec(A * v); };
  Vec b = Vec::Unit(6, 5);
  Vec x = Vec::Zero(6);
  SolveStats st = pcg(indefinite, identity(), b, x);
  REQUIRE(st.not_applicable);
  REQUIRE_FALSE(st.converged);

  LinearOperator spd = [](const Vec& v) { return Vec(2.0 * v); };
  LinearOperator flipped = [](const Vec& v) { return Vec(-v); };
  x = Vec::Zero(6);
  st = pcg(spd, flipped, Vec::Ones(6), x);
  REQUIRE(st.not_applicable);
}

TEST_CASE("gmres solves an advected operator through a rough preconditioner") {
  auto rot = [](const Vec2& x) { return Vec2(x.y() - 0.5, 0.5 - x.x()); };
  Mesh mesh = unit_square_mesh(4);
  HDGVelocity w = interpolate_hdg(mesh, 0, rot);
  Setup s(unit_square_mesh(4), 1e4, &w);
  LinearOperator apply = [&](const Vec& v) { return Vec(s.A * v); };
  Vec diag_inv = s.A.diagonal().cwiseInverse();
  LinearOperator jacobi = [&](const Vec& v) { return Vec(diag_inv.asDiagonal() * v); };
  Vec b = random_vec(s.con.n_free, 5);
  Vec x = Vec::Zero(s.con.n_free);
  SolveStats st = gmres(apply, jacobi, b, x);
  REQUIRE(st.converged);
  REQUIRE((b - s.A * x).norm() <= std::max(1e-8 * b.norm(), 1e-10));
  Vec xs = Eigen::SparseLU<SpMat>(s.A).solve(b);
  REQUIRE((x - xs).norm() < 1e-6 * xs.norm());
}

TEST_CASE("gmres with an exact preconditioner finishes in one step") {
  Setup s(unit_square_mesh(2), 1e2);
  Eigen::SimplicialLDLT<SpMat> exact(s.A);
  LinearOperator apply = [&](const Vec& v) { return Vec(s.A * v); };
  LinearOperator M = [&](const Vec& v) { return Vec(exact.solve(v)); };
  Vec b = random_vec(s.con.n_free, 7);
  Vec x = Vec::Zero(s.con.n_free);
  SolveStats st = gmres(apply, M, b, x);
  REQUIRE(st.converged);
  REQUIRE(st.iterations == 1);
}

TEST_CASE("zero right-hand sides terminate without work") {
  LinearOperator op = [](const Vec& v) { return Vec(3.0 * v); };
  Vec b = Vec::Zero(10);
  Vec x = Vec::Zero(10);
  SolveStats st = pcg(op, identity(), b, x);
  REQUIRE(st.converged);
  REQUIRE(st.iterations == 0);
  st = gmres(op, identity(), b, x);
  REQUIRE(st.converged);
  REQUIRE(st.iterations == 0);
  REQUIRE(x.norm() == 0.0);
}

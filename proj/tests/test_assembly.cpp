#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hdivmg/assembly.hpp"

using namespace hdivmg;

namespace {

Mesh free_boundary_mesh(int n) {
  Mesh mesh = unit_square_mesh(n);
  for (auto& f : mesh.facets)
    if (f.tag == bc::kDirichlet) f.tag = bc::kOutflow;
  return mesh;
}

Constraints all_free(const CompoundSpace& V) {
  return Constraints::build(V, VelocityBC{});
}

}  // namespace

TEST_CASE("condensed operator is symmetric positive definite") {
  Mesh mesh = unit_square_mesh(2);
  for (int k = 0; k <= 3; ++k) {
    CompoundSpace V(mesh, k);
    Constraints con = Constraints::build(V, VelocityBC{});
    AssemblyOptions opt;
    opt.nu = 1.7;
    opt.beta = 0.4;
    CondensedSystem sys = assemble_condensed(mesh, V, con, opt);
    Mat A = Mat(sys.A);
    REQUIRE((A - A.transpose()).norm() < 1e-12 * A.norm());
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    REQUIRE(es.eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("condensation matches a dense Schur complement") {
  // Full uncondensed system on a two-element mesh, gradient variable
  // included, eliminated by dense LU and compared block for block.
  Mesh mesh = free_boundary_mesh(1);
  const int k = 2;
  const Real nu = 2.3, beta = 0.7;
  CompoundSpace V(mesh, k);
  Constraints con = all_free(V);
  auto load = [](const Vec2& x) {
    return Vec2(std::sin(3 * x.x()) + x.y(), std::cos(2 * x.y()) - sq(x.x()));
  };

  AssemblyOptions opt;
  opt.nu = nu;
  opt.beta = beta;
  opt.load = load;
  CondensedSystem sys = assemble_condensed(mesh, V, con, opt);

  const int ns = static_cast<int>(reference_data(k).scalar.size());
  const int no = V.n_interior_per_elem();
  const int np = ns - 1;
  const Index ncomp = V.n_compound();
  const Index n_ell = Index(4 * ns) * mesh.ne();
  const Index n_int = Index(no) * mesh.ne();
  const Index n_p = Index(np) * mesh.ne();
  const Index N = ncomp + n_ell + n_int + n_p;
  Mat K = Mat::Zero(N, N);
  Vec r = Vec::Zero(N);

  AssemblyOptions mass_only = opt;
  mass_only.nu = 0.0;  // keeps C out of A so the blocks stay separable
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementContext ctx(mesh, V, e);
    LocalBlocks blk = build_local_blocks(ctx, e, mass_only);
    std::vector<Index> vdof(ctx.nv);
    for (int a = 0; a < ctx.nc; ++a) vdof[a] = ctx.gdof[a];
    for (int j = 0; j < no; ++j) vdof[ctx.nc + j] = ncomp + n_ell + Index(e) * no + j;
    const Index ell0 = ncomp + Index(e) * 4 * ns;
    const Index p0 = ncomp + n_ell + n_int + Index(e) * np;
    // gradient rows: nu^-1 detJ ell + C x = 0
    for (int rr = 0; rr < 4 * ns; ++rr) {
      K(ell0 + rr, ell0 + rr) += ctx.geo.detJ / nu;
      for (int a = 0; a < ctx.nv; ++a) K(ell0 + rr, vdof[a]) += blk.C(rr, a);
    }
    // velocity rows: -C^T ell + beta M x - P^T p = (f, v)
    for (int a = 0; a < ctx.nv; ++a) {
      for (int rr = 0; rr < 4 * ns; ++rr) K(vdof[a], ell0 + rr) -= blk.C(rr, a);
      for (int b = 0; b < ctx.nv; ++b) K(vdof[a], vdof[b]) += blk.A(a, b);
      for (int m = 0; m < np; ++m) K(vdof[a], p0 + m) -= blk.P(m, a);
      r[vdof[a]] += blk.rhs[a];
    }
    // zero-mean pressure rows: -P x = 0
    for (int m = 0; m < np; ++m)
      for (int a = 0; a < ctx.nv; ++a) K(p0 + m, vdof[a]) -= blk.P(m, a);
  }

  const Index nl = N - ncomp;
  Eigen::FullPivLU<Mat> lu(K.bottomRightCorner(nl, nl));
  Mat S = K.topLeftCorner(ncomp, ncomp) -
          K.topRightCorner(ncomp, nl) * lu.solve(K.bottomLeftCorner(nl, ncomp));
  Vec rs = r.head(ncomp) - K.topRightCorner(ncomp, nl) * lu.solve(r.tail(nl));

  Mat A = Mat(sys.A);
  REQUIRE((S - A).norm() < 1e-11 * A.norm());
  REQUIRE((rs - sys.rhs).norm() < 1e-11 * rs.norm());
}

TEST_CASE("constant velocity is reproduced through the boundary data") {
  Mesh mesh = unit_square_mesh(2);
  const Vec2 c(0.8, -0.55);
  for (int k = 0; k <= 2; ++k) {
    CompoundSpace V(mesh, k);
    VelocityBC bcv;
    bcv.g = [&c](const Vec2&) { return c; };
    Constraints con = Constraints::build(V, bcv);
    AssemblyOptions opt;
    opt.nu = 1.3;
    opt.beta = 0.9;
    opt.load = [&](const Vec2&) { return Vec2(opt.beta * c); };
    CondensedSystem sys = assemble_condensed(mesh, V, con, opt);
    Vec u = Eigen::SimplicialLDLT<SpMat>(sys.A).solve(sys.rhs);
    HDGVelocity exact = interpolate_hdg(mesh, k, [&](const Vec2&) { return c; });
    Vec diff = u - con.to_free(exact.compound);
    REQUIRE(diff.lpNorm<Eigen::Infinity>() < 1e-10);
    REQUIRE(exact.interior.lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("linear field recovers its constant gradient variable") {
  Mesh mesh = free_boundary_mesh(2);
  const Real nu = 0.8, beta = 1.1;
  Mat2 b;
  b << 0.3, 0.7, 0.4, -0.3;  // trace free, so the exact pressure vanishes
  const Vec2 a0(0.2, -0.1);
  auto field = [&](const Vec2& x) { return Vec2(a0 + b * x); };
  for (int k = 1; k <= 3; ++k) {
    CompoundSpace V(mesh, k);
    HDGVelocity u = interpolate_hdg(mesh, k, field);
    AssemblyOptions opt;
    opt.nu = nu;
    opt.beta = beta;
    opt.load = [&](const Vec2& x) { return Vec2(beta * field(x)); };
    LocalSolution loc = recover_locals(mesh, V, opt, u.compound);
    const auto& scalar = reference_data(k).scalar;
    const int ns = static_cast<int>(scalar.size());
    for (int e = 0; e < mesh.ne(); ++e) {
      // interior coefficients agree with the direct interpolation
      for (int j = 0; j < V.n_interior_per_elem(); ++j)
        REQUIRE_THAT(loc.interior[V.interior_dof(e, j)],
                     Catch::Matchers::WithinAbs(u.interior[V.interior_dof(e, j)], 1e-10));
      for (int m = 0; m < ns - 1; ++m)
        REQUIRE_THAT(loc.p_ortho[Index(e) * (ns - 1) + m],
                     Catch::Matchers::WithinAbs(0.0, 1e-10));
      // gradient variable equals -nu b at an interior point
      for (int comp = 0; comp < 4; ++comp) {
        Real val = 0;
        for (int m = 0; m < ns; ++m)
          val += loc.grad_coeffs(comp * ns + m, e) * scalar[m].eval(0.31, 0.29);
        REQUIRE_THAT(val, Catch::Matchers::WithinAbs(-nu * b(comp / 2, comp % 2), 1e-9));
      }
    }
  }
}

TEST_CASE("divergence row and grad-div penalty match quadrature") {
  Mesh mesh = free_boundary_mesh(2);
  std::mt19937 rng(11);
  std::uniform_real_distribution<Real> dist(-1, 1);
  for (int k = 0; k <= 2; ++k) {
    CompoundSpace V(mesh, k);
    Constraints con = all_free(V);
    SpMat B = assemble_divergence(V);
    SpMat D = grad_div_matrix(V, con, Vec::Zero(V.n_compound()));
    Vec x(V.n_compound());
    for (Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
    RTField u;
    u.V = V;
    u.flux = x.head(V.n_flux());
    u.interior = Vec(V.n_rt_interior());
    for (Index i = 0; i < u.interior.size(); ++i) u.interior[i] = dist(rng);
    Vec Bx = B * x;
    const TriRule& tr = reference_data(k).vol;
    Real quad_pen = 0;
    for (int e = 0; e < mesh.ne(); ++e) {
      Vec divs;
      eval_rt_field(u, mesh, e, nullptr, &divs);
      Real div_int = 0;
      for (std::size_t q = 0; q < tr.points.size(); ++q)
        div_int += tr.weights[q] * 2.0 * mesh.area(e) * divs[int(q)];
      REQUIRE_THAT(Bx[e], Catch::Matchers::WithinAbs(div_int, 1e-12));
      quad_pen += sq(div_int) / mesh.area(e);
    }
    REQUIRE_THAT(x.dot(D * x), Catch::Matchers::WithinRel(quad_pen, 1e-12));
  }
}

TEST_CASE("picard and newton assemblies share the nonlinear residual") {
  Mesh mesh = unit_square_mesh(2);
  const int k = 1;
  CompoundSpace V(mesh, k);
  HDGVelocity state = interpolate_hdg(mesh, k, [](const Vec2& x) {
    return Vec2(0.6 + x.y() * (1 - x.y()), -0.3 + std::sin(2 * x.x()));
  });
  AssemblyOptions base;
  base.nu = 0.05;
  base.beta = 0.2;
  base.load = [](const Vec2& x) { return Vec2(1 - x.y(), x.x()); };
  base.advection = &state;
  AssemblyOptions newton = base;
  newton.newton = true;
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementContext ctx(mesh, V, e);
    LocalBlocks bp = build_local_blocks(ctx, e, base);
    LocalBlocks bn = build_local_blocks(ctx, e, newton);
    Vec x = ctx.local_velocity(state, e);
    Vec res_p = bp.A * x - bp.rhs;
    Vec res_n = bn.A * x - bn.rhs;
    REQUIRE((res_p - res_n).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("upwind transport sees boundary data through the lifting") {
  // constant transport field through the lid: the Dirichlet columns of the
  // convection block must land in the right-hand side
  Mesh mesh = unit_square_mesh(2);
  const int k = 0;
  CompoundSpace V(mesh, k);
  VelocityBC bcv;
  bcv.g = [](const Vec2&) { return Vec2(1.0, 0.0); };
  Constraints con = Constraints::build(V, bcv);
  HDGVelocity w = interpolate_hdg(mesh, k, [](const Vec2&) { return Vec2(1.0, 0.0); });
  AssemblyOptions opt;
  opt.nu = 0.1;
  opt.beta = 0.0;
  opt.advection = &w;
  CondensedSystem sys = assemble_condensed(mesh, V, con, opt);
  // the exact constant solves the transported problem with zero volume load
  Vec u = Eigen::PartialPivLU<Mat>(Mat(sys.A)).solve(sys.rhs);
  Vec diff = u - con.to_free(w.compound);
  REQUIRE(diff.lpNorm<Eigen::Infinity>() < 1e-10);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hdivmg/manufactured.hpp"
#include "hdivmg/postprocess.hpp"
#include "hdivmg/uzawa.hpp"

using namespace hdivmg;

namespace {

/// One full generalized Stokes pipeline: solve, recover locals, postprocess,
/// measure against the given reference fields.
struct PipelineResult {
  StokesSolution sol;
  ErrorNorms err;
};

PipelineResult run_pipeline(int k, int n_levels, const AssemblyOptions& opt,
                            const VelocityBC& bcv,
                            const std::function<Vec2(const Vec2&)>& u_ex,
                            const std::function<Mat2(const Vec2&)>& grad_ex,
                            const UzawaOptions& uo = {}) {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), n_levels);
  const Mesh& mesh = hier.levels.back();
  MGPreconditioner B(hier, k, bcv, opt, 1e6 * opt.nu, MGOptions{});
  PipelineResult out;
  out.sol = uzawa_solve(B, uo);
  CompoundSpace V(mesh, k);
  LocalSolution loc = recover_locals(mesh, V, opt, out.sol.velocity);
  HDGVelocity u;
  u.V = V;
  u.compound = out.sol.velocity;
  u.interior = loc.interior;
  PostprocessedVelocity post =
      postprocess_velocity(mesh, V, opt.nu, u, loc.grad_coeffs);
  out.err =
      measure_errors(mesh, V, opt.nu, u, loc.grad_coeffs, post, u_ex, grad_ex);
  return out;
}

}  // namespace

TEST_CASE("manufactured source terms match finite differences of the closed forms") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<Real> pos(0.05, 0.95);
  const Real h = 1e-4;

  auto lap_fd = [&](const Vec2& x) {
    Vec2 s = Vec2::Zero();
    for (int d = 0; d < 2; ++d) {
      Vec2 dp = x, dm = x;
      dp[d] += h;
      dm[d] -= h;
      s += manufactured::velocity(dp) + manufactured::velocity(dm);
    }
    return Vec2((s - 4.0 * manufactured::velocity(x)) / (h * h));
  };
  auto grad_p_fd = [&](const Vec2& x) {
    Vec2 g;
    for (int d = 0; d < 2; ++d) {
      Vec2 dp = x, dm = x;
      dp[d] += h;
      dm[d] -= h;
      g[d] = (manufactured::pressure(dp) - manufactured::pressure(dm)) /
             (2 * h);
    }
    return g;
  };
  auto grad_u_fd = [&](const Vec2& x) {
    Mat2 g;
    for (int d = 0; d < 2; ++d) {
      Vec2 dp = x, dm = x;
      dp[d] += h;
      dm[d] -= h;
      g.col(d) =
          (manufactured::velocity(dp) - manufactured::velocity(dm)) / (2 * h);
    }
    return g;
  };

  const Real nu = 0.7, beta = 3.2;
  auto f_st = manufactured::stokes_load(nu, beta);
  auto f_ns = manufactured::navier_stokes_load(0.05);
  for (int trial = 0; trial < 20; ++trial) {
    Vec2 x(pos(rng), pos(rng));
    Vec2 u = manufactured::velocity(x);
    Mat2 g_fd = grad_u_fd(x);

    Vec2 fd_st = -nu * lap_fd(x) + beta * u + grad_p_fd(x);
    REQUIRE((f_st(x) - fd_st).norm() < 1e-5);

    Vec2 fd_ns = -0.05 * lap_fd(x) + g_fd * u + grad_p_fd(x);
    REQUIRE((f_ns(x) - fd_ns).norm() < 1e-5);

    REQUIRE(std::abs(manufactured::velocity_gradient(x).trace()) < 1e-15);
    REQUIRE(std::abs(g_fd.trace()) < 1e-7);
  }

  for (int i = 0; i <= 10; ++i) {
    Real s = i / 10.0;
    REQUIRE(manufactured::velocity(Vec2(0, s)).norm() == 0.0);
    REQUIRE(manufactured::velocity(Vec2(1, s)).norm() == 0.0);
    REQUIRE(manufactured::velocity(Vec2(s, 0)).norm() == 0.0);
    REQUIRE(manufactured::velocity(Vec2(s, 1)).norm() == 0.0);
  }

  LineRule lr = line_rule(8);
  Real p_mean = 0;
  for (std::size_t i = 0; i < lr.points.size(); ++i)
    for (std::size_t j = 0; j < lr.points.size(); ++j)
      p_mean += 0.25 * lr.weights[i] * lr.weights[j] *
                manufactured::pressure(Vec2(0.5 * (lr.points[i] + 1),
                                            0.5 * (lr.points[j] + 1)));
  REQUIRE(std::abs(p_mean) < 1e-14);
}

TEST_CASE("a linear flow is reproduced exactly through the full solve") {
  auto u_ex = [](const Vec2& x) {
    return Vec2(1 + 2 * x.y() + 3 * x.x(), 4 - 3 * x.y() + 5 * x.x());
  };
  auto grad_ex = [](const Vec2&) {
    Mat2 g;
    g << 3, 2, 5, -3;
    return g;
  };

  AssemblyOptions opt;
  opt.nu = 0.5;
  opt.beta = 2.0;
  opt.load = [&](const Vec2& x) {
    return Vec2(2.0 * u_ex(x) + Vec2(1.0, 1.0));
  };
  VelocityBC bcv;
  bcv.g = u_ex;
  UzawaOptions uo;
  uo.krylov.rel_tol = 1e-12;
  uo.krylov.abs_tol = 1e-13;
  PipelineResult r = run_pipeline(1, 2, opt, bcv, u_ex, grad_ex, uo);

  REQUIRE(r.sol.report.converged);
  REQUIRE(r.err.e_u < 1e-7);
  REQUIRE(r.err.e_L < 1e-7);
  REQUIRE(r.err.e_ustar < 1e-7);
  REQUIRE(r.err.div_u < 1e-9);

  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 2);
  const Mesh& mesh = hier.levels.back();
  for (int e = 0; e < mesh.ne(); ++e) {
    Vec2 c = (mesh.vertices[mesh.elements[e].v[0]] +
              mesh.vertices[mesh.elements[e].v[1]] +
              mesh.vertices[mesh.elements[e].v[2]]) /
             3.0;
    REQUIRE(std::abs(r.sol.pressure[e] - (c.x() + c.y() - 1.0)) < 1e-4);
  }
}

TEST_CASE("postprocessing preserves element means and matches the gradient variable weakly") {
  Mesh mesh = unit_square_mesh(2);
  const int k = 2;
  CompoundSpace V(mesh, k);
  const Real nu = 1.3;

  std::mt19937 rng(11);
  std::normal_distribution<Real> coef(0.0, 1.0);
  HDGVelocity u = HDGVelocity::zero(V);
  for (Index i = 0; i < u.compound.size(); ++i) u.compound[i] = coef(rng);
  for (Index i = 0; i < u.interior.size(); ++i) u.interior[i] = coef(rng);
  const int ns = static_cast<int>(reference_data(k).scalar.size());
  Mat grad_coeffs(4 * ns, mesh.ne());
  for (Index i = 0; i < grad_coeffs.size(); ++i)
    grad_coeffs.data()[i] = coef(rng);

  PostprocessedVelocity post =
      postprocess_velocity(mesh, V, nu, u, grad_coeffs);

  const detail::ErrorTables& tab = detail::error_tables(k);
  const ReferenceData& rd = reference_data(k);
  const int ns_hi = static_cast<int>(rd.scalar_hi.size());
  const int nq = static_cast<int>(tab.rule.points.size());
  std::vector<Mat> hi_grad(nq);
  for (int q = 0; q < nq; ++q) {
    hi_grad[q] = Mat::Zero(2, ns_hi);
    for (int s = 0; s < ns_hi; ++s) {
      hi_grad[q](0, s) = rd.scalar_hi_grad[s][0].eval(tab.rule.points[q].x(),
                                                      tab.rule.points[q].y());
      hi_grad[q](1, s) = rd.scalar_hi_grad[s][1].eval(tab.rule.points[q].x(),
                                                      tab.rule.points[q].y());
    }
  }

  for (int e = 0; e < mesh.ne(); ++e) {
    ElementGeometry geo(mesh, e);
    Vec c(3 * V.nfd() + V.n_interior_per_elem());
    for (int le = 0; le < 3; ++le)
      for (int i = 0; i < V.nfd(); ++i)
        c[le * V.nfd() + i] = geo.rt_factor(le, i) *
                              u.compound[V.flux_dof(geo.facet[le], i)];
    for (int j = 0; j < V.n_interior_per_elem(); ++j)
      c[3 * V.nfd() + j] = u.interior[V.interior_dof(e, j)];

    Vec2 mean_star = Vec2::Zero(), mean_h = Vec2::Zero();
    Mat residual = Mat::Zero(ns_hi, 2);
    for (int q = 0; q < nq; ++q) {
      Real w = tab.rule.weights[q] * geo.detJ;
      mean_h += w * ((geo.J * tab.rt_val[q]) / geo.detJ) * c;
      Vec2 us(tab.scalar_hi.row(q).dot(post.coeffs.col(e).head(ns_hi)),
              tab.scalar_hi.row(q).dot(post.coeffs.col(e).tail(ns_hi)));
      mean_star += w * us;
      Mat gp = geo.Jinv.transpose() * hi_grad[q];
      Mat2 L;
      for (int comp = 0; comp < 4; ++comp)
        L(comp / 2, comp % 2) = tab.scalar.row(q).dot(
            grad_coeffs.col(e).segment(Index(comp) * ns, ns));
      for (int i = 0; i < 2; ++i) {
        Vec2 gs = gp * post.coeffs.col(e).segment(Index(i) * ns_hi, ns_hi);
        Vec2 target = gs + L.row(i).transpose() / nu;
        residual.col(i) += w * (gp.transpose() * target);
      }
    }
    REQUIRE((mean_star - mean_h).norm() < 1e-11);
    REQUIRE(residual.norm() < 1e-10);
  }
}

TEST_CASE("the reconstruction gains one order on the manufactured flow") {
  AssemblyOptions opt;
  opt.nu = 1.0;
  opt.beta = 1.0;
  opt.load = manufactured::stokes_load(opt.nu, opt.beta);
  VelocityBC bcv;
  bcv.g = [](const Vec2&) { return Vec2::Zero(); };

  auto errors_at = [&](int k, int n_levels) {
    PipelineResult r =
        run_pipeline(k, n_levels, opt, bcv, manufactured::velocity,
                     manufactured::velocity_gradient);
    REQUIRE(r.sol.report.converged);
    REQUIRE(r.err.div_u < 1e-10);
    return r.err;
  };

  SECTION("lowest order converges at first order or better") {
    ErrorNorms c = errors_at(0, 2), f = errors_at(0, 3);
    REQUIRE(estimated_order(c.e_u, f.e_u) > 0.9);
    REQUIRE(estimated_order(c.e_L, f.e_L) > 0.7);
  }
  SECTION("order one superconverges after reconstruction") {
    ErrorNorms c = errors_at(1, 2), f = errors_at(1, 3);
    REQUIRE(estimated_order(c.e_u, f.e_u) > 1.75);
    REQUIRE(estimated_order(c.e_L, f.e_L) > 1.7);
    REQUIRE(estimated_order(c.e_ustar, f.e_ustar) > 2.7);
    REQUIRE(f.e_ustar < 0.25 * f.e_u);
  }
  SECTION("order two superconverges after reconstruction") {
    ErrorNorms c = errors_at(2, 2), f = errors_at(2, 3);
    REQUIRE(estimated_order(c.e_u, f.e_u) > 2.6);
    REQUIRE(estimated_order(c.e_L, f.e_L) > 2.5);
    REQUIRE(estimated_order(c.e_ustar, f.e_ustar) > 3.4);
  }
}

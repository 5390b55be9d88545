#include <catch2/catch_amalgamated.hpp>

#include "hdivmg/manufactured.hpp"
#include "hdivmg/ns.hpp"
#include "hdivmg/postprocess.hpp"

using namespace hdivmg;

namespace {

VelocityBC zero_bc() {
  VelocityBC bcv;
  bcv.g = [](const Vec2&) { return Vec2::Zero(); };
  return bcv;
}

VelocityBC cavity_bc() {
  VelocityBC bcv;
  bcv.g = [](const Vec2& x) {
    if (x.y() > 1.0 - 1e-12) return Vec2(4.0 * x.x() * (1.0 - x.x()), 0.0);
    return Vec2(0.0, 0.0);
  };
  return bcv;
}

Real field_gap(const Mesh& mesh, const CompoundSpace& V, const NSSolution& a,
               const NSSolution& b) {
  return rt_l2_norm(mesh, V, a.velocity.compound - b.velocity.compound,
                    a.velocity.interior - b.velocity.interior);
}

}  // namespace

TEST_CASE("the nonlinear solve keeps the optimal convergence orders") {
  VelocityBC bcv = zero_bc();
  const Real nu = 0.1;
  auto errors_at = [&](int n_levels) {
    MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), n_levels);
    const Mesh& mesh = hier.levels.back();
    NSSolution sol = navier_stokes_solve(
        hier, 1, bcv, nu, manufactured::navier_stokes_load(nu), 1e6 * nu);
    REQUIRE(sol.report.converged);
    CompoundSpace V(mesh, 1);
    PostprocessedVelocity post = postprocess_velocity(
        mesh, V, nu, sol.velocity, sol.locals.grad_coeffs);
    ErrorNorms err = measure_errors(
        mesh, V, nu, sol.velocity, sol.locals.grad_coeffs, post,
        manufactured::velocity, manufactured::velocity_gradient);
    REQUIRE(err.div_u < 1e-10);
    return err;
  };
  ErrorNorms c = errors_at(2), f = errors_at(3);
  REQUIRE(estimated_order(c.e_u, f.e_u) > 1.75);
  REQUIRE(estimated_order(c.e_L, f.e_L) > 1.7);
  REQUIRE(estimated_order(c.e_ustar, f.e_ustar) > 2.7);
}

TEST_CASE("Newton updates shrink quadratically on the driven cavity") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 3);
  const Real nu = 1e-2;
  NSOptions no;
  no.picard_tol = 1e-1;  // hand over early so several Newton steps remain
  no.mg.cycle = CycleKind::VariableV;
  NSSolution sol = navier_stokes_solve(hier, 0, cavity_bc(), nu, {},
                                       1e6 * nu, no);
  REQUIRE(sol.report.converged);
  const auto& d = sol.report.newton_diffs;
  REQUIRE(d.size() >= 3);
  REQUIRE(d[1] < 5.0 * d[0] * d[0]);
  REQUIRE(d[2] < 5.0 * d[1] * d[1]);
  REQUIRE(d[1] < 0.1 * d[0]);
  REQUIRE(d[2] < 0.1 * d[1]);
}

TEST_CASE("a tight Picard-only run lands on the Newton fixed point") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 2);
  const Mesh& mesh = hier.levels.back();
  const Real nu = 0.1;
  VelocityBC bcv = zero_bc();
  auto load = manufactured::navier_stokes_load(nu);

  NSOptions tight;
  tight.picard_tol = 1e-11;
  tight.max_picard = 200;
  tight.max_newton = 0;
  NSSolution picard_only =
      navier_stokes_solve(hier, 0, bcv, nu, load, 1e6 * nu, tight);
  NSSolution with_newton =
      navier_stokes_solve(hier, 0, bcv, nu, load, 1e6 * nu);

  REQUIRE(picard_only.report.converged);
  REQUIRE(picard_only.report.newton_iterations == 0);
  REQUIRE(with_newton.report.converged);
  CompoundSpace V(mesh, 0);
  REQUIRE(field_gap(mesh, V, picard_only, with_newton) < 1e-9);
}

TEST_CASE("pseudo-time stepping shares the stationary fixed point") {
  MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), 2);
  const Mesh& mesh = hier.levels.back();
  const Real nu = 0.05;
  VelocityBC bcv = zero_bc();
  auto load = manufactured::navier_stokes_load(nu);

  NSOptions pt;
  pt.pseudo_time_inv = 0.5;
  NSSolution marched =
      navier_stokes_solve(hier, 0, bcv, nu, load, 1e6 * nu, pt);
  NSSolution plain = navier_stokes_solve(hier, 0, bcv, nu, load, 1e6 * nu);

  REQUIRE(marched.report.converged);
  REQUIRE(plain.report.converged);
  CompoundSpace V(mesh, 0);
  REQUIRE(field_gap(mesh, V, marched, plain) < 1e-9);
}

#pragma once

#include <cmath>
#include <vector>

#include "hdivmg/uzawa.hpp"

namespace hdivmg {

struct NSOptions {
  /// The Picard phase ends when the L2 norm of the difference between
  /// consecutive velocity iterates drops below this.
  Real picard_tol = 1e-4;
  /// The Newton phase ends when the update norm drops below
  /// max(rel * |u|, abs).
  Real newton_rel_tol = 1e-8;
  Real newton_abs_tol = 1e-10;
  int max_picard = 60;
  int max_newton = 25;
  /// When positive, backward-Euler pseudo-time stepping with step size
  /// 1/pseudo_time_inv runs during the Picard phase: the mass term damps the
  /// transport dominance and the march shares its fixed point with the
  /// stationary problem. The Newton phase always targets the stationary
  /// equations.
  Real pseudo_time_inv = 0.0;
  MGOptions mg;
  UzawaOptions uzawa;
};

struct NSReport {
  int picard_iterations = 0;
  int newton_iterations = 0;
  std::vector<int> picard_inner;  // Krylov counts of every Picard inner solve
  std::vector<int> newton_inner;
  std::vector<Real> picard_diffs;  // consecutive velocity difference norms
  std::vector<Real> newton_diffs;
  bool converged = false;
  bool not_applicable = false;
  Real final_divergence = 0;

  Real avg_picard_inner() const {
    if (picard_inner.empty()) return 0;
    Real s = 0;
    for (int i : picard_inner) s += i;
    return s / Real(picard_inner.size());
  }
  Real avg_newton_inner() const {
    if (newton_inner.empty()) return 0;
    Real s = 0;
    for (int i : newton_inner) s += i;
    return s / Real(newton_inner.size());
  }
};

struct NSSolution {
  HDGVelocity velocity;  // full compound plus recovered interior
  Vec pressure;          // element mean values
  LocalSolution locals;  // gradient variable of the final state
  NSReport report;
};

/// Stationary Navier-Stokes driver: a generalized Stokes solve without the
/// convection term provides the initial guess, Picard iterations walk into
/// the attraction basin, and total-update Newton steps finish the job. Every
/// linearized system is solved by the augmented-Lagrangian Uzawa iteration,
/// preconditioned by a multigrid hierarchy rebuilt around the current
/// transport field, with the previous velocity warm-starting the Krylov
/// solver.
inline NSSolution navier_stokes_solve(
    const MeshHierarchy& hier, int k, const VelocityBC& bc, Real nu,
    const std::function<Vec2(const Vec2&)>& load, Real inv_eps,
    const NSOptions& opt = {}) {
  const Mesh& mesh = hier.levels.back();
  CompoundSpace V(mesh, k);

  NSSolution out;
  AssemblyOptions aopt;
  aopt.nu = nu;
  aopt.load = load;

  auto linear_step = [&](const AssemblyOptions& step_opt,
                         const HDGVelocity* warm, std::vector<int>& inner,
                         Real& divergence) -> bool {
    MGPreconditioner B(hier, k, bc, step_opt, inv_eps, opt.mg);
    UzawaOptions uo = opt.uzawa;
    if (warm) uo.initial_velocity = &warm->compound;
    StokesSolution s = uzawa_solve(B, uo);
    for (int it : s.report.inner_iterations) inner.push_back(it);
    if (s.report.not_applicable || !s.report.converged) {
      out.report.not_applicable = s.report.not_applicable;
      return false;
    }
    out.pressure = s.pressure;
    out.locals = recover_locals(mesh, V, step_opt, s.velocity);
    out.velocity.V = V;
    out.velocity.compound = s.velocity;
    out.velocity.interior = out.locals.interior;
    divergence = s.report.final_divergence;
    return true;
  };

  std::vector<int> stokes_inner;
  if (!linear_step(aopt, nullptr, stokes_inner, out.report.final_divergence))
    return out;

  HDGVelocity prev = out.velocity;
  for (int n = 0; n < opt.max_picard; ++n) {
    AssemblyOptions step_opt = aopt;
    step_opt.advection = &prev;
    if (opt.pseudo_time_inv > 0) {
      step_opt.mass_coef = opt.pseudo_time_inv;
      step_opt.mass_field = &prev;
    }
    if (!linear_step(step_opt, &prev, out.report.picard_inner,
                     out.report.final_divergence))
      return out;
    ++out.report.picard_iterations;
    Real diff = rt_l2_norm(mesh, V, out.velocity.compound - prev.compound,
                           out.velocity.interior - prev.interior);
    out.report.picard_diffs.push_back(diff);
    prev = out.velocity;
    if (diff < opt.picard_tol) break;
  }
  if (opt.max_newton == 0) {
    out.report.converged = !out.report.picard_diffs.empty() &&
                           out.report.picard_diffs.back() < opt.picard_tol;
    return out;
  }

  for (int n = 0; n < opt.max_newton; ++n) {
    AssemblyOptions step_opt = aopt;
    step_opt.advection = &prev;
    step_opt.newton = true;
    if (!linear_step(step_opt, &prev, out.report.newton_inner,
                     out.report.final_divergence))
      return out;
    ++out.report.newton_iterations;
    Real diff = rt_l2_norm(mesh, V, out.velocity.compound - prev.compound,
                           out.velocity.interior - prev.interior);
    out.report.newton_diffs.push_back(diff);
    prev = out.velocity;
    Real scale = rt_l2_norm(mesh, V, prev.compound, prev.interior);
    if (diff < std::max(opt.newton_rel_tol * scale, opt.newton_abs_tol)) {
      out.report.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace hdivmg

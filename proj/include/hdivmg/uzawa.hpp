#pragma once

#include <vector>

#include "hdivmg/multigrid.hpp"

namespace hdivmg {

struct UzawaOptions {
  /// Two steps suffice at the default penalty: the pressure error contracts
  /// by eps / (eps + mu0) per step, which the penalty pushes to round-off.
  int outer_iterations = 2;
  KrylovOptions krylov;
  /// Optional warm start, full compound coefficients. Constrained entries
  /// are ignored; the solve always carries the boundary data of its own
  /// constraint set.
  const Vec* initial_velocity = nullptr;
  /// Keep the pressure iterate of every outer step in the report, which is
  /// how the per-step contraction factor is observed.
  bool record_pressure_history = false;
};

struct UzawaReport {
  std::vector<int> inner_iterations;
  std::vector<Real> divergence_history;  // max element divergence per step
  std::vector<Vec> pressure_history;     // filled on request only
  bool converged = false;
  bool not_applicable = false;
  Real final_divergence = 0;
};

struct StokesSolution {
  Vec velocity;  // full compound coefficients, boundary data included
  Vec pressure;  // element mean values
  UzawaReport report;
};

/// Runs the preconditioned inner Krylov solve matching the operator: the
/// conjugate gradient when it is symmetric, GMRES otherwise.
inline SolveStats inner_solve(const MGPreconditioner& B, const Vec& rhs, Vec& x,
                              const KrylovOptions& opt) {
  LinearOperator A = [&B](const Vec& v) { return Vec(B.matrix() * v); };
  return B.symmetric() ? pcg(A, B.as_operator(), rhs, x, opt)
                       : gmres(A, B.as_operator(), rhs, x, opt);
}

/// Augmented-Lagrangian Uzawa iteration on the penalized velocity system:
/// solve for the velocity with the current element mean pressure in the
/// right-hand side, then shift the pressure by the scaled element
/// divergence. On enclosed domains the pressure is kept at zero mean.
inline StokesSolution uzawa_solve(const MGPreconditioner& B,
                                  const UzawaOptions& opt = {}) {
  const CompoundSpace& V = B.space();
  const Constraints& con = B.constraints();
  const Mesh& mesh = *V.mesh;
  SpMat Bdiv = assemble_divergence(V);
  Vec areas = element_areas(mesh);
  bool enclosed = true;
  for (const auto& f : mesh.facets)
    if (f.tag == bc::kOutflow) enclosed = false;

  StokesSolution sol;
  sol.pressure = Vec::Zero(mesh.ne());
  Vec u_free = opt.initial_velocity ? con.to_free(*opt.initial_velocity)
                                    : Vec(Vec::Zero(con.n_free));
  sol.report.converged = true;
  for (int it = 0; it < opt.outer_iterations; ++it) {
    // momentum convention A u - B^T p = f, so the current pressure adds
    Vec rhs = B.rhs() + con.to_free(Vec(Bdiv.transpose() * sol.pressure));
    SolveStats st = inner_solve(B, rhs, u_free, opt.krylov);
    sol.report.inner_iterations.push_back(st.iterations);
    if (st.not_applicable) {
      sol.report.not_applicable = true;
      sol.report.converged = false;
      break;
    }
    sol.report.converged = sol.report.converged && st.converged;
    sol.velocity = con.to_full(u_free);
    Vec div = (Bdiv * sol.velocity).cwiseQuotient(areas);
    sol.pressure -= B.penalty() * div;
    if (enclosed)
      sol.pressure.array() -= areas.dot(sol.pressure) / areas.sum();
    sol.report.divergence_history.push_back(div.cwiseAbs().maxCoeff());
    if (opt.record_pressure_history)
      sol.report.pressure_history.push_back(sol.pressure);
  }
  if (!sol.report.divergence_history.empty())
    sol.report.final_divergence = sol.report.divergence_history.back();
  if (sol.velocity.size() == 0) sol.velocity = con.to_full(u_free);
  return sol;
}

}  // namespace hdivmg

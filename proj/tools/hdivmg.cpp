// Benchmark harness for the H(div) multigrid solver. Subcommands cover the
// manufactured-solution convergence study (eoc), the lid-driven cavity and
// backward-facing step iteration counts (cavity, bfs, mg-study), and the
// lowest-order congruence check against the nonconforming midpoint scheme
// (equiv-check). Every solved configuration becomes one CSV row; summaries
// go to the other stream so the CSV stays machine-readable.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hdivmg/cr.hpp"
#include "hdivmg/io.hpp"
#include "hdivmg/manufactured.hpp"
#include "hdivmg/ns.hpp"
#include "hdivmg/postprocess.hpp"

namespace {

using namespace hdivmg;

struct RunConfig {
  int k = 0;
  int levels = -1;  // hierarchy depth scanned; per-subcommand default
  int level = 4;    // single finest level (cavity, bfs)
  Real nu = 1.0;
  Real beta = 0.0;
  int m = 1;
  std::string cycle = "v";
  int penalty_exponent = 6;
  int seed = 0;
  bool ns = false;
  Real pseudo_time_inv = 0.0;
  std::string out, dump_mesh, dump_matrix, mg_trace;
};

struct Runner {
  RunConfig cfg;
  std::ofstream file;
  std::ostream* csv = &std::cout;
  std::ostream* note = &std::cerr;
  std::vector<MGTraceEntry> trace;
  int next_id = 1;

  void open() {
    if (cfg.out.empty()) return;
    file.open(cfg.out);
    if (!file) throw std::runtime_error("cannot open " + cfg.out);
    csv = &file;
    note = &std::cout;  // stdout is free once the CSV goes to a file
  }

  CsvRow fresh_row(const std::string& sub) {
    CsvRow row;
    row.run_id = next_id++;
    row.subcommand = sub;
    row.k = cfg.k;
    row.nu = cfg.nu;
    row.beta = cfg.beta;
    row.m = cfg.m;
    row.cycle = cfg.cycle;
    return row;
  }
};

Real inv_eps_of(const RunConfig& cfg) {
  return cfg.nu * std::pow(10.0, cfg.penalty_exponent);
}

MGOptions mg_options(const RunConfig& cfg, std::vector<MGTraceEntry>* trace) {
  MGOptions mg;
  mg.cycle = cfg.cycle == "w" ? CycleKind::W : CycleKind::VariableV;
  mg.smooth_steps = cfg.m;
  mg.trace = trace;
  return mg;
}

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

VelocityBC bfs_bc() {
  VelocityBC bcv;
  bcv.g = [](const Vec2& x) {
    if (x.x() < 1e-12) return Vec2(16.0 * (1.0 - x.y()) * (x.y() - 0.5), 0.0);
    return Vec2(0.0, 0.0);
  };
  return bcv;
}

std::function<Vec2(const Vec2&)> zero_load() {
  return [](const Vec2&) { return Vec2(Vec2::Zero()); };
}

/// The finest penalized condensed operator of a run, reassembled with the
/// advection field of the final state when one is given.
void dump_matrix_file(const RunConfig& cfg, const Mesh& mesh,
                      const VelocityBC& bc, const HDGVelocity* advection) {
  if (cfg.dump_matrix.empty()) return;
  CompoundSpace V(mesh, cfg.k);
  Constraints con = Constraints::build(V, bc);
  AssemblyOptions opt;
  opt.nu = cfg.nu;
  opt.beta = cfg.beta;
  opt.advection = advection;
  CondensedSystem sys = assemble_condensed(mesh, V, con, opt);
  SpMat D = grad_div_matrix(V, con, con.g_full, nullptr);
  SpMat A = sys.A + inv_eps_of(cfg) * D;
  std::ofstream os(cfg.dump_matrix);
  if (!os) throw std::runtime_error("cannot open " + cfg.dump_matrix);
  write_matrix_market(os, A);
}

void dump_mesh_file(const RunConfig& cfg, const Mesh& mesh) {
  if (!cfg.dump_mesh.empty()) write_mesh(mesh, cfg.dump_mesh);
}

void write_trace_file(const RunConfig& cfg, const std::vector<MGTraceEntry>& tr) {
  if (cfg.mg_trace.empty()) return;
  std::ofstream os(cfg.mg_trace);
  if (!os) throw std::runtime_error("cannot open " + cfg.mg_trace);
  os << "cycle,level,stage,residual\n";
  os.precision(12);
  int top = 0;
  for (const auto& e : tr) top = std::max(top, e.level);
  int cycle = 0;
  for (const auto& e : tr) {
    if (e.level == top && e.entering) ++cycle;
    os << cycle << ',' << e.level << ',' << (e.entering ? "enter" : "leave")
       << ',' << e.residual << '\n';
  }
}

void fill_stokes_report(CsvRow& row, const UzawaReport& rep) {
  row.outer = int(rep.inner_iterations.size());
  row.inner_iters = rep.inner_iterations;
  if (rep.not_applicable)
    row.status = "NA";
  else if (!rep.converged)
    row.status = "fail";
  else
    row.div_u = rep.final_divergence;
}

void fill_ns_report(CsvRow& row, const NSReport& rep) {
  row.outer = rep.picard_iterations + rep.newton_iterations;
  row.inner_iters = rep.picard_inner;
  row.inner_iters.insert(row.inner_iters.end(), rep.newton_inner.begin(),
                         rep.newton_inner.end());
  if (!rep.picard_inner.empty()) row.avg_picard = rep.avg_picard_inner();
  if (!rep.newton_inner.empty()) row.avg_newton = rep.avg_newton_inner();
  if (rep.not_applicable)
    row.status = "NA";
  else if (!rep.converged)
    row.status = "fail";
  else
    row.div_u = rep.final_divergence;
}

/// One driven-flow solve (no manufactured load) on the given base mesh at
/// hierarchy depth `level`; fills the iteration columns of the row.
CsvRow driven_solve(Runner& R, const std::string& sub, const Mesh& base,
                    const VelocityBC& bc, int level, bool with_trace) {
  const RunConfig& cfg = R.cfg;
  MeshHierarchy hier = MeshHierarchy::build(base, level);
  const Mesh& mesh = hier.levels.back();
  std::vector<MGTraceEntry>* tr =
      with_trace && !cfg.mg_trace.empty() ? &R.trace : nullptr;
  MGOptions mg = mg_options(cfg, tr);

  CsvRow row = R.fresh_row(sub);
  row.level = level;
  const HDGVelocity* dump_advection = nullptr;
  NSSolution ns_sol;
  if (cfg.ns) {
    NSOptions opt;
    opt.mg = mg;
    opt.pseudo_time_inv = cfg.pseudo_time_inv;
    ns_sol = navier_stokes_solve(hier, cfg.k, bc, cfg.nu, zero_load(),
                                 inv_eps_of(cfg), opt);
    fill_ns_report(row, ns_sol.report);
    if (ns_sol.report.converged) dump_advection = &ns_sol.velocity;
  } else {
    AssemblyOptions opt;
    opt.nu = cfg.nu;
    opt.beta = cfg.beta;
    MGPreconditioner B(hier, cfg.k, bc, opt, inv_eps_of(cfg), mg);
    StokesSolution sol = uzawa_solve(B);
    fill_stokes_report(row, sol.report);
  }
  if (with_trace) {
    dump_mesh_file(cfg, mesh);
    dump_matrix_file(cfg, mesh, bc, dump_advection);
  }
  return row;
}

int run_cavity_or_bfs(Runner& R, const std::string& sub) {
  const Mesh base = sub == "bfs" ? step_mesh(2) : unit_square_mesh(2);
  const VelocityBC bc = sub == "bfs" ? bfs_bc() : cavity_bc();
  CsvRow row = driven_solve(R, sub, base, bc, R.cfg.level, true);
  write_csv_row(*R.csv, row);
  write_trace_file(R.cfg, R.trace);
  *R.note << sub << ": level " << row.level << " status " << row.status
          << ", inner iterations";
  for (int n : row.inner_iters) *R.note << ' ' << n;
  *R.note << "\n";
  return 0;
}

/// Iteration counts of the cavity across all levels up to --levels at fixed
/// (k, beta, m, cycle): one block of the robustness tables per invocation.
int run_mg_study(Runner& R) {
  const Mesh base = unit_square_mesh(2);
  const VelocityBC bc = cavity_bc();
  for (int l = 1; l <= R.cfg.levels; ++l) {
    CsvRow row = driven_solve(R, "mg-study", base, bc, l, l == R.cfg.levels);
    write_csv_row(*R.csv, row);
    R.csv->flush();
  }
  write_trace_file(R.cfg, R.trace);
  return 0;
}

struct LevelErrors {
  Real e_u = 0, e_L = 0, e_us = 0, div = 0;
  bool ok = false;
};

/// Manufactured-solution convergence study on the unit square. The estimated
/// orders are printed between consecutive levels; the exit gate checks the
/// finest pair whose errors sit above the round-off floor, and is enforced
/// only for runs with at least three levels (a single pair cannot separate
/// the asymptotic order from the preasymptotic transient).
int run_eoc(Runner& R) {
  const RunConfig& cfg = R.cfg;
  const Real floor = 1e-8;
  std::vector<LevelErrors> data;
  std::vector<std::string> statuses;

  for (int l = 1; l <= cfg.levels; ++l) {
    MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), l);
    const Mesh& mesh = hier.levels.back();
    const bool finest = l == cfg.levels;
    std::vector<MGTraceEntry>* tr =
        finest && !cfg.mg_trace.empty() ? &R.trace : nullptr;
    MGOptions mg = mg_options(cfg, tr);
    VelocityBC bcv = zero_bc();

    CsvRow row = R.fresh_row("eoc");
    row.level = l;
    LevelErrors d;
    if (cfg.ns) {
      NSOptions opt;
      opt.mg = mg;
      opt.pseudo_time_inv = cfg.pseudo_time_inv;
      NSSolution sol =
          navier_stokes_solve(hier, cfg.k, bcv, cfg.nu,
                              manufactured::navier_stokes_load(cfg.nu),
                              inv_eps_of(cfg), opt);
      fill_ns_report(row, sol.report);
      if (sol.report.converged) {
        PostprocessedVelocity post =
            postprocess_velocity(mesh, sol.velocity.V, cfg.nu, sol.velocity,
                                 sol.locals.grad_coeffs);
        ErrorNorms err = measure_errors(mesh, sol.velocity.V, cfg.nu,
                                        sol.velocity, sol.locals.grad_coeffs,
                                        post, manufactured::velocity,
                                        manufactured::velocity_gradient);
        d = {err.e_u, err.e_L, err.e_ustar, err.div_u, true};
      }
    } else {
      AssemblyOptions opt;
      opt.nu = cfg.nu;
      opt.beta = cfg.beta;
      opt.load = manufactured::stokes_load(cfg.nu, cfg.beta);
      MGPreconditioner B(hier, cfg.k, bcv, opt, inv_eps_of(cfg), mg);
      StokesSolution sol = uzawa_solve(B);
      fill_stokes_report(row, sol.report);
      if (sol.report.converged) {
        CompoundSpace V(mesh, cfg.k);
        LocalSolution loc = recover_locals(mesh, V, opt, sol.velocity);
        HDGVelocity u;
        u.V = V;
        u.compound = sol.velocity;
        u.interior = loc.interior;
        PostprocessedVelocity post =
            postprocess_velocity(mesh, V, cfg.nu, u, loc.grad_coeffs);
        ErrorNorms err =
            measure_errors(mesh, V, cfg.nu, u, loc.grad_coeffs, post,
                           manufactured::velocity,
                           manufactured::velocity_gradient);
        d = {err.e_u, err.e_L, err.e_ustar, err.div_u, true};
      }
    }
    if (d.ok) {
      row.e_u = d.e_u;
      row.e_L = d.e_L;
      row.e_ustar = d.e_us;
      row.div_u = d.div;
      if (!data.empty() && data.back().ok) {
        row.eoc_u = estimated_order(data.back().e_u, d.e_u);
        row.eoc_L = estimated_order(data.back().e_L, d.e_L);
        row.eoc_ustar = estimated_order(data.back().e_us, d.e_us);
      }
    }
    data.push_back(d);
    statuses.push_back(row.status);
    write_csv_row(*R.csv, row);
    R.csv->flush();
    if (finest) {
      dump_mesh_file(cfg, mesh);
      dump_matrix_file(cfg, mesh, bcv, nullptr);
    }
  }
  write_trace_file(cfg, R.trace);

  bool pass = true;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (statuses[i] != "ok") {
      *R.note << "eoc: level " << i + 1 << " status " << statuses[i] << "\n";
      pass = false;
    } else if (data[i].div > floor) {
      *R.note << "eoc: level " << i + 1 << " divergence " << data[i].div
              << " above " << floor << "\n";
      pass = false;
    }
  }
  // Gate each error family on the finest consecutive pair above the floor;
  // families entirely at round-off pass by having nothing left to measure.
  auto gate = [&](const char* name, auto value, Real required) {
    for (int l = int(data.size()) - 1; l >= 1; --l) {
      if (!data[l].ok || !data[l - 1].ok) continue;
      Real fine = value(data[l]), coarse = value(data[l - 1]);
      if (fine <= floor || coarse <= floor) continue;
      Real eoc = estimated_order(coarse, fine);
      *R.note << "eoc: " << name << " order " << eoc << " (required "
              << required << ") between levels " << l << " and " << l + 1
              << "\n";
      if (eoc < required) pass = false;
      return;
    }
  };
  if (int(data.size()) >= 3) {
    gate("e_u", [](const LevelErrors& d) { return d.e_u; }, cfg.k + 0.8);
    gate("e_L", [](const LevelErrors& d) { return d.e_L; }, cfg.k + 0.8);
    if (cfg.k >= 1)
      gate("e_ustar", [](const LevelErrors& d) { return d.e_us; }, cfg.k + 1.8);
  }
  *R.note << "eoc: " << (pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

/// Lowest-order congruence against the midpoint scheme on unit-square
/// levels 1..--levels for (nu, beta) in {(1,0), (1,1e3), (1e-2,0)}.
int run_equiv(Runner& R) {
  const RunConfig& cfg = R.cfg;
  struct Setup {
    Real nu, beta;
  };
  const Setup setups[] = {{1.0, 0.0}, {1.0, 1e3}, {1e-2, 0.0}};
  const Real tol = 1e-12;
  Real max_gap = 0.0;
  bool pass = true;

  for (int l = 1; l <= cfg.levels; ++l) {
    MeshHierarchy hier = MeshHierarchy::build(unit_square_mesh(2), l);
    const Mesh& mesh = hier.levels.back();
    for (const Setup& s : setups) {
      const Real inv_eps = s.nu * std::pow(10.0, cfg.penalty_exponent);
      CompoundSpace V(mesh, 0);
      VelocityBC bc = cavity_bc();
      Constraints con = Constraints::build(V, bc);
      AssemblyOptions opt;
      opt.nu = s.nu;
      opt.beta = s.beta;
      opt.load = manufactured::stokes_load(s.nu, s.beta);
      CondensedSystem sys = assemble_condensed(mesh, V, con, opt);
      SpMat D = grad_div_matrix(V, con, con.g_full, nullptr);
      SpMat A_sp = sys.A + inv_eps * D;
      Mat A_hdg = Mat(A_sp);

      cr::System crs = cr::assemble(mesh, s.nu, s.beta, inv_eps, opt.load, bc.g);
      Mat F = Mat(cr::from_compound(V));
      Mat P(crs.free_to_full.size(), con.free_to_full.size());
      for (std::size_t i = 0; i < crs.free_to_full.size(); ++i)
        for (std::size_t j = 0; j < con.free_to_full.size(); ++j)
          P(i, j) = F(crs.free_to_full[i], con.free_to_full[j]);
      Real gap = (A_hdg - P.transpose() * Mat(crs.A) * P).norm() / A_hdg.norm();
      max_gap = std::max(max_gap, gap);

      CsvRow row = R.fresh_row("equiv-check");
      row.k = 0;
      row.level = l;
      row.nu = s.nu;
      row.beta = s.beta;
      if (gap > tol) {
        row.status = "fail";
        pass = false;
      }
      write_csv_row(*R.csv, row);

      if (l == cfg.levels && &s == &setups[2]) {
        dump_mesh_file(cfg, mesh);
        if (!cfg.dump_matrix.empty()) {
          std::ofstream os(cfg.dump_matrix);
          if (!os) throw std::runtime_error("cannot open " + cfg.dump_matrix);
          write_matrix_market(os, A_sp);
        }
      }
    }
  }
  *R.note << "equiv-check: max relative Frobenius gap " << max_gap
          << (pass ? " <= " : " > ") << tol << ", "
          << (pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H(div) multigrid benchmark harness for generalized Stokes "
               "and stationary Navier-Stokes"};
  app.require_subcommand(1);
  Runner R;
  RunConfig& cfg = R.cfg;

  auto add_common = [&cfg](CLI::App* sc, bool with_ns) {
    sc->add_option("--k", cfg.k, "Polynomial order of the velocity space")
        ->check(CLI::Range(0, 4));
    sc->add_option("--nu", cfg.nu, "Viscosity")->check(CLI::PositiveNumber);
    sc->add_option("--m", cfg.m,
                   "Smoothing steps, also the relaxation step count")
        ->check(CLI::Range(1, 16));
    sc->add_option("--cycle", cfg.cycle,
                   "Multigrid cycle: v = variable V, w = W")
        ->check(CLI::IsMember({"v", "w"}));
    sc->add_option("--penalty-exponent", cfg.penalty_exponent,
                   "Divergence penalty 1/eps = nu * 10^exponent")
        ->check(CLI::Range(0, 12));
    sc->add_option("--seed", cfg.seed,
                   "Recorded for provenance; every solver path is "
                   "deterministic");
    sc->add_option("--out", cfg.out, "CSV output path (default stdout)");
    sc->add_option("--dump-mesh", cfg.dump_mesh,
                   "Write the finest mesh of the run to this path");
    sc->add_option("--dump-matrix", cfg.dump_matrix,
                   "Write the finest penalized condensed operator "
                   "(MatrixMarket) to this path");
    sc->add_option("--mg-trace", cfg.mg_trace,
                   "Write per-level cycle residual norms of the finest "
                   "solve to this path");
    if (with_ns) {
      sc->add_flag("--ns", cfg.ns,
                   "Solve stationary Navier-Stokes instead of generalized "
                   "Stokes (requires --beta 0)");
      sc->add_option("--pseudo-time-inv", cfg.pseudo_time_inv,
                     "Backward-Euler pseudo-time step reciprocal applied "
                     "during the Picard phase (0 = off)")
          ->check(CLI::NonNegativeNumber);
    }
  };
  auto add_beta = [&cfg](CLI::App* sc) {
    sc->add_option("--beta", cfg.beta, "Reaction coefficient")
        ->check(CLI::NonNegativeNumber);
  };

  CLI::App* eoc = app.add_subcommand(
      "eoc", "Convergence orders against the manufactured solution");
  eoc->add_option("--levels", cfg.levels,
                  "Number of refinement levels, coarsest is level 1 "
                  "(default 4)")
      ->check(CLI::Range(1, 8));
  add_beta(eoc);
  add_common(eoc, true);

  CLI::App* cavity = app.add_subcommand(
      "cavity", "Lid-driven cavity iteration counts at one level");
  cavity->add_option("--level", cfg.level,
                     "Refinement level, 8 * 4^(level-1) elements (default 4)")
      ->check(CLI::Range(1, 8));
  add_beta(cavity);
  add_common(cavity, true);

  CLI::App* bfs = app.add_subcommand(
      "bfs", "Backward-facing step iteration counts at one level");
  bfs->add_option("--level", cfg.level,
                  "Refinement level, 30 * 4^(level-1) elements (default 4)")
      ->check(CLI::Range(1, 8));
  add_beta(bfs);
  add_common(bfs, true);

  CLI::App* equiv = app.add_subcommand(
      "equiv-check",
      "Congruence of the lowest-order condensed operator with the "
      "nonconforming midpoint scheme");
  equiv->add_option("--levels", cfg.levels,
                    "Unit-square refinement levels to check (default 3)")
      ->check(CLI::Range(1, 6));
  add_common(equiv, false);

  CLI::App* study = app.add_subcommand(
      "mg-study",
      "Cavity iteration counts across all levels up to --levels at fixed "
      "(k, beta, m, cycle)");
  study->add_option("--levels", cfg.levels,
                    "Finest refinement level of the scan (default 5)")
      ->check(CLI::Range(1, 8));
  add_beta(study);
  add_common(study, false);

  CLI11_PARSE(app, argc, argv);

  if (cfg.levels < 0)
    cfg.levels = eoc->parsed() ? 4 : equiv->parsed() ? 3 : 5;
  if (cfg.ns && cfg.beta != 0.0) {
    std::cerr << "--ns requires --beta 0: the transport solver has no "
                 "reaction term\n";
    return 2;
  }

  try {
    R.open();
    write_csv_header(*R.csv);
    int code = 0;
    if (eoc->parsed())
      code = run_eoc(R);
    else if (cavity->parsed())
      code = run_cavity_or_bfs(R, "cavity");
    else if (bfs->parsed())
      code = run_cavity_or_bfs(R, "bfs");
    else if (equiv->parsed())
      code = run_equiv(R);
    else
      code = run_mg_study(R);
    R.csv->flush();
    return code;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}

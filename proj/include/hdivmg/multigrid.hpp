#pragma once

#include <memory>
#include <vector>

#include "hdivmg/krylov.hpp"
#include "hdivmg/smoother.hpp"
#include "hdivmg/transfer.hpp"

namespace hdivmg {

enum class CycleKind { V, W, VariableV };
enum class SmootherKind { Multiplicative, Additive };

/// One row of the optional cycle trace: the residual norm seen when a level
/// is entered (before pre-smoothing) and left (after post-smoothing). For
/// k >= 1 the order-k head is reported one index above the finest mesh level.
struct MGTraceEntry {
  int level;
  bool entering;
  Real residual;
};

struct MGOptions {
  CycleKind cycle = CycleKind::W;
  SmootherKind smoother = SmootherKind::Multiplicative;
  /// Smoothing steps on the finest level; the variable cycle doubles them on
  /// every coarsening, which keeps the total work linear because the levels
  /// shrink by four.
  int smooth_steps = 1;
  Real jacobi_damping = 1.0 / 3.0;
  /// When set, every cycle appends its per-level residual norms here.
  std::vector<MGTraceEntry>* trace = nullptr;
};

/// Geometric multigrid preconditioner for the penalized condensed velocity
/// operator. The mesh levels are traversed at lowest order with the
/// averaging-plus-correction transfers; for k >= 1 a single order reduction
/// wraps them: smooth at order k, send the residual down through the shared
/// constant facet modes, run one lowest-order cycle, embed and smooth again.
/// Pre- and post-smoothing are exact transposes of each other, so with a
/// symmetric operator every cycle is a symmetric preconditioner.
class MGPreconditioner {
 public:
  MGPreconditioner(const MeshHierarchy& hier, int k, const VelocityBC& bc,
                   const AssemblyOptions& fine_opt, Real inv_eps,
                   const MGOptions& mg)
      : k_(k), mg_(mg), q_(mg.cycle == CycleKind::W ? 2 : 1), inv_eps_(inv_eps) {
    const int L = int(hier.levels.size()) - 1;
    advected_ = fine_opt.advection != nullptr;
    h_.resize(L + 1);
    for (int l = 0; l <= L; ++l) {
      h_[l].V = CompoundSpace(hier.levels[l], 0);
      h_[l].con = Constraints::build(h_[l].V, bc);
      h_[l].steps = mg.cycle == CycleKind::VariableV
                        ? mg.smooth_steps << (L - l)
                        : mg.smooth_steps;
    }
    std::vector<HDGVelocity> adv;
    if (advected_) {
      adv.resize(L + 1);
      adv[L] = k > 0 ? lowest_order_advection(*fine_opt.advection, h_[L].V)
                     : *fine_opt.advection;
      for (int l = L; l > 0; --l)
        adv[l - 1] = restrict_advection(adv[l], h_[l - 1].V, hier.maps[l - 1]);
    }
    for (int l = 0; l <= L; ++l) {
      AssemblyOptions opt;
      opt.nu = fine_opt.nu;
      opt.beta = fine_opt.beta;
      opt.mass_coef = fine_opt.mass_coef;
      opt.newton = fine_opt.newton;
      if (advected_) opt.advection = &adv[l];
      const bool finest_system = k == 0 && l == L;
      if (finest_system) {
        opt.load = fine_opt.load;
        opt.mass_field = fine_opt.mass_field;
      }
      CondensedSystem sys = assemble_condensed(hier.levels[l], h_[l].V, h_[l].con, opt);
      Vec div_rhs;
      SpMat D = grad_div_matrix(h_[l].V, h_[l].con, h_[l].con.g_full,
                                finest_system ? &div_rhs : nullptr);
      h_[l].A = sys.A + inv_eps * D;
      if (advected_) h_[l].AT = SpMat(h_[l].A.transpose());
      if (finest_system) rhs_ = sys.rhs + inv_eps * div_rhs;
    }
    coarse_ = Eigen::PartialPivLU<Mat>(Mat(h_[0].A));
    for (int l = 1; l <= L; ++l) {
      SpMat avg = averaging_transfer(h_[l - 1].V, h_[l - 1].con, h_[l].V,
                                     h_[l].con, hier.maps[l - 1]);
      h_[l].P = corrected_prolongation(
          avg, h_[l].A, interior_patch_dofs(h_[l].V, h_[l].con, hier.maps[l - 1]));
      h_[l].smoother = std::make_unique<PatchSmoother>(
          h_[l].A, advected_ ? h_[l].AT : h_[l].A,
          velocity_patches(h_[l].V, h_[l].con));
    }
    if (k_ > 0) {
      head_.V = CompoundSpace(hier.levels[L], k);
      head_.con = Constraints::build(head_.V, bc);
      head_.steps = mg.smooth_steps;
      CondensedSystem sys =
          assemble_condensed(hier.levels[L], head_.V, head_.con, fine_opt);
      Vec div_rhs;
      SpMat D = grad_div_matrix(head_.V, head_.con, head_.con.g_full, &div_rhs);
      head_.A = sys.A + inv_eps * D;
      if (advected_) head_.AT = SpMat(head_.A.transpose());
      rhs_ = sys.rhs + inv_eps * div_rhs;
      head_.smoother = std::make_unique<PatchSmoother>(
          head_.A, advected_ ? head_.AT : head_.A,
          velocity_patches(head_.V, head_.con));
      E_ = order_embedding(h_[L].V, h_[L].con, head_.V, head_.con);
      ET_ = SpMat(E_.transpose());
    }
  }

  /// One cycle applied to a free-space residual, zero initial guess.
  Vec apply(const Vec& b) const {
    if (k_ == 0) return h_cycle(int(h_.size()) - 1, b);
    const int hl = int(h_.size());
    if (mg_.trace) mg_.trace->push_back({hl, true, b.norm()});
    Vec x = Vec::Zero(b.size());
    smooth(head_, x, b, false);
    Vec r = b - head_.A * x;
    x += E_ * h_cycle(int(h_.size()) - 1, Vec(ET_ * r));
    smooth(head_, x, b, true);
    if (mg_.trace) mg_.trace->push_back({hl, false, (b - head_.A * x).norm()});
    return x;
  }

  LinearOperator as_operator() const {
    return [this](const Vec& v) { return apply(v); };
  }

  const SpMat& matrix() const { return k_ == 0 ? h_.back().A : head_.A; }
  const SpMat& matrix_transpose() const {
    return advected_ ? (k_ == 0 ? h_.back().AT : head_.AT) : matrix();
  }
  const CompoundSpace& space() const { return k_ == 0 ? h_.back().V : head_.V; }
  const Constraints& constraints() const {
    return k_ == 0 ? h_.back().con : head_.con;
  }
  /// Penalized right-hand side of the finest system, boundary lifting and
  /// divergence penalty data included.
  const Vec& rhs() const { return rhs_; }
  bool symmetric() const { return !advected_; }
  Real penalty() const { return inv_eps_; }

 private:
  struct Level {
    CompoundSpace V;
    Constraints con;
    SpMat A, AT;
    SpMat P;
    std::unique_ptr<PatchSmoother> smoother;
    int steps = 1;
  };

  void smooth(const Level& lv, Vec& x, const Vec& b, bool post) const {
    if (mg_.smoother == SmootherKind::Additive)
      lv.smoother->jacobi(x, b, lv.steps, mg_.jacobi_damping);
    else if (post)
      lv.smoother->backward(x, b, lv.steps);
    else
      lv.smoother->forward(x, b, lv.steps);
  }

  Vec h_cycle(int l, const Vec& b) const {
    if (mg_.trace) mg_.trace->push_back({l, true, b.norm()});
    if (l == 0) {
      Vec x = coarse_.solve(b);
      if (mg_.trace) mg_.trace->push_back({0, false, (b - h_[0].A * x).norm()});
      return x;
    }
    const Level& lv = h_[l];
    Vec x = Vec::Zero(b.size());
    smooth(lv, x, b, false);
    Vec r = b - lv.A * x;
    Vec rc = lv.P.transpose() * r;
    Vec e = h_cycle(l - 1, rc);
    for (int i = 1; i < q_; ++i) e += h_cycle(l - 1, Vec(rc - h_[l - 1].A * e));
    x += lv.P * e;
    smooth(lv, x, b, true);
    if (mg_.trace) mg_.trace->push_back({l, false, (b - lv.A * x).norm()});
    return x;
  }

  int k_;
  MGOptions mg_;
  int q_;
  Real inv_eps_;
  bool advected_ = false;
  std::vector<Level> h_;
  Level head_;
  Eigen::PartialPivLU<Mat> coarse_;
  SpMat E_, ET_;
  Vec rhs_;
};

}  // namespace hdivmg

#pragma once

#include <vector>

#include "hdivmg/fespace.hpp"

namespace hdivmg {

/// Free compound unknowns grouped by mesh vertex: each patch holds every
/// unconstrained coefficient living on a facet that touches the vertex.
/// Patches emptied by the boundary conditions are dropped; the rest keep
/// ascending vertex order, which fixes the multiplicative sweep order.
inline std::vector<std::vector<int>> velocity_patches(const CompoundSpace& V,
                                                      const Constraints& con) {
  std::vector<std::vector<int>> patches;
  for (const auto& facets : vertex_patches(*V.mesh)) {
    std::vector<int> dofs;
    for (int f : facets)
      for (int i = 0; i <= V.k; ++i) {
        Index dn = con.full_to_free[V.flux_dof(f, i)];
        if (dn < 0) continue;
        dofs.push_back(int(dn));
        dofs.push_back(int(con.full_to_free[V.tang_dof(f, i)]));
      }
    if (!dofs.empty()) patches.push_back(std::move(dofs));
  }
  return patches;
}

/// Overlapping block smoother with exact patch solves. The multiplicative
/// forward sweep updates a running residual; the backward sweep is its exact
/// Euclidean transpose, which runs the patches in reverse against the
/// transposed operator. The additive variant needs damping because every
/// unknown sits in two patches.
class PatchSmoother {
 public:
  /// `AT` must be the transpose of `A`; pass the same object when A is
  /// symmetric, the smoother only reads the two.
  PatchSmoother(const SpMat& A, const SpMat& AT, std::vector<std::vector<int>> patches)
      : a_(&A), at_(&AT), patches_(std::move(patches)) {
    lu_.reserve(patches_.size());
    for (const auto& p : patches_) {
      const int np = int(p.size());
      Mat App(np, np);
      for (int r = 0; r < np; ++r)
        for (int c = 0; c < np; ++c) App(r, c) = a_->coeff(p[r], p[c]);
      lu_.emplace_back(App);
    }
  }

  const std::vector<std::vector<int>>& patches() const { return patches_; }

  void forward(Vec& x, const Vec& b, int sweeps) const {
    Vec r = b - (*a_) * x;
    for (int s = 0; s < sweeps; ++s)
      for (std::size_t j = 0; j < patches_.size(); ++j) apply_patch(j, x, r, *a_, false);
  }

  /// Transpose of `forward` as a preconditioner: sweeps the transposed
  /// operator in descending patch order on a correction started at zero.
  void backward(Vec& x, const Vec& b, int sweeps) const {
    Vec y = Vec::Zero(x.size());
    Vec r = b - (*a_) * x;
    for (int s = 0; s < sweeps; ++s)
      for (std::size_t j = patches_.size(); j-- > 0;) apply_patch(j, y, r, *at_, true);
    x += y;
  }

  void jacobi(Vec& x, const Vec& b, int sweeps, Real damping) const {
    for (int s = 0; s < sweeps; ++s) {
      Vec r = b - (*a_) * x;
      for (std::size_t j = 0; j < patches_.size(); ++j) {
        const auto& p = patches_[j];
        Vec rp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) rp[Index(i)] = r[p[i]];
        Vec d = lu_[j].solve(rp);
        for (std::size_t i = 0; i < p.size(); ++i) x[p[i]] += damping * d[Index(i)];
      }
    }
  }

 private:
  void apply_patch(std::size_t j, Vec& x, Vec& r, const SpMat& op,
                   bool transposed) const {
    const auto& p = patches_[j];
    Vec rp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) rp[Index(i)] = r[p[i]];
    Vec d = transposed ? Vec(lu_[j].transpose().solve(rp)) : Vec(lu_[j].solve(rp));
    for (std::size_t i = 0; i < p.size(); ++i) {
      x[p[i]] += d[Index(i)];
      for (SpMat::InnerIterator it(op, p[i]); it; ++it)
        r[it.row()] -= it.value() * d[Index(i)];
    }
  }

  const SpMat* a_;
  const SpMat* at_;
  std::vector<std::vector<int>> patches_;
  std::vector<Eigen::PartialPivLU<Mat>> lu_;
};

}  // namespace hdivmg

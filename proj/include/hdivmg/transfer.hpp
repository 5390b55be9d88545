#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "hdivmg/assembly.hpp"
#include "hdivmg/cr.hpp"

namespace hdivmg {

/// Averaging transfer between the free lowest-order compound spaces of two
/// nested meshes. Coarse coefficients are lifted to facet midpoint vector
/// values, the resulting elementwise linear function is evaluated at the
/// fine facet midpoints (one-sided inside a coarse element and on outflow
/// facets, averaged across the coarse skeleton where the function jumps),
/// and the values are expressed in the fine facet frames. Rows and columns
/// on constrained facets are dropped; corrections transfer homogeneously.
inline SpMat averaging_transfer(const CompoundSpace& Vc, const Constraints& cc,
                                const CompoundSpace& Vf, const Constraints& cf,
                                const RefinementMaps& maps) {
  assert(Vc.k == 0 && Vf.k == 0);
  const Mesh& cm = *Vc.mesh;
  const Mesh& fm = *Vf.mesh;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(fm.nf()) * 12);
  for (int ff = 0; ff < fm.nf(); ++ff) {
    Index row_n = cf.full_to_free[Vf.flux_dof(ff, 0)];
    Index row_t = cf.full_to_free[Vf.tang_dof(ff, 0)];
    if (row_n < 0) continue;
    std::array<std::pair<int, Real>, 2> sides{{{-1, 0.0}, {-1, 0.0}}};
    switch (maps.fine_class[ff]) {
      case FacetClass::InteriorOfCoarseElement:
        sides[0] = {maps.fine_parent_element[ff], 1.0};
        break;
      case FacetClass::OnBoundary:
        sides[0] = {cm.facets[maps.fine_parent_facet[ff]].elem[0], 1.0};
        break;
      case FacetClass::OnCoarseSkeleton: {
        const auto& pf = cm.facets[maps.fine_parent_facet[ff]];
        sides[0] = {pf.elem[0], 0.5};
        sides[1] = {pf.elem[1], 0.5};
        break;
      }
    }
    Vec2 xm = fm.facet_midpoint(ff);
    Vec2 nf = fm.facet_normal(ff);
    Vec2 tf = fm.facet_tangent(ff);
    for (const auto& [e, w] : sides) {
      if (e < 0) continue;
      for (int i = 0; i < 3; ++i) {
        int fc = cm.elements[e].facet[i];
        Real phi = w * cr::basis_value(cm, e, i, xm);
        Vec2 nc = cm.facet_normal(fc);
        Vec2 tc = cm.facet_tangent(fc);
        Index col_n = cc.full_to_free[Vc.flux_dof(fc, 0)];
        Index col_t = cc.full_to_free[Vc.tang_dof(fc, 0)];
        if (col_n >= 0) {
          trips.emplace_back(int(row_n), int(col_n), phi * nf.dot(nc));
          trips.emplace_back(int(row_t), int(col_t), phi * tf.dot(tc));
          trips.emplace_back(int(row_n), int(col_t), phi * nf.dot(tc));
          trips.emplace_back(int(row_t), int(col_n), phi * tf.dot(nc));
        }
      }
    }
  }
  SpMat P(int(cf.n_free), int(cc.n_free));
  P.setFromTriplets(trips.begin(), trips.end());
  P.prune(0.0);
  return P;
}

/// Free velocity unknowns living on the fine facets interior to each coarse
/// element. These are the unknowns the prolongation correction re-solves.
inline std::vector<std::vector<Index>> interior_patch_dofs(
    const CompoundSpace& Vf, const Constraints& cf, const RefinementMaps& maps) {
  const Mesh& fm = *Vf.mesh;
  std::vector<std::vector<Index>> blocks(maps.elem_children.size());
  for (int ff = 0; ff < fm.nf(); ++ff) {
    if (maps.fine_class[ff] != FacetClass::InteriorOfCoarseElement) continue;
    auto& blk = blocks[maps.fine_parent_element[ff]];
    for (int i = 0; i <= Vf.k; ++i) {
      blk.push_back(cf.full_to_free[Vf.flux_dof(ff, i)]);
      blk.push_back(cf.full_to_free[Vf.tang_dof(ff, i)]);
    }
  }
  return blocks;
}

/// Replaces the rows of the averaging transfer on the interior patches by
/// the local solves that annihilate the corresponding residual rows of A.
/// With the penalized operator this keeps prolonged corrections close to
/// divergence-free. The patches never share unknowns, so the correction is
/// a sequence of independent small dense solves, materialized sparsely.
inline SpMat corrected_prolongation(const SpMat& I_avg, const SpMat& A,
                                    const std::vector<std::vector<Index>>& blocks) {
  Eigen::SparseMatrix<Real, Eigen::RowMajor> W = A * I_avg;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(I_avg.nonZeros()) + std::size_t(W.nonZeros()) / 4);
  for (int c = 0; c < I_avg.outerSize(); ++c)
    for (SpMat::InnerIterator it(I_avg, c); it; ++it)
      trips.emplace_back(int(it.row()), c, it.value());
  for (const auto& T : blocks) {
    const int nt = int(T.size());
    if (nt == 0) continue;
    std::vector<int> cols;
    for (Index r : T)
      for (Eigen::SparseMatrix<Real, Eigen::RowMajor>::InnerIterator it(W, int(r));
           it; ++it)
        cols.push_back(int(it.col()));
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    if (cols.empty()) continue;
    std::unordered_map<int, int> local;
    for (std::size_t j = 0; j < cols.size(); ++j) local[cols[j]] = int(j);
    Mat Att = Mat::Zero(nt, nt);
    Mat Wt = Mat::Zero(nt, Index(cols.size()));
    for (int r = 0; r < nt; ++r) {
      for (int s = 0; s < nt; ++s) Att(r, s) = A.coeff(T[r], T[s]);
      for (Eigen::SparseMatrix<Real, Eigen::RowMajor>::InnerIterator it(W, int(T[r]));
           it; ++it)
        Wt(r, local[int(it.col())]) = it.value();
    }
    Mat X = Eigen::PartialPivLU<Mat>(Att).solve(Wt);
    for (int r = 0; r < nt; ++r)
      for (std::size_t j = 0; j < cols.size(); ++j)
        trips.emplace_back(int(T[r]), cols[j], -X(r, Index(j)));
  }
  SpMat P(I_avg.rows(), I_avg.cols());
  P.setFromTriplets(trips.begin(), trips.end());
  P.prune(0.0);
  return P;
}

/// Embedding of the free lowest-order compound space into the free order-k
/// space on the same mesh: the constant facet modes are shared, so the map
/// scatters each coefficient into the matching slot. Its transpose projects
/// residuals back down, which in the hierarchical facet basis is exactly the
/// L2 projection.
inline SpMat order_embedding(const CompoundSpace& V0, const Constraints& c0,
                             const CompoundSpace& Vk, const Constraints& ck) {
  assert(V0.k == 0 && V0.mesh == Vk.mesh);
  const Mesh& mesh = *V0.mesh;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.nf()) * 2);
  for (int f = 0; f < mesh.nf(); ++f) {
    Index c_n = c0.full_to_free[V0.flux_dof(f, 0)];
    Index r_n = ck.full_to_free[Vk.flux_dof(f, 0)];
    assert((c_n < 0) == (r_n < 0));
    if (c_n < 0) continue;
    trips.emplace_back(int(r_n), int(c_n), 1.0);
    trips.emplace_back(int(ck.full_to_free[Vk.tang_dof(f, 0)]),
                       int(c0.full_to_free[V0.tang_dof(f, 0)]), 1.0);
  }
  SpMat E(int(ck.n_free), int(c0.n_free));
  E.setFromTriplets(trips.begin(), trips.end());
  return E;
}

/// Coarse advection carrier inherited from a fine lowest-order field: each
/// coarse facet mean is the average of its two children, reoriented to the
/// coarse frame. The normal is the tangent rotated a quarter turn, so one
/// agreement sign serves both components.
inline HDGVelocity restrict_advection(const HDGVelocity& wf, const CompoundSpace& Vc,
                                      const RefinementMaps& maps) {
  assert(wf.V.k == 0 && Vc.k == 0);
  const Mesh& cm = *Vc.mesh;
  const Mesh& fm = *wf.V.mesh;
  HDGVelocity wc = HDGVelocity::zero(Vc);
  for (int cf = 0; cf < cm.nf(); ++cf) {
    Vec2 nc = cm.facet_normal(cf);
    Real flux = 0, tang = 0;
    for (int ff : maps.facet_children[cf]) {
      Real s = nc.dot(fm.facet_normal(ff)) > 0 ? 0.5 : -0.5;
      flux += s * wf.compound[wf.V.flux_dof(ff, 0)];
      tang += s * wf.compound[wf.V.tang_dof(ff, 0)];
    }
    wc.compound[Vc.flux_dof(cf, 0)] = flux;
    wc.compound[Vc.tang_dof(cf, 0)] = tang;
  }
  return wc;
}

/// Lowest-order advection carrier on the same mesh: keeps the constant
/// facet modes of an order-k field and drops the rest.
inline HDGVelocity lowest_order_advection(const HDGVelocity& wk,
                                          const CompoundSpace& V0) {
  assert(V0.k == 0 && V0.mesh == wk.V.mesh);
  HDGVelocity w0 = HDGVelocity::zero(V0);
  for (int f = 0; f < V0.mesh->nf(); ++f) {
    w0.compound[V0.flux_dof(f, 0)] = wk.compound[wk.V.flux_dof(f, 0)];
    w0.compound[V0.tang_dof(f, 0)] = wk.compound[wk.V.tang_dof(f, 0)];
  }
  return w0;
}

}  // namespace hdivmg

#pragma once

#include <functional>
#include <vector>

#include "hdivmg/fespace.hpp"

namespace hdivmg {
namespace cr {

/// Nonconforming piecewise-linear velocity with one vector DOF per facet
/// (the value at the facet midpoint), layout (x, y) interleaved. The scheme
/// carries the RT0 lifting in its zeroth-order and load terms, which is what
/// ties it to the condensed lowest-order hybrid operator: the two are
/// congruent through the per-facet frame change below.
inline Index dof(int f, int c) { return 2 * Index(f) + c; }

/// Basis function of facet `lf` on element e: 1 - 2 lambda, where lambda is
/// the barycentric coordinate of the opposite vertex. Value 1 at the own
/// midpoint, 0 at the other two.
inline Real basis_value(const Mesh& mesh, int e, int lf, const Vec2& x) {
  const auto& el = mesh.elements[e];
  const Vec2 p = mesh.vertices[el.v[lf]];
  const Vec2 a = mesh.vertices[el.v[(lf + 1) % 3]];
  const Vec2 b = mesh.vertices[el.v[(lf + 2) % 3]];
  Real full = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
  Real part = (b - a).x() * (x - a).y() - (b - a).y() * (x - a).x();
  return 1.0 - 2.0 * part / full;
}

/// Gradient of the basis function of facet lf: constant (|F| / |K|) n_out.
inline Vec2 basis_gradient(const Mesh& mesh, int e, int lf) {
  int f = mesh.elements[e].facet[lf];
  Real s = mesh.elements[e].sigma[lf];
  return (s * mesh.facet_length(f) / mesh.area(e)) * mesh.facet_normal(f);
}

/// RT0 basis function in the global flux convention, evaluated at x:
/// sigma (|F| / 2|K|) (x - p_opposite), unit normal trace on its facet.
inline Vec2 rt0_value(const Mesh& mesh, int e, int lf, const Vec2& x) {
  const auto& el = mesh.elements[e];
  Real s = el.sigma[lf];
  Real f = mesh.facet_length(el.facet[lf]);
  return (s * f / (2.0 * mesh.area(e))) * (x - mesh.vertices[el.v[lf]]);
}

struct System {
  SpMat A;  // free x free
  Vec rhs;
  Vec g_full;  // facet means of the boundary data on constrained entries
  std::vector<Index> full_to_free, free_to_full;

  Vec to_free(const Vec& full) const {
    Vec out(free_to_full.size());
    for (std::size_t i = 0; i < free_to_full.size(); ++i) out[i] = full[free_to_full[i]];
    return out;
  }
  Vec to_full(const Vec& free) const {
    Vec out = g_full;
    for (std::size_t i = 0; i < free_to_full.size(); ++i) out[free_to_full[i]] = free[i];
    return out;
  }
};

/// Assembles nu (grad u, grad v) + beta (P u, P v) + inv_eps (div u, div v)
/// with P the midpoint RT0 lifting; the load pairs against P v as well
/// unless `lifted_load` is off (the classical pairing is kept around to
/// demonstrate what the lifting buys).
inline System assemble(const Mesh& mesh, Real nu, Real beta, Real inv_eps,
                       const std::function<Vec2(const Vec2&)>& load,
                       const std::function<Vec2(const Vec2&)>& g,
                       bool lifted_load = true) {
  System sys;
  const Index n_full = 2 * Index(mesh.nf());
  sys.g_full = Vec::Zero(n_full);
  sys.full_to_free.assign(n_full, -1);
  LineRule glr = line_rule(6);
  for (int f = 0; f < mesh.nf(); ++f) {
    if (mesh.facets[f].tag != bc::kDirichlet) {
      for (int c = 0; c < 2; ++c) {
        sys.full_to_free[dof(f, c)] = Index(sys.free_to_full.size());
        sys.free_to_full.push_back(dof(f, c));
      }
      continue;
    }
    if (!g) continue;
    Vec2 mean = Vec2::Zero();
    for (std::size_t q = 0; q < glr.points.size(); ++q)
      mean += 0.5 * glr.weights[q] * g(mesh.facet_point(f, glr.points[q]));
    sys.g_full[dof(f, 0)] = mean.x();
    sys.g_full[dof(f, 1)] = mean.y();
  }
  const Index n_free = Index(sys.free_to_full.size());
  sys.rhs = Vec::Zero(n_free);

  TriRule tr = tri_rule(4);
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.ne()) * 36);
  for (int e = 0; e < mesh.ne(); ++e) {
    const auto& el = mesh.elements[e];
    const Real area = mesh.area(e);
    std::array<Vec2, 3> grad, nf;
    std::array<Real, 3> div_row;
    for (int i = 0; i < 3; ++i) {
      grad[i] = basis_gradient(mesh, e, i);
      nf[i] = mesh.facet_normal(el.facet[i]);
      // div of the basis pair (F, c): n_F[c] sigma |F| / |K|
      div_row[i] = Real(el.sigma[i]) * mesh.facet_length(el.facet[i]) / area;
    }
    Mat Ke = Mat::Zero(6, 6);
    Vec re = Vec::Zero(6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Real visc = nu * area * grad[i].dot(grad[j]);
        for (int c = 0; c < 2; ++c) Ke(2 * i + c, 2 * j + c) += visc;
        for (int ci = 0; ci < 2; ++ci)
          for (int cj = 0; cj < 2; ++cj)
            Ke(2 * i + ci, 2 * j + cj) += inv_eps * area * div_row[i] * nf[i][ci] *
                                          div_row[j] * nf[j][cj];
      }
    if (beta != 0.0 || (load && lifted_load)) {
      for (std::size_t q = 0; q < tr.points.size(); ++q) {
        Vec2 xr = tr.points[size_t(q)];
        Vec2 x = mesh.vertices[el.v[0]] +
                 xr.x() * (mesh.vertices[el.v[1]] - mesh.vertices[el.v[0]]) +
                 xr.y() * (mesh.vertices[el.v[2]] - mesh.vertices[el.v[0]]);
        Real w = tr.weights[q] * 2.0 * area;
        std::array<Vec2, 3> rt;
        for (int i = 0; i < 3; ++i) rt[i] = rt0_value(mesh, e, i, x);
        if (beta != 0.0)
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              for (int ci = 0; ci < 2; ++ci)
                for (int cj = 0; cj < 2; ++cj)
                  Ke(2 * i + ci, 2 * j + cj) +=
                      beta * w * nf[i][ci] * nf[j][cj] * rt[i].dot(rt[j]);
        if (load && lifted_load) {
          Vec2 fv = load(x);
          for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 2; ++c)
              re[2 * i + c] += w * nf[i][c] * fv.dot(rt[i]);
        }
      }
    }
    if (load && !lifted_load) {
      for (std::size_t q = 0; q < tr.points.size(); ++q) {
        Vec2 xr = tr.points[q];
        Vec2 x = mesh.vertices[el.v[0]] +
                 xr.x() * (mesh.vertices[el.v[1]] - mesh.vertices[el.v[0]]) +
                 xr.y() * (mesh.vertices[el.v[2]] - mesh.vertices[el.v[0]]);
        Real w = tr.weights[q] * 2.0 * area;
        Vec2 fv = load(x);
        for (int i = 0; i < 3; ++i) {
          Real phi = basis_value(mesh, e, i, x);
          for (int c = 0; c < 2; ++c) re[2 * i + c] += w * phi * fv[c];
        }
      }
    }
    for (int i = 0; i < 3; ++i)
      for (int ci = 0; ci < 2; ++ci) {
        Index gi = dof(el.facet[i], ci);
        Index fi = sys.full_to_free[gi];
        if (fi < 0) continue;
        sys.rhs[fi] += re[2 * i + ci];
        for (int j = 0; j < 3; ++j)
          for (int cj = 0; cj < 2; ++cj) {
            Index gj = dof(el.facet[j], cj);
            Index fj = sys.full_to_free[gj];
            if (fj >= 0)
              trips.emplace_back(int(fi), int(fj), Ke(2 * i + ci, 2 * j + cj));
            else
              sys.rhs[fi] -= Ke(2 * i + ci, 2 * j + cj) * sys.g_full[gj];
          }
      }
  }
  sys.A.resize(int(n_free), int(n_free));
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  return sys;
}

/// Frame change from lowest-order compound coefficients (normal flux,
/// tangential trace) to midpoint vector values; orthogonal facet by facet.
inline SpMat from_compound(const CompoundSpace& V) {
  const Mesh& mesh = *V.mesh;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.nf()) * 4);
  for (int f = 0; f < mesh.nf(); ++f) {
    Vec2 n = mesh.facet_normal(f), t = mesh.facet_tangent(f);
    for (int c = 0; c < 2; ++c) {
      trips.emplace_back(int(dof(f, c)), int(V.flux_dof(f, 0)), n[c]);
      trips.emplace_back(int(dof(f, c)), int(V.tang_dof(f, 0)), t[c]);
    }
  }
  SpMat P(2 * mesh.nf(), int(V.n_compound()));
  P.setFromTriplets(trips.begin(), trips.end());
  P.makeCompressed();
  return P;
}

/// Midpoint values to RT0 fluxes: row F dots the facet's vector DOF with the
/// global facet normal.
inline SpMat to_rt0(const Mesh& mesh) {
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.nf()) * 2);
  for (int f = 0; f < mesh.nf(); ++f) {
    Vec2 n = mesh.facet_normal(f);
    for (int c = 0; c < 2; ++c) trips.emplace_back(f, int(dof(f, c)), n[c]);
  }
  SpMat P(mesh.nf(), 2 * mesh.nf());
  P.setFromTriplets(trips.begin(), trips.end());
  P.makeCompressed();
  return P;
}

}  // namespace cr
}  // namespace hdivmg

#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "hdivmg/mesh.hpp"
#include "hdivmg/polynomial.hpp"
#include "hdivmg/quadrature.hpp"

namespace hdivmg {

/// Reference triangle (0,0)-(1,0)-(0,1); edge i runs from local vertex
/// (i+1)%3 to (i+2)%3 (the canonical local direction).
struct RefEdge {
  Vec2 a, b;
  Vec2 n_out;
  Real len;
};

inline const std::array<RefEdge, 3>& reference_edges() {
  static const std::array<RefEdge, 3> edges = [] {
    const std::array<Vec2, 3> v = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    std::array<RefEdge, 3> e{};
    for (int i = 0; i < 3; ++i) {
      Vec2 a = v[(i + 1) % 3], b = v[(i + 2) % 3];
      Vec2 t = (b - a).normalized();
      Vec2 n(t.y(), -t.x());
      // orient outward: away from the opposite vertex
      if (n.dot(a - v[i]) < 0) n = -n;
      e[i] = RefEdge{a, b, n, (b - a).norm()};
    }
    return e;
  }();
  return edges;
}

/// Hierarchical Raviart-Thomas basis of order k on the reference triangle.
///
/// Ordering: for each edge e the k+1 facet functions (i=0 is the classical
/// RT0 function with unit constant normal trace; i>=1 are divergence-free
/// with normal trace exactly L_i(t) on edge e and zero on the others), then
/// the divergence-free interior bubbles, then the interior functions whose
/// divergences reproduce the zero-mean members of the orthonormal P^k basis.
struct RTReference {
  int k = 0;
  int n_facet = 1;   // functions per edge
  int n_bubble = 0;  // divergence-free interior functions
  int n_div = 0;     // interior functions with nonzero divergence
  int dim = 3;
  std::vector<std::array<Poly2, 2>> val;
  std::vector<std::array<Poly2, 4>> jac;  // dvx/dx, dvx/dy, dvy/dx, dvy/dy
  std::vector<Poly2> div;

  int facet_fn(int e, int i) const { return e * n_facet + i; }
  int interior_fn(int j) const { return 3 * n_facet + j; }
  int n_interior() const { return n_bubble + n_div; }
};

namespace detail {

struct GenericRT {
  std::vector<std::array<Poly2, 2>> val;  // spans RT_k
  int dim = 0;
};

inline GenericRT generic_rt_family(int k) {
  GenericRT gen;
  std::vector<Poly2> q = orthonormal_scalar_basis(k);
  for (const Poly2& s : q) {
    gen.val.push_back({s, Poly2(0)});
    gen.val.push_back({Poly2(0), s});
  }
  for (int j = 0; j <= k; ++j) {
    Poly2 m = Poly2::monomial(k - j, j);
    gen.val.push_back({Poly2::monomial(1, 0) * m, Poly2::monomial(0, 1) * m});
  }
  gen.dim = static_cast<int>(gen.val.size());
  return gen;
}

/// Facet Legendre moments of v.n_out against the canonical edge direction;
/// row (e,i) returns the L_i-coefficient of the normal trace on edge e.
inline Mat facet_moment_matrix(int k, const GenericRT& gen) {
  const auto& edges = reference_edges();
  LineRule lr = line_rule(2 * k + 3);
  Mat M = Mat::Zero(3 * (k + 1), gen.dim);
  std::vector<Real> leg(k + 1);
  for (int e = 0; e < 3; ++e) {
    for (std::size_t qp = 0; qp < lr.points.size(); ++qp) {
      Real t = lr.points[qp];
      Vec2 x = 0.5 * ((1.0 - t) * edges[e].a + (1.0 + t) * edges[e].b);
      legendre_all(k, t, leg.data());
      for (int g = 0; g < gen.dim; ++g) {
        Real vn = gen.val[g][0].eval(x.x(), x.y()) * edges[e].n_out.x() +
                  gen.val[g][1].eval(x.x(), x.y()) * edges[e].n_out.y();
        for (int i = 0; i <= k; ++i)
          M(e * (k + 1) + i, g) +=
              0.5 * (2 * i + 1) * lr.weights[qp] * vn * leg[i];
      }
    }
  }
  return M;
}

}  // namespace detail

inline RTReference build_rt_reference(int k) {
  if (k < 0 || k > 3) throw std::invalid_argument("order k must be in 0..3");
  RTReference rt;
  rt.k = k;
  rt.n_facet = k + 1;
  const int n_scalar = Poly2::dim(k);
  rt.n_div = n_scalar - 1;
  rt.n_bubble = k * (k + 1) - rt.n_div;
  rt.dim = 3 * rt.n_facet + rt.n_bubble + rt.n_div;

  detail::GenericRT gen = detail::generic_rt_family(k);
  std::vector<Poly2> gen_div(gen.dim);
  for (int g = 0; g < gen.dim; ++g)
    gen_div[g] = gen.val[g][0].dx() + gen.val[g][1].dy();
  std::vector<Poly2> q = orthonormal_scalar_basis(k);
  const auto& edges = reference_edges();

  Mat M = detail::facet_moment_matrix(k, gen);

  // Divergence moments (div v, q_p) for the zero-mean scalar modes p >= 1.
  Mat Dgen = Mat::Zero(rt.n_div, gen.dim);
  for (int p = 1; p < n_scalar; ++p)
    for (int g = 0; g < gen.dim; ++g)
      Dgen(p - 1, g) = tri_l2(gen_div[g], q[p]);

  // L2 Gram of the generic family, for bubble orthogonality rows.
  Mat G = Mat::Zero(gen.dim, gen.dim);
  for (int a = 0; a < gen.dim; ++a)
    for (int b = a; b < gen.dim; ++b) {
      G(a, b) = tri_l2(gen.val[a][0], gen.val[b][0]) +
                tri_l2(gen.val[a][1], gen.val[b][1]);
      G(b, a) = G(a, b);
    }

  // Interior family: kernel of the facet moments, split by the divergence map.
  Mat bubbles(gen.dim, 0), psis(gen.dim, 0);
  const int n_kernel = k * (k + 1);
  if (n_kernel > 0) {
    Eigen::JacobiSVD<Mat> svd_m(M, Eigen::ComputeFullV);
    Mat W = svd_m.matrixV().rightCols(n_kernel);
    Mat DW = Dgen * W;  // (n_div) x n_kernel
    Eigen::JacobiSVD<Mat> svd_d(DW, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd_d.singularValues().size() < rt.n_div ||
        svd_d.singularValues()(rt.n_div - 1) < 1e-10)
      throw std::logic_error("interior divergence map is rank-deficient");
    bubbles = W * svd_d.matrixV().rightCols(rt.n_bubble);
    for (int c = 0; c < rt.n_bubble; ++c) {
      Real nrm = std::sqrt(bubbles.col(c).dot(G * bubbles.col(c)));
      bubbles.col(c) /= nrm;
    }
    psis.resize(gen.dim, rt.n_div);
    for (int j = 0; j < rt.n_div; ++j) {
      Vec rhs = Vec::Unit(rt.n_div, j);
      psis.col(j) = W * svd_d.solve(rhs);  // min-norm: div psi_j = q_{j+1}
    }
  }

  // Facet functions: i=0 analytic RT0, i>=1 by a square constrained solve.
  std::vector<Vec> coeffs;  // generic coordinates per basis function
  std::vector<int> analytic;  // marks RT0 members handled outside `gen`
  const int n_rows = 3 * (k + 1) + rt.n_div + rt.n_bubble;
  if (n_rows != gen.dim) throw std::logic_error("constraint count mismatch");
  Mat sys(n_rows, gen.dim);
  sys.topRows(3 * (k + 1)) = M;
  sys.middleRows(3 * (k + 1), rt.n_div) = Dgen;
  if (rt.n_bubble > 0)
    sys.bottomRows(rt.n_bubble) = bubbles.transpose() * G;
  Eigen::FullPivLU<Mat> lu(sys);
  if (!lu.isInvertible())
    throw std::logic_error("facet constraint system is singular");

  rt.val.resize(rt.dim);
  rt.jac.resize(rt.dim);
  rt.div.resize(rt.dim);
  auto set_fn = [&rt](int f, const Poly2& vx, const Poly2& vy) {
    rt.val[f] = {vx, vy};
    rt.jac[f] = {vx.dx(), vx.dy(), vy.dx(), vy.dy()};
    rt.div[f] = vx.dx() + vy.dy();
  };
  const std::array<Vec2, 3> vtx = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  for (int e = 0; e < 3; ++e) {
    // RT0: (x - p_e) |e|, unit constant normal trace on edge e
    Poly2 vx = Poly2::monomial(1, 0);
    Poly2 vy = Poly2::monomial(0, 1);
    vx -= vtx[e].x() * Poly2::monomial(0, 0);
    vy -= vtx[e].y() * Poly2::monomial(0, 0);
    set_fn(rt.facet_fn(e, 0), edges[e].len * vx, edges[e].len * vy);
    for (int i = 1; i <= k; ++i) {
      Vec rhs = Vec::Zero(n_rows);
      rhs(e * (k + 1) + i) = 1.0;
      Vec c = lu.solve(rhs);
      if ((sys * c - rhs).norm() > 1e-9)
        throw std::logic_error("facet basis solve failed");
      Poly2 fx(0), fy(0);
      for (int g = 0; g < gen.dim; ++g) {
        if (c[g] == 0.0) continue;
        fx += c[g] * gen.val[g][0];
        fy += c[g] * gen.val[g][1];
      }
      set_fn(rt.facet_fn(e, i), fx, fy);
    }
  }
  for (int j = 0; j < rt.n_bubble + rt.n_div; ++j) {
    Vec c = (j < rt.n_bubble) ? Vec(bubbles.col(j)) : Vec(psis.col(j - rt.n_bubble));
    Poly2 fx(0), fy(0);
    for (int g = 0; g < gen.dim; ++g) {
      if (c[g] == 0.0) continue;
      fx += c[g] * gen.val[g][0];
      fy += c[g] * gen.val[g][1];
    }
    set_fn(rt.interior_fn(j), fx, fy);
  }
  (void)analytic;
  return rt;
}

/// Reference data tabulated once per order: basis values at volume and edge
/// quadrature nodes. The single volume/edge rule covers every form assembled
/// here, including the trilinear convection terms (degree 3k+4 integrands).
struct ReferenceData {
  int k = 0;
  RTReference rt;
  std::vector<Poly2> scalar;                     // orthonormal P^k
  std::vector<std::array<Poly2, 2>> scalar_grad;
  std::vector<Poly2> scalar_hi;                  // orthonormal P^{k+1}
  std::vector<std::array<Poly2, 2>> scalar_hi_grad;
  TriRule vol;
  LineRule edge;

  // vol_rt_val[q] is 2 x dim; vol_rt_jac[q] holds 4 rows (dvx/dx, dvx/dy,
  // dvy/dx, dvy/dy); edge tables are per local edge at edge-rule nodes.
  std::vector<Mat> vol_rt_val, vol_rt_jac;
  Mat vol_rt_div;  // nq x dim
  std::array<std::vector<Mat>, 3> edge_rt_val;
  Mat vol_scalar;                      // nq x ns
  std::vector<Mat> vol_scalar_grad;    // per q: 2 x ns
  std::array<Mat, 3> edge_scalar;      // per edge: nq_e x ns
  Mat vol_scalar_hi;                   // nq x ns_hi
  std::vector<Mat> vol_scalar_hi_grad; // per q: 2 x ns_hi
  std::array<std::vector<Vec2>, 3> edge_ref_points;

  int nq() const { return static_cast<int>(vol.points.size()); }
  int nq_edge() const { return static_cast<int>(edge.points.size()); }
};

inline const ReferenceData& reference_data(int k) {
  static std::map<int, std::unique_ptr<ReferenceData>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(k);
  if (it != cache.end()) return *it->second;

  auto data = std::make_unique<ReferenceData>();
  ReferenceData& rd = *data;
  rd.k = k;
  rd.rt = build_rt_reference(k);
  rd.scalar = orthonormal_scalar_basis(k);
  for (const Poly2& s : rd.scalar) rd.scalar_grad.push_back({s.dx(), s.dy()});
  rd.scalar_hi = orthonormal_scalar_basis(k + 1);
  for (const Poly2& s : rd.scalar_hi)
    rd.scalar_hi_grad.push_back({s.dx(), s.dy()});
  rd.vol = tri_rule(3 * k + 4);
  rd.edge = line_rule(3 * k + 4);

  const int dim = rd.rt.dim;
  const int ns = static_cast<int>(rd.scalar.size());
  const int ns_hi = static_cast<int>(rd.scalar_hi.size());
  const int nq = rd.nq();
  rd.vol_rt_val.assign(nq, Mat::Zero(2, dim));
  rd.vol_rt_jac.assign(nq, Mat::Zero(4, dim));
  rd.vol_rt_div = Mat::Zero(nq, dim);
  rd.vol_scalar = Mat::Zero(nq, ns);
  rd.vol_scalar_grad.assign(nq, Mat::Zero(2, ns));
  rd.vol_scalar_hi = Mat::Zero(nq, ns_hi);
  rd.vol_scalar_hi_grad.assign(nq, Mat::Zero(2, ns_hi));
  for (int qp = 0; qp < nq; ++qp) {
    Real x = rd.vol.points[qp].x(), y = rd.vol.points[qp].y();
    for (int f = 0; f < dim; ++f) {
      rd.vol_rt_val[qp](0, f) = rd.rt.val[f][0].eval(x, y);
      rd.vol_rt_val[qp](1, f) = rd.rt.val[f][1].eval(x, y);
      for (int c = 0; c < 4; ++c)
        rd.vol_rt_jac[qp](c, f) = rd.rt.jac[f][c].eval(x, y);
      rd.vol_rt_div(qp, f) = rd.rt.div[f].eval(x, y);
    }
    for (int s = 0; s < ns; ++s) {
      rd.vol_scalar(qp, s) = rd.scalar[s].eval(x, y);
      rd.vol_scalar_grad[qp](0, s) = rd.scalar_grad[s][0].eval(x, y);
      rd.vol_scalar_grad[qp](1, s) = rd.scalar_grad[s][1].eval(x, y);
    }
    for (int s = 0; s < ns_hi; ++s) {
      rd.vol_scalar_hi(qp, s) = rd.scalar_hi[s].eval(x, y);
      rd.vol_scalar_hi_grad[qp](0, s) = rd.scalar_hi_grad[s][0].eval(x, y);
      rd.vol_scalar_hi_grad[qp](1, s) = rd.scalar_hi_grad[s][1].eval(x, y);
    }
  }
  const auto& edges = reference_edges();
  const int nqe = rd.nq_edge();
  for (int e = 0; e < 3; ++e) {
    rd.edge_rt_val[e].assign(nqe, Mat::Zero(2, dim));
    rd.edge_scalar[e] = Mat::Zero(nqe, ns);
    rd.edge_ref_points[e].resize(nqe);
    for (int qp = 0; qp < nqe; ++qp) {
      Real t = rd.edge.points[qp];
      Vec2 xp = 0.5 * ((1.0 - t) * edges[e].a + (1.0 + t) * edges[e].b);
      rd.edge_ref_points[e][qp] = xp;
      for (int f = 0; f < dim; ++f) {
        rd.edge_rt_val[e][qp](0, f) = rd.rt.val[f][0].eval(xp.x(), xp.y());
        rd.edge_rt_val[e][qp](1, f) = rd.rt.val[f][1].eval(xp.x(), xp.y());
      }
      for (int s = 0; s < ns; ++s)
        rd.edge_scalar[e](qp, s) = rd.scalar[s].eval(xp.x(), xp.y());
    }
  }
  auto [ins, ok] = cache.emplace(k, std::move(data));
  (void)ok;
  return *ins->second;
}

/// DOF layout of the condensed (skeleton) velocity space: per facet k+1
/// normal-flux coefficients followed by k+1 tangential coefficients, both in
/// Legendre form w.r.t. the global facet direction.
struct CompoundSpace {
  const Mesh* mesh = nullptr;
  int k = 0;

  CompoundSpace() = default;
  CompoundSpace(const Mesh& m, int order) : mesh(&m), k(order) {}

  int nfd() const { return k + 1; }
  Index n_flux() const { return Index(mesh->nf()) * nfd(); }
  Index n_tang() const { return n_flux(); }
  Index n_compound() const { return 2 * n_flux(); }
  Index flux_dof(int f, int i) const { return Index(f) * nfd() + i; }
  Index tang_dof(int f, int i) const { return n_flux() + Index(f) * nfd() + i; }

  int n_interior_per_elem() const { return k * (k + 1); }
  Index n_rt_interior() const {
    return Index(mesh->ne()) * n_interior_per_elem();
  }
  Index interior_dof(int e, int j) const {
    return Index(e) * n_interior_per_elem() + j;
  }
};

/// Affine element geometry plus the per-facet orientation factors that turn
/// reference basis functions into the global-DOF basis.
struct ElementGeometry {
  Mat2 J, Jinv;
  Real detJ = 0, area = 0;
  Vec2 x0;
  std::array<int, 3> facet{};
  std::array<Real, 3> facet_len{};
  std::array<int, 3> sigma{}, rho{};

  ElementGeometry(const Mesh& mesh, int e) {
    const auto& el = mesh.elements[e];
    x0 = mesh.vertices[el.v[0]];
    J.col(0) = mesh.vertices[el.v[1]] - x0;
    J.col(1) = mesh.vertices[el.v[2]] - x0;
    detJ = J.determinant();
    assert(detJ > 0);
    Jinv = J.inverse();
    area = 0.5 * detJ;
    for (int i = 0; i < 3; ++i) {
      facet[i] = el.facet[i];
      facet_len[i] = mesh.facet_length(el.facet[i]);
      sigma[i] = el.sigma[i];
      rho[i] = el.rho[i];
    }
  }

  Vec2 map(const Vec2& xhat) const { return x0 + J * xhat; }

  /// Scaling of the Piola image of reference facet function (e,i) that makes
  /// the physical normal trace exactly L_i(t) in the global facet frame.
  Real rt_factor(int e, int i) const {
    Real f = Real(sigma[e]) * facet_len[e] / reference_edges()[e].len;
    return (i % 2 == 1 && rho[e] < 0) ? -f : f;
  }
};

/// Interpolates an exact vector field into RT_k element by element: facet
/// Legendre moments are matched directly and interior components through L2
/// products against the interior basis. Exact whenever the field lies in RT_k.
struct RTField {
  CompoundSpace V;
  Vec flux;      // n_flux coefficients
  Vec interior;  // ne * n_interior_per_elem coefficients
};

inline RTField interpolate_rt(const Mesh& mesh, int k,
                              const std::function<Vec2(const Vec2&)>& field) {
  const ReferenceData& rd = reference_data(k);
  RTField out;
  out.V = CompoundSpace(mesh, k);
  out.flux = Vec::Zero(out.V.n_flux());
  out.interior = Vec::Zero(out.V.n_rt_interior());
  const int nfd = k + 1;
  LineRule lr = rd.edge;
  std::vector<Real> leg(k + 1);
  for (int f = 0; f < mesh.nf(); ++f) {
    Vec2 n = mesh.facet_normal(f);
    for (std::size_t qp = 0; qp < lr.points.size(); ++qp) {
      Real t = lr.points[qp];
      Vec2 x = mesh.facet_point(f, t);
      Real vn = field(x).dot(n);
      legendre_all(k, t, leg.data());
      for (int i = 0; i <= k; ++i)
        out.flux[out.V.flux_dof(f, i)] +=
            0.5 * (2 * i + 1) * lr.weights[qp] * vn * leg[i];
    }
  }
  const int n_int = out.V.n_interior_per_elem();
  if (n_int == 0) return out;
  const int dim = rd.rt.dim;
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementGeometry geo(mesh, e);
    Mat A = Mat::Zero(n_int, n_int);
    Vec b = Vec::Zero(n_int);
    for (int qp = 0; qp < rd.nq(); ++qp) {
      Real w = rd.vol.weights[qp] * geo.detJ;
      Mat phys = (geo.J * rd.vol_rt_val[qp]) / geo.detJ;  // 2 x dim
      Vec2 g = field(geo.map(rd.vol.points[qp]));
      Vec2 gi = g;
      // subtract the facet part already fixed by the flux moments
      for (int le = 0; le < 3; ++le)
        for (int i = 0; i <= k; ++i) {
          Real c = out.flux[out.V.flux_dof(geo.facet[le], i)] *
                   geo.rt_factor(le, i);
          gi -= c * Vec2(phys(0, rd.rt.facet_fn(le, i)),
                         phys(1, rd.rt.facet_fn(le, i)));
        }
      for (int a = 0; a < n_int; ++a) {
        Vec2 va(phys(0, rd.rt.interior_fn(a)), phys(1, rd.rt.interior_fn(a)));
        b[a] += w * va.dot(gi);
        for (int c = 0; c < n_int; ++c) {
          Vec2 vc(phys(0, rd.rt.interior_fn(c)),
                  phys(1, rd.rt.interior_fn(c)));
          A(a, c) += w * va.dot(vc);
        }
      }
    }
    Vec sol = A.ldlt().solve(b);
    for (int j = 0; j < n_int; ++j) out.interior[out.V.interior_dof(e, j)] = sol[j];
    (void)dim;
  }
  return out;
}

/// Velocity boundary data; facets tagged bc::kDirichlet constrain both the
/// normal-flux and tangential DOFs to the Legendre moments of g, facets
/// tagged bc::kOutflow stay free (natural do-nothing condition).
struct VelocityBC {
  std::function<Vec2(const Vec2&)> g;  // nullptr means homogeneous
};

struct Constraints {
  Index n_full = 0, n_free = 0;
  std::vector<Index> full_to_free;  // -1 where constrained
  std::vector<Index> free_to_full;
  Vec g_full;                         // data on constrained entries, 0 elsewhere
  std::vector<char> facet_dirichlet;  // per facet

  static Constraints build(const CompoundSpace& V, const VelocityBC& bc) {
    const Mesh& mesh = *V.mesh;
    Constraints con;
    con.n_full = V.n_compound();
    con.full_to_free.assign(con.n_full, -1);
    con.g_full = Vec::Zero(con.n_full);
    con.facet_dirichlet.assign(mesh.nf(), 0);
    std::vector<char> constrained(con.n_full, 0);
    const int k = V.k;
    LineRule lr = line_rule(2 * k + 6);
    std::vector<Real> leg(k + 1);
    for (int f = 0; f < mesh.nf(); ++f) {
      if (mesh.facets[f].tag != bc::kDirichlet) continue;
      con.facet_dirichlet[f] = 1;
      for (int i = 0; i <= k; ++i) {
        constrained[V.flux_dof(f, i)] = 1;
        constrained[V.tang_dof(f, i)] = 1;
      }
      if (!bc.g) continue;
      Vec2 n = mesh.facet_normal(f), tau = mesh.facet_tangent(f);
      for (std::size_t qp = 0; qp < lr.points.size(); ++qp) {
        Real t = lr.points[qp];
        Vec2 gv = bc.g(mesh.facet_point(f, t));
        legendre_all(k, t, leg.data());
        for (int i = 0; i <= k; ++i) {
          Real w = 0.5 * (2 * i + 1) * lr.weights[qp] * leg[i];
          con.g_full[V.flux_dof(f, i)] += w * gv.dot(n);
          con.g_full[V.tang_dof(f, i)] += w * gv.dot(tau);
        }
      }
    }
    for (Index d = 0; d < con.n_full; ++d) {
      if (constrained[d]) continue;
      con.full_to_free[d] = static_cast<Index>(con.free_to_full.size());
      con.free_to_full.push_back(d);
    }
    con.n_free = static_cast<Index>(con.free_to_full.size());
    return con;
  }

  Vec to_free(const Vec& full) const {
    Vec out(n_free);
    for (Index i = 0; i < n_free; ++i) out[i] = full[free_to_full[i]];
    return out;
  }

  /// Free coefficients plus boundary data on constrained entries.
  Vec to_full(const Vec& free) const {
    Vec out = g_full;
    for (Index i = 0; i < n_free; ++i) out[free_to_full[i]] = free[i];
    return out;
  }

  Vec to_full_zero(const Vec& free) const {
    Vec out = Vec::Zero(n_full);
    for (Index i = 0; i < n_free; ++i) out[free_to_full[i]] = free[i];
    return out;
  }
};

/// Evaluates an RTField at the volume quadrature nodes of one element.
/// Returns a 2 x nq matrix of values; optionally divergences and Jacobians.
inline void eval_rt_field(const RTField& u, const Mesh& mesh, int e,
                          Mat* values, Vec* divs = nullptr,
                          std::vector<Mat2>* jacs = nullptr) {
  const ReferenceData& rd = reference_data(u.V.k);
  ElementGeometry geo(mesh, e);
  const int k = u.V.k;
  const int n_int = u.V.n_interior_per_elem();
  Vec coeff = Vec::Zero(rd.rt.dim);
  for (int le = 0; le < 3; ++le)
    for (int i = 0; i <= k; ++i)
      coeff[rd.rt.facet_fn(le, i)] =
          u.flux[u.V.flux_dof(geo.facet[le], i)] * geo.rt_factor(le, i);
  for (int j = 0; j < n_int; ++j)
    coeff[rd.rt.interior_fn(j)] = u.interior[u.V.interior_dof(e, j)];
  if (values) {
    values->resize(2, rd.nq());
    for (int qp = 0; qp < rd.nq(); ++qp)
      values->col(qp) = (geo.J * (rd.vol_rt_val[qp] * coeff)) / geo.detJ;
  }
  if (divs) {
    divs->resize(rd.nq());
    for (int qp = 0; qp < rd.nq(); ++qp)
      (*divs)[qp] = rd.vol_rt_div.row(qp).dot(coeff) / geo.detJ;
  }
  if (jacs) {
    jacs->resize(rd.nq());
    for (int qp = 0; qp < rd.nq(); ++qp) {
      Vec j4 = rd.vol_rt_jac[qp] * coeff;
      Mat2 Jhat;
      Jhat << j4[0], j4[1], j4[2], j4[3];
      (*jacs)[qp] = (geo.J * Jhat * geo.Jinv) / geo.detJ;
    }
  }
}

}  // namespace hdivmg

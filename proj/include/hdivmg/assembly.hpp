#pragma once

#include <functional>
#include <vector>

#include <Eigen/LU>

#include "hdivmg/fespace.hpp"

namespace hdivmg {

/// Full velocity iterate of the hybrid scheme: skeleton coefficients (normal
/// flux then tangential trace per facet, Legendre form) plus the
/// element-interior RT coefficients.
struct HDGVelocity {
  CompoundSpace V;
  Vec compound;
  Vec interior;

  static HDGVelocity zero(const CompoundSpace& space) {
    HDGVelocity u;
    u.V = space;
    u.compound = Vec::Zero(space.n_compound());
    u.interior = Vec::Zero(space.n_rt_interior());
    return u;
  }

  RTField rt_part() const {
    RTField f;
    f.V = V;
    f.flux = compound.head(V.n_flux());
    f.interior = interior;
    return f;
  }
};

/// Interpolates an exact field into the full hybrid state: RT moments for
/// the flux and interior parts, tangential Legendre moments for the facet
/// unknowns.
inline HDGVelocity interpolate_hdg(const Mesh& mesh, int k,
                                   const std::function<Vec2(const Vec2&)>& field) {
  RTField rt = interpolate_rt(mesh, k, field);
  HDGVelocity u;
  u.V = rt.V;
  u.compound = Vec::Zero(u.V.n_compound());
  u.compound.head(u.V.n_flux()) = rt.flux;
  u.interior = rt.interior;
  LineRule lr = reference_data(k).edge;
  std::vector<Real> leg(k + 1);
  for (int f = 0; f < mesh.nf(); ++f) {
    Vec2 tau = mesh.facet_tangent(f);
    for (std::size_t q = 0; q < lr.points.size(); ++q) {
      Real t = lr.points[q];
      Real vt = field(mesh.facet_point(f, t)).dot(tau);
      legendre_all(k, t, leg.data());
      for (int i = 0; i <= k; ++i)
        u.compound[u.V.tang_dof(f, i)] +=
            0.5 * (2 * i + 1) * lr.weights[q] * vt * leg[i];
    }
  }
  return u;
}

/// Coefficients and linearization state for one assembly pass. `advection`
/// switches on the upwinded convection form linearized about that state;
/// `newton` additionally differentiates the transport field with the upwind
/// switch frozen and moves the quadratic term to the load, so the linear
/// solution is the next total iterate rather than an increment.
struct AssemblyOptions {
  Real nu = 1.0;
  Real beta = 0.0;
  std::function<Vec2(const Vec2&)> load;
  const HDGVelocity* advection = nullptr;
  bool newton = false;
  Real mass_coef = 0.0;                     // adds mass_coef (u, v)
  const HDGVelocity* mass_field = nullptr;  // adds mass_coef (field, v) to the load
};

/// Per-element basis tables in global-DOF convention: column a of each table
/// is the basis function of local velocity DOF a with every orientation
/// factor applied. Local ordering: 3(k+1) normal-flux, 3(k+1) tangential,
/// k(k+1) interior DOFs. Volume tables cover only the RT columns (the
/// tangential unknowns live on the skeleton); edge tables cover all of them.
struct ElementContext {
  const ReferenceData* rd;
  ElementGeometry geo;
  int k, nfd, nc, nrt, no, nv, ns;

  std::vector<Index> gdof;  // local skeleton DOF -> compound index
  std::vector<Mat> val;     // per volume point: 2 x nrt
  std::vector<Mat> jac;     // per volume point: 4 x nrt (dxx, dxy, dyx, dyy)
  Mat div;                  // nq x nrt
  std::array<std::vector<Mat>, 3> trace;     // per edge, per point: 2 x nv
  std::array<std::vector<Mat>, 3> tng_diff;  // traces of the u - uhat pairing
  std::array<Vec2, 3> n_out;
  std::array<Real, 3> ds;  // half facet length (arc element per unit t)

  // local velocity index of an RT column and back
  int vel_of_rt(int r) const { return r < 3 * nfd ? r : nc + (r - 3 * nfd); }

  ElementContext(const Mesh& mesh, const CompoundSpace& V, int e)
      : rd(&reference_data(V.k)), geo(mesh, e) {
    k = V.k;
    nfd = k + 1;
    nc = 6 * nfd;
    no = V.n_interior_per_elem();
    nrt = 3 * nfd + no;
    nv = nc + no;
    ns = static_cast<int>(rd->scalar.size());

    gdof.resize(nc);
    for (int le = 0; le < 3; ++le)
      for (int i = 0; i < nfd; ++i) {
        gdof[le * nfd + i] = V.flux_dof(geo.facet[le], i);
        gdof[3 * nfd + le * nfd + i] = V.tang_dof(geo.facet[le], i);
      }

    Vec factor = Vec::Ones(nrt);
    for (int le = 0; le < 3; ++le)
      for (int i = 0; i < nfd; ++i)
        factor[le * nfd + i] = geo.rt_factor(le, i);

    const int nq = rd->nq();
    val.resize(nq);
    jac.assign(nq, Mat(4, nrt));
    div.resize(nq, nrt);
    for (int q = 0; q < nq; ++q) {
      val[q] = (geo.J * rd->vol_rt_val[q]) / geo.detJ;
      for (int a = 0; a < nrt; ++a) {
        Mat2 Jh;
        Jh << rd->vol_rt_jac[q](0, a), rd->vol_rt_jac[q](1, a),
            rd->vol_rt_jac[q](2, a), rd->vol_rt_jac[q](3, a);
        Mat2 P = (geo.J * Jh * geo.Jinv) / geo.detJ;
        jac[q](0, a) = P(0, 0);
        jac[q](1, a) = P(0, 1);
        jac[q](2, a) = P(1, 0);
        jac[q](3, a) = P(1, 1);
      }
      div.row(q) = rd->vol_rt_div.row(q) / geo.detJ;
      for (int a = 0; a < nrt; ++a) {
        val[q].col(a) *= factor[a];
        jac[q].col(a) *= factor[a];
        div(q, a) *= factor[a];
      }
    }

    const int nqe = rd->nq_edge();
    for (int le = 0; le < 3; ++le) {
      Vec2 tf = mesh.facet_tangent(geo.facet[le]);
      Vec2 n = Real(geo.sigma[le]) * mesh.facet_normal(geo.facet[le]);
      n_out[le] = n;
      ds[le] = 0.5 * geo.facet_len[le];
      trace[le].assign(nqe, Mat::Zero(2, nv));
      tng_diff[le].assign(nqe, Mat::Zero(2, nv));
      for (int q = 0; q < nqe; ++q) {
        Mat& T = trace[le][q];
        Mat& D = tng_diff[le][q];
        Mat phys = (geo.J * rd->edge_rt_val[le][q]) / geo.detJ;
        for (int a = 0; a < nrt; ++a) {
          int col = vel_of_rt(a);
          T.col(col) = factor[a] * phys.col(a);
          D.col(col) = T.col(col) - T.col(col).dot(n) * n;
        }
        Real t = rd->edge.points[q];
        for (int i = 0; i < nfd; ++i) {
          Real leg = legendre(i, t);
          if (geo.rho[le] < 0 && i % 2 == 1) leg = -leg;
          int col = 3 * nfd + le * nfd + i;
          T.col(col) = leg * tf;
          D.col(col) = -T.col(col);
        }
      }
    }
  }

  Vec local_velocity(const HDGVelocity& u, int e) const {
    Vec x(nv);
    for (int a = 0; a < nc; ++a) x[a] = u.compound[gdof[a]];
    for (int j = 0; j < no; ++j) x[nc + j] = u.interior[u.V.interior_dof(e, j)];
    return x;
  }

  Vec rt_coeffs(const Vec& x_local) const {
    Vec c(nrt);
    c.head(3 * nfd) = x_local.head(3 * nfd);
    c.tail(no) = x_local.tail(no);
    return c;
  }
};

/// Element matrices before condensation. A couples all nv velocity DOFs,
/// P holds the divergence moments against the zero-mean pressure modes, and
/// C the coupling to the gradient variable (rows component-major: xx, xy,
/// yx, yy blocks of ns scalar modes each). The gradient variable itself is
/// already eliminated through its diagonal mass matrix: its element
/// contribution to A is (nu / detJ) C^T C and its recovery reads
/// ell = -(nu / detJ) C x.
struct LocalBlocks {
  Mat A;
  Mat P;
  Mat C;
  Vec rhs;
};

inline LocalBlocks build_local_blocks(const ElementContext& ctx, int e,
                                      const AssemblyOptions& opt) {
  const ReferenceData& rd = *ctx.rd;
  const int nv = ctx.nv, nrt = ctx.nrt, ns = ctx.ns, nfd = ctx.nfd;
  LocalBlocks blk;
  blk.C = Mat::Zero(4 * ns, nv);
  blk.A = Mat::Zero(nv, nv);
  blk.P = Mat::Zero(ns - 1, nv);
  blk.rhs = Vec::Zero(nv);

  Vec x_w, w_rt;
  if (opt.advection) {
    x_w = ctx.local_velocity(*opt.advection, e);
    w_rt = ctx.rt_coeffs(x_w);
  }
  Vec m_rt;
  if (opt.mass_field) m_rt = ctx.rt_coeffs(ctx.local_velocity(*opt.mass_field, e));

  const Real mass = opt.beta + opt.mass_coef;
  for (int q = 0; q < rd.nq(); ++q) {
    const Real w = rd.vol.weights[q] * ctx.geo.detJ;
    const Mat& V = ctx.val[q];
    const Mat& J = ctx.jac[q];

    // gradient coupling (d_j v_i, phi_m) and divergence moments
    for (int r = 0; r < nrt; ++r) {
      int a = ctx.vel_of_rt(r);
      for (int c = 0; c < 4; ++c)
        for (int m = 0; m < ns; ++m)
          blk.C(c * ns + m, a) += w * J(c, r) * rd.vol_scalar(q, m);
      for (int m = 1; m < ns; ++m)
        blk.P(m - 1, a) += w * ctx.div(q, r) * rd.vol_scalar(q, m);
    }

    // velocity mass
    if (mass != 0.0)
      for (int r = 0; r < nrt; ++r)
        for (int s = 0; s < nrt; ++s)
          blk.A(ctx.vel_of_rt(r), ctx.vel_of_rt(s)) +=
              mass * w * V.col(r).dot(V.col(s));

    if (opt.load || opt.mass_field) {
      Vec2 fv = Vec2::Zero();
      if (opt.load) fv = opt.load(ctx.geo.map(rd.vol.points[q]));
      if (opt.mass_field) fv += opt.mass_coef * Vec2(V * m_rt);
      for (int r = 0; r < nrt; ++r)
        blk.rhs[ctx.vel_of_rt(r)] += w * fv.dot(V.col(r));
    }

    if (opt.advection) {
      Vec2 wv = V * w_rt;
      // -(u (x) w, grad v): trial column s, test row r
      for (int r = 0; r < nrt; ++r) {
        int a = ctx.vel_of_rt(r);
        Real g[4] = {J(0, r), J(1, r), J(2, r), J(3, r)};
        for (int s = 0; s < nrt; ++s) {
          int b = ctx.vel_of_rt(s);
          Real t = V(0, s) * (g[0] * wv.x() + g[1] * wv.y()) +
                   V(1, s) * (g[2] * wv.x() + g[3] * wv.y());
          blk.A(a, b) -= w * t;
          if (opt.newton) {
            Real tn = wv.x() * (g[0] * V(0, s) + g[1] * V(1, s)) +
                      wv.y() * (g[2] * V(0, s) + g[3] * V(1, s));
            blk.A(a, b) -= w * tn;
          }
        }
        if (opt.newton)
          blk.rhs[a] -= w * (wv.x() * (g[0] * wv.x() + g[1] * wv.y()) +
                             wv.y() * (g[2] * wv.x() + g[3] * wv.y()));
      }
    }
  }

  // facet terms: gradient-variable stabilization and upwinded transport
  for (int le = 0; le < 3; ++le) {
    const Vec2 n = ctx.n_out[le];
    for (int q = 0; q < rd.nq_edge(); ++q) {
      const Real wds = rd.edge.weights[q] * ctx.ds[le];
      const Mat& T = ctx.trace[le][q];
      const Mat& D = ctx.tng_diff[le][q];
      for (int a = 0; a < nv; ++a) {
        if (D.col(a).isZero(0)) continue;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int m = 0; m < ns; ++m)
              blk.C((i * 2 + j) * ns + m, a) -=
                  wds * D(i, a) * n[j] * rd.edge_scalar[le](q, m);
      }

      if (opt.advection) {
        Vec2 wtr = T.leftCols(3 * nfd) * x_w.head(3 * nfd);
        if (ctx.no > 0) wtr += T.rightCols(ctx.no) * x_w.tail(ctx.no);
        const Real wn = wtr.dot(n);
        const bool outflow = wn > 0;
        // upwind trace of the state (inflow: tangential facet value; its
        // normal part is orthogonal to every test trace and is dropped)
        Vec2 up0;
        if (outflow)
          up0 = wtr;
        else
          up0 = T.middleCols(3 * nfd, 3 * nfd) * x_w.segment(3 * nfd, 3 * nfd);
        for (int a = 0; a < nv; ++a) {
          Vec2 ta = D.col(a);
          if (ta.isZero(0)) continue;
          if (wn != 0.0) {
            if (outflow) {
              for (int r = 0; r < nrt; ++r) {
                int b = ctx.vel_of_rt(r);
                blk.A(a, b) += wds * wn * ta.dot(T.col(b));
              }
            } else {
              for (int i = 0; i < nfd * 3; ++i) {
                int b = 3 * nfd + i;
                blk.A(a, b) += wds * wn * ta.dot(T.col(b));
              }
            }
          }
          if (opt.newton) {
            Real tup = ta.dot(up0);
            if (tup != 0.0)
              for (int i = 0; i < 3 * nfd; ++i)
                blk.A(a, i) += wds * tup * T.col(i).dot(n);
            blk.rhs[a] += wds * wn * tup;
          }
        }
      }
    }
  }

  blk.A += (opt.nu / ctx.geo.detJ) * blk.C.transpose() * blk.C;
  return blk;
}

/// Condenses the element-interior velocity DOFs and zero-mean pressure modes
/// out of the local blocks. The eliminated saddle block is symmetrized by
/// negating the constraint rows, so a symmetric A stays symmetric.
inline void condense_local(const ElementContext& ctx, const LocalBlocks& blk,
                           Mat& Ac, Vec& rc) {
  const int nc = ctx.nc, no = ctx.no, np = ctx.ns - 1;
  if (no + np == 0) {
    Ac = blk.A;
    rc = blk.rhs;
    return;
  }
  const int nz = no + np;
  Mat Mzz = Mat::Zero(nz, nz);
  Mzz.topLeftCorner(no, no) = blk.A.bottomRightCorner(no, no);
  Mzz.topRightCorner(no, np) = -blk.P.rightCols(no).transpose();
  Mzz.bottomLeftCorner(np, no) = -blk.P.rightCols(no);
  Mat Mzc(nz, nc), Mcz(nc, nz);
  Mzc.topRows(no) = blk.A.bottomLeftCorner(no, nc);
  Mzc.bottomRows(np) = -blk.P.leftCols(nc);
  Mcz.leftCols(no) = blk.A.topRightCorner(nc, no);
  Mcz.rightCols(np) = -blk.P.leftCols(nc).transpose();
  Eigen::PartialPivLU<Mat> lu(Mzz);
  Ac = blk.A.topLeftCorner(nc, nc) - Mcz * lu.solve(Mzc);
  Vec rz = Vec::Zero(nz);
  rz.head(no) = blk.rhs.tail(no);
  rc = blk.rhs.head(nc) - Mcz * lu.solve(rz);
}

struct CondensedSystem {
  SpMat A;  // free x free
  Vec rhs;  // free, with boundary lifting applied
};

/// Assembles the condensed velocity operator on the unconstrained skeleton
/// DOFs. Dirichlet columns are lifted into the right-hand side using the
/// boundary moments stored in the constraints.
inline CondensedSystem assemble_condensed(const Mesh& mesh,
                                          const CompoundSpace& V,
                                          const Constraints& con,
                                          const AssemblyOptions& opt) {
  CondensedSystem sys;
  sys.rhs = Vec::Zero(con.n_free);
  std::vector<Triplet> trips;
  const std::size_t nc_sq = std::size_t(6 * (V.k + 1)) * std::size_t(6 * (V.k + 1));
  trips.reserve(std::size_t(mesh.ne()) * nc_sq);
  Mat Ac;
  Vec rc;
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementContext ctx(mesh, V, e);
    LocalBlocks blk = build_local_blocks(ctx, e, opt);
    condense_local(ctx, blk, Ac, rc);
    for (int a = 0; a < ctx.nc; ++a) {
      Index fa = con.full_to_free[ctx.gdof[a]];
      if (fa < 0) continue;
      sys.rhs[fa] += rc[a];
      for (int b = 0; b < ctx.nc; ++b) {
        Index fb = con.full_to_free[ctx.gdof[b]];
        if (fb >= 0)
          trips.emplace_back(int(fa), int(fb), Ac(a, b));
        else
          sys.rhs[fa] -= Ac(a, b) * con.g_full[ctx.gdof[b]];
      }
    }
  }
  sys.A.resize(int(con.n_free), int(con.n_free));
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  return sys;
}

/// Row K integrates u.n over the element boundary: entry sigma |F| on the
/// lowest flux coefficient of each of its facets. (div u)|_K = row.u / |K|.
inline SpMat assemble_divergence(const CompoundSpace& V) {
  const Mesh& mesh = *V.mesh;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.ne()) * 3);
  for (int e = 0; e < mesh.ne(); ++e) {
    const auto& el = mesh.elements[e];
    for (int le = 0; le < 3; ++le)
      trips.emplace_back(e, int(V.flux_dof(el.facet[le], 0)),
                         Real(el.sigma[le]) * mesh.facet_length(el.facet[le]));
  }
  SpMat B(mesh.ne(), int(V.n_compound()));
  B.setFromTriplets(trips.begin(), trips.end());
  B.makeCompressed();
  return B;
}

inline Vec element_areas(const Mesh& mesh) {
  Vec a(mesh.ne());
  for (int e = 0; e < mesh.ne(); ++e) a[e] = mesh.area(e);
  return a;
}

/// Grad-div penalty on the condensed space, D = sum_K |K|^-1 b_K b_K^T with
/// b_K the boundary-flux row of K. `rhs` (if given) receives the load induced
/// by constrained entries carrying boundary data g.
inline SpMat grad_div_matrix(const CompoundSpace& V, const Constraints& con,
                             const Vec& g_full, Vec* rhs = nullptr) {
  const Mesh& mesh = *V.mesh;
  if (rhs) *rhs = Vec::Zero(con.n_free);
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(mesh.ne()) * 9);
  for (int e = 0; e < mesh.ne(); ++e) {
    const auto& el = mesh.elements[e];
    const Real inv_area = 1.0 / mesh.area(e);
    for (int i = 0; i < 3; ++i) {
      Index gi = V.flux_dof(el.facet[i], 0);
      Index fi = con.full_to_free[gi];
      if (fi < 0) continue;
      Real bi = Real(el.sigma[i]) * mesh.facet_length(el.facet[i]);
      for (int j = 0; j < 3; ++j) {
        Index gj = V.flux_dof(el.facet[j], 0);
        Index fj = con.full_to_free[gj];
        Real bj = Real(el.sigma[j]) * mesh.facet_length(el.facet[j]);
        if (fj >= 0)
          trips.emplace_back(int(fi), int(fj), inv_area * bi * bj);
        else if (rhs)
          (*rhs)[fi] -= inv_area * bi * bj * g_full[gj];
      }
    }
  }
  SpMat D(int(con.n_free), int(con.n_free));
  D.setFromTriplets(trips.begin(), trips.end());
  D.makeCompressed();
  return D;
}

/// Diagonal of the broken L2 Gram on the compound space: the two traces of a
/// facet each carry weight |F| (|K+| + |K-|) / (3 (2i+1)) on coefficient i.
inline Vec compound_l2_diag(const CompoundSpace& V) {
  const Mesh& mesh = *V.mesh;
  Vec gram = Vec::Zero(V.n_compound());
  for (int f = 0; f < mesh.nf(); ++f) {
    Real a = 0;
    for (int s = 0; s < 2; ++s)
      if (mesh.facets[f].elem[s] >= 0) a += mesh.area(mesh.facets[f].elem[s]);
    Real base = mesh.facet_length(f) * a / 3.0;
    for (int i = 0; i <= V.k; ++i) {
      gram[V.flux_dof(f, i)] = base / (2 * i + 1);
      gram[V.tang_dof(f, i)] = base / (2 * i + 1);
    }
  }
  return gram;
}

/// L2 norm of the RT velocity field given by its compound (flux part) and
/// interior coefficients; the tangential skeleton unknowns carry no volume
/// contribution.
inline Real rt_l2_norm(const Mesh& mesh, const CompoundSpace& V,
                       const Vec& compound, const Vec& interior) {
  const TriRule& rule = reference_data(V.k).vol;
  Real s = 0;
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementContext ctx(mesh, V, e);
    Vec c(ctx.nrt);
    for (int a = 0; a < 3 * ctx.nfd; ++a) c[a] = compound[ctx.gdof[a]];
    for (int j = 0; j < ctx.no; ++j)
      c[3 * ctx.nfd + j] = interior[V.interior_dof(e, j)];
    for (int q = 0; q < ctx.rd->nq(); ++q)
      s += rule.weights[q] * ctx.geo.detJ * (ctx.val[q] * c).squaredNorm();
  }
  return std::sqrt(s);
}

/// Element-local fields recovered from a known skeleton solution by
/// re-eliminating the interior unknowns. The gradient variable comes back as
/// coefficients of the orthonormal scalar basis, component-major (xx, xy,
/// yx, yy), one column per element.
struct LocalSolution {
  Vec interior;
  Vec p_ortho;      // ne x (ns - 1) zero-mean pressure coefficients
  Mat grad_coeffs;  // 4 ns x ne
};

inline LocalSolution recover_locals(const Mesh& mesh, const CompoundSpace& V,
                                    const AssemblyOptions& opt,
                                    const Vec& compound_full) {
  const int ns = static_cast<int>(reference_data(V.k).scalar.size());
  const int no = V.n_interior_per_elem();
  const int np = ns - 1;
  LocalSolution out;
  out.interior = Vec::Zero(V.n_rt_interior());
  out.p_ortho = Vec::Zero(Index(mesh.ne()) * np);
  out.grad_coeffs = Mat::Zero(4 * ns, mesh.ne());
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementContext ctx(mesh, V, e);
    LocalBlocks blk = build_local_blocks(ctx, e, opt);
    Vec xc(ctx.nc);
    for (int a = 0; a < ctx.nc; ++a) xc[a] = compound_full[ctx.gdof[a]];
    Vec xv(ctx.nv);
    xv.head(ctx.nc) = xc;
    if (no + np > 0) {
      const int nz = no + np;
      Mat Mzz = Mat::Zero(nz, nz);
      Mzz.topLeftCorner(no, no) = blk.A.bottomRightCorner(no, no);
      Mzz.topRightCorner(no, np) = -blk.P.rightCols(no).transpose();
      Mzz.bottomLeftCorner(np, no) = -blk.P.rightCols(no);
      Mat Mzc(nz, ctx.nc);
      Mzc.topRows(no) = blk.A.bottomLeftCorner(no, ctx.nc);
      Mzc.bottomRows(np) = -blk.P.leftCols(ctx.nc);
      Vec rz = Vec::Zero(nz);
      rz.head(no) = blk.rhs.tail(no);
      Vec z = Eigen::PartialPivLU<Mat>(Mzz).solve(rz - Mzc * xc);
      for (int j = 0; j < no; ++j) out.interior[V.interior_dof(e, j)] = z[j];
      out.p_ortho.segment(Index(e) * np, np) = z.tail(np);
      xv.tail(no) = z.head(no);
    }
    out.grad_coeffs.col(e) = -(opt.nu / ctx.geo.detJ) * (blk.C * xv);
  }
  return out;
}

}  // namespace hdivmg

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Cholesky>

#include "hdivmg/assembly.hpp"

namespace hdivmg {

/// Elementwise velocity reconstruction one order above the solve, stored as
/// coefficients of the orthonormal order k+1 scalar basis; column e holds
/// the x-component coefficients followed by the y-component ones.
struct PostprocessedVelocity {
  int k_hi = 1;
  Mat coeffs;
};

/// On each element u* in [P^{k+1}]^2 satisfies
///   (grad u*, grad v)_K = -nu^-1 (L_h, grad v)_K   for all v in [P^{k+1}]^2,
///   (u*, w)_K = (u_h, w)_K                          for all w in [P^0]^2.
/// In the orthonormal basis the constant mode carries the mean constraint
/// and the remaining modes solve an SPD stiffness system per component.
inline PostprocessedVelocity postprocess_velocity(const Mesh& mesh,
                                                  const CompoundSpace& V,
                                                  Real nu,
                                                  const HDGVelocity& u,
                                                  const Mat& grad_coeffs) {
  const ReferenceData& rd = reference_data(V.k);
  const int ns = static_cast<int>(rd.scalar.size());
  const int ns_hi = static_cast<int>(rd.scalar_hi.size());
  const int nfd = V.nfd();
  const int nrt = 3 * nfd + V.n_interior_per_elem();
  const int nq = rd.nq();
  const Real ref_mean = tri_integral(rd.scalar_hi[0]);

  PostprocessedVelocity out;
  out.k_hi = V.k + 1;
  out.coeffs = Mat::Zero(2 * ns_hi, mesh.ne());

  for (int e = 0; e < mesh.ne(); ++e) {
    ElementGeometry geo(mesh, e);
    Vec c(nrt);
    for (int le = 0; le < 3; ++le)
      for (int i = 0; i < nfd; ++i)
        c[le * nfd + i] = geo.rt_factor(le, i) *
                          u.compound[V.flux_dof(geo.facet[le], i)];
    for (int j = 0; j < V.n_interior_per_elem(); ++j)
      c[3 * nfd + j] = u.interior[V.interior_dof(e, j)];

    Mat K = Mat::Zero(ns_hi - 1, ns_hi - 1);
    Mat g = Mat::Zero(ns_hi - 1, 2);
    Vec2 u_mean = Vec2::Zero();
    for (int q = 0; q < nq; ++q) {
      Real w = rd.vol.weights[q];
      Mat gp = geo.Jinv.transpose() * rd.vol_scalar_hi_grad[q];
      Mat gt = gp.rightCols(ns_hi - 1);
      K += (w * geo.detJ) * (gt.transpose() * gt);
      Mat2 L;
      for (int comp = 0; comp < 4; ++comp)
        L(comp / 2, comp % 2) =
            rd.vol_scalar.row(q).dot(grad_coeffs.col(e).segment(comp * ns, ns));
      g -= (w * geo.detJ / nu) * (gt.transpose() * L.transpose());
      u_mean += w * ((geo.J * rd.vol_rt_val[q]) / geo.detJ) * c;
    }

    Eigen::LDLT<Mat> ldlt(K);
    for (int comp = 0; comp < 2; ++comp) {
      out.coeffs(comp * ns_hi, e) = u_mean[comp] / ref_mean;
      out.coeffs.col(e).segment(comp * ns_hi + 1, ns_hi - 1) =
          ldlt.solve(g.col(comp));
    }
  }
  return out;
}

/// L2 norms of the discretization errors, named after the CSV columns they
/// feed: velocity, gradient variable, reconstructed velocity, divergence.
struct ErrorNorms {
  Real e_u = 0;
  Real e_L = 0;
  Real e_ustar = 0;
  Real div_u = 0;
};

namespace detail {

/// Basis tables at a quadrature rule fine enough for error integrands (the
/// assembly rule is matched to forms, not to products against a degree 7
/// reference flow).
struct ErrorTables {
  TriRule rule;
  std::vector<Mat> rt_val;  // per point: 2 x dim
  Mat rt_div;               // nq x dim
  Mat scalar;               // nq x ns
  Mat scalar_hi;            // nq x ns_hi
};

inline const ErrorTables& error_tables(int k) {
  static std::map<int, std::unique_ptr<ErrorTables>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(k);
  if (it != cache.end()) return *it->second;

  const ReferenceData& rd = reference_data(k);
  auto tab = std::make_unique<ErrorTables>();
  tab->rule = tri_rule(16);
  const int nq = static_cast<int>(tab->rule.points.size());
  const int dim = rd.rt.dim;
  const int ns = static_cast<int>(rd.scalar.size());
  const int ns_hi = static_cast<int>(rd.scalar_hi.size());
  tab->rt_val.assign(nq, Mat::Zero(2, dim));
  tab->rt_div = Mat::Zero(nq, dim);
  tab->scalar = Mat::Zero(nq, ns);
  tab->scalar_hi = Mat::Zero(nq, ns_hi);
  for (int q = 0; q < nq; ++q) {
    Real x = tab->rule.points[q].x(), y = tab->rule.points[q].y();
    for (int f = 0; f < dim; ++f) {
      tab->rt_val[q](0, f) = rd.rt.val[f][0].eval(x, y);
      tab->rt_val[q](1, f) = rd.rt.val[f][1].eval(x, y);
      tab->rt_div(q, f) = rd.rt.div[f].eval(x, y);
    }
    for (int s = 0; s < ns; ++s) tab->scalar(q, s) = rd.scalar[s].eval(x, y);
    for (int s = 0; s < ns_hi; ++s)
      tab->scalar_hi(q, s) = rd.scalar_hi[s].eval(x, y);
  }
  auto [ins, ok] = cache.emplace(k, std::move(tab));
  (void)ok;
  return *ins->second;
}

}  // namespace detail

/// Measures the errors of a solved state against a smooth reference flow.
/// The gradient variable is compared against -nu grad(u).
inline ErrorNorms measure_errors(
    const Mesh& mesh, const CompoundSpace& V, Real nu, const HDGVelocity& u,
    const Mat& grad_coeffs, const PostprocessedVelocity& post,
    const std::function<Vec2(const Vec2&)>& exact_velocity,
    const std::function<Mat2(const Vec2&)>& exact_gradient) {
  const detail::ErrorTables& tab = detail::error_tables(V.k);
  const int ns = static_cast<int>(reference_data(V.k).scalar.size());
  const int ns_hi = static_cast<int>(tab.scalar_hi.cols());
  const int nfd = V.nfd();
  const int nrt = 3 * nfd + V.n_interior_per_elem();
  const int nq = static_cast<int>(tab.rule.points.size());

  Real s_u = 0, s_L = 0, s_post = 0, s_div = 0;
  for (int e = 0; e < mesh.ne(); ++e) {
    ElementGeometry geo(mesh, e);
    Vec c(nrt);
    for (int le = 0; le < 3; ++le)
      for (int i = 0; i < nfd; ++i)
        c[le * nfd + i] = geo.rt_factor(le, i) *
                          u.compound[V.flux_dof(geo.facet[le], i)];
    for (int j = 0; j < V.n_interior_per_elem(); ++j)
      c[3 * nfd + j] = u.interior[V.interior_dof(e, j)];

    for (int q = 0; q < nq; ++q) {
      Real w = tab.rule.weights[q] * geo.detJ;
      Vec2 xq = geo.map(tab.rule.points[q]);
      Vec2 uh = ((geo.J * tab.rt_val[q]) / geo.detJ) * c;
      s_u += w * (exact_velocity(xq) - uh).squaredNorm();
      s_div += w * sq(tab.rt_div.row(q).dot(c) / geo.detJ);
      Mat2 Lex = -nu * exact_gradient(xq);
      for (int comp = 0; comp < 4; ++comp) {
        Real Lh = tab.scalar.row(q).dot(grad_coeffs.col(e).segment(
            Index(comp) * ns, ns));
        s_L += w * sq(Lex(comp / 2, comp % 2) - Lh);
      }
      Vec2 us(tab.scalar_hi.row(q).dot(post.coeffs.col(e).head(ns_hi)),
              tab.scalar_hi.row(q).dot(post.coeffs.col(e).tail(ns_hi)));
      s_post += w * (exact_velocity(xq) - us).squaredNorm();
    }
  }
  ErrorNorms out;
  out.e_u = std::sqrt(s_u);
  out.e_L = std::sqrt(s_L);
  out.e_ustar = std::sqrt(s_post);
  out.div_u = std::sqrt(s_div);
  return out;
}

/// Estimated order of convergence between two error levels under uniform
/// refinement (mesh size halves).
inline Real estimated_order(Real coarse, Real fine) {
  return std::log2(coarse / fine);
}

}  // namespace hdivmg

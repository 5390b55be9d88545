#pragma once

#include <functional>
#include <vector>

#include "hdivmg/common.hpp"

namespace hdivmg {

using LinearOperator = std::function<Vec(const Vec&)>;

struct KrylovOptions {
  Real rel_tol = 1e-8;
  Real abs_tol = 1e-10;
  int max_iterations = 500;
};

struct SolveStats {
  int iterations = 0;
  bool converged = false;
  /// The conjugate gradient pairing lost positivity: the operator or the
  /// preconditioner is not positive definite on the Krylov space. Reported
  /// rather than patched over, the caller decides what that means.
  bool not_applicable = false;
  Real residual = 0;
};

/// Preconditioned conjugate gradients on A x = b, stopping on the true
/// residual max(rel_tol |b|, abs_tol). `x` holds the initial guess.
inline SolveStats pcg(const LinearOperator& A, const LinearOperator& M, const Vec& b,
                      Vec& x, const KrylovOptions& opt = {}) {
  SolveStats st;
  const Real target = std::max(opt.rel_tol * b.norm(), opt.abs_tol);
  Vec r = b - A(x);
  st.residual = r.norm();
  if (st.residual <= target) {
    st.converged = true;
    return st;
  }
  Vec z = M(r);
  Real rz = r.dot(z);
  if (rz <= 0) {
    st.not_applicable = true;
    return st;
  }
  Vec p = z;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vec Ap = A(p);
    Real pAp = p.dot(Ap);
    if (pAp <= 0) {
      st.not_applicable = true;
      return st;
    }
    Real alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    st.iterations = it + 1;
    st.residual = r.norm();
    if (st.residual <= target) {
      st.converged = true;
      return st;
    }
    z = M(r);
    Real rz_next = r.dot(z);
    if (rz_next <= 0) {
      st.not_applicable = true;
      return st;
    }
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return st;
}

/// Right-preconditioned GMRES with modified Gram-Schmidt and Givens
/// rotations, no restart cap below max_iterations. The rotation recurrence
/// estimates the true residual; the estimate is verified against b - A x
/// before the method reports success, restarting if round-off let it drift.
inline SolveStats gmres(const LinearOperator& A, const LinearOperator& M, const Vec& b,
                        Vec& x, const KrylovOptions& opt = {}) {
  SolveStats st;
  const Real target = std::max(opt.rel_tol * b.norm(), opt.abs_tol);
  const Real breakdown = 1e-14;
  while (st.iterations < opt.max_iterations) {
    Vec r = b - A(x);
    st.residual = r.norm();
    if (st.residual <= target) {
      st.converged = true;
      return st;
    }
    const Real beta = st.residual;
    std::vector<Vec> V{r / beta};
    std::vector<Vec> h_cols;
    std::vector<Real> cs, sn, g{beta};
    bool stalled = false;
    int j = 0;
    for (; st.iterations < opt.max_iterations; ++j) {
      Vec w = A(M(V[std::size_t(j)]));
      Vec h = Vec::Zero(j + 2);
      for (int i = 0; i <= j; ++i) {
        h[i] = w.dot(V[std::size_t(i)]);
        w -= h[i] * V[std::size_t(i)];
      }
      h[j + 1] = w.norm();
      bool happy = h[j + 1] <= breakdown * beta;
      if (!happy) V.push_back(w / h[j + 1]);
      for (int i = 0; i < j; ++i) {
        Real t = cs[std::size_t(i)] * h[i] + sn[std::size_t(i)] * h[i + 1];
        h[i + 1] = -sn[std::size_t(i)] * h[i] + cs[std::size_t(i)] * h[i + 1];
        h[i] = t;
      }
      Real rho = std::hypot(h[j], h[j + 1]);
      cs.push_back(h[j] / rho);
      sn.push_back(h[j + 1] / rho);
      h[j] = rho;
      h[j + 1] = 0;
      g.push_back(-sn.back() * g[std::size_t(j)]);
      g[std::size_t(j)] *= cs.back();
      h_cols.push_back(h);
      ++st.iterations;
      if (std::abs(g.back()) <= target || happy) {
        stalled = happy && std::abs(g.back()) > target;
        break;
      }
    }
    const int m = int(h_cols.size());
    Vec y(m);
    for (int i = m - 1; i >= 0; --i) {
      Real s = g[std::size_t(i)];
      for (int l = i + 1; l < m; ++l) s -= h_cols[std::size_t(l)][i] * y[l];
      y[i] = s / h_cols[std::size_t(i)][i];
    }
    Vec u = Vec::Zero(b.size());
    for (int i = 0; i < m; ++i) u += y[i] * V[std::size_t(i)];
    x += M(u);
    st.residual = (b - A(x)).norm();
    if (st.residual <= target) {
      st.converged = true;
      return st;
    }
    if (stalled) return st;
  }
  return st;
}

}  // namespace hdivmg

#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "hdivmg/common.hpp"

namespace hdivmg {

/// Legendre polynomials L_0..L_k at t, three-term recurrence.
inline void legendre_all(int k, Real t, Real* out) {
  out[0] = 1.0;
  if (k >= 1) out[1] = t;
  for (int j = 2; j <= k; ++j)
    out[j] = ((2 * j - 1) * t * out[j - 1] - (j - 1) * out[j - 2]) / j;
}

inline Real legendre(int i, Real t) {
  std::vector<Real> v(i + 1);
  legendre_all(i, t, v.data());
  return v[i];
}

/// Bivariate polynomial of total degree <= deg in monomial coefficients.
/// Coefficient of x^i y^j sits at index (i+j)(i+j+1)/2 + j.
class Poly2 {
 public:
  Poly2() : deg_(0), c_(Vec::Zero(1)) {}
  explicit Poly2(int deg) : deg_(deg), c_(Vec::Zero(dim(deg))) {}

  static int dim(int deg) { return (deg + 1) * (deg + 2) / 2; }
  static int idx(int i, int j) {
    int s = i + j;
    return s * (s + 1) / 2 + j;
  }

  static Poly2 monomial(int i, int j) {
    Poly2 p(i + j);
    p.c_[idx(i, j)] = 1.0;
    return p;
  }

  int degree() const { return deg_; }
  Real coeff(int i, int j) const {
    return (i + j <= deg_) ? c_[idx(i, j)] : 0.0;
  }
  Real& coeff(int i, int j) {
    assert(i + j <= deg_);
    return c_[idx(i, j)];
  }

  Real eval(Real x, Real y) const {
    Real sum = 0.0;
    for (int s = 0; s <= deg_; ++s)
      for (int j = 0; j <= s; ++j) {
        Real cij = c_[idx(s - j, j)];
        if (cij != 0.0) sum += cij * std::pow(x, s - j) * std::pow(y, j);
      }
    return sum;
  }

  Poly2 dx() const {
    Poly2 p(std::max(0, deg_ - 1));
    for (int s = 1; s <= deg_; ++s)
      for (int j = 0; j <= s; ++j) {
        int i = s - j;
        if (i >= 1) p.coeff(i - 1, j) += i * c_[idx(i, j)];
      }
    return p;
  }

  Poly2 dy() const {
    Poly2 p(std::max(0, deg_ - 1));
    for (int s = 1; s <= deg_; ++s)
      for (int j = 1; j <= s; ++j) {
        int i = s - j;
        p.coeff(i, j - 1) += j * c_[idx(i, j)];
      }
    return p;
  }

  Poly2& operator+=(const Poly2& o) {
    if (o.deg_ > deg_) grow(o.deg_);
    for (int s = 0; s <= o.deg_; ++s)
      for (int j = 0; j <= s; ++j) c_[idx(s - j, j)] += o.c_[idx(s - j, j)];
    return *this;
  }

  Poly2& operator-=(const Poly2& o) {
    if (o.deg_ > deg_) grow(o.deg_);
    for (int s = 0; s <= o.deg_; ++s)
      for (int j = 0; j <= s; ++j) c_[idx(s - j, j)] -= o.c_[idx(s - j, j)];
    return *this;
  }

  Poly2& operator*=(Real a) {
    c_ *= a;
    return *this;
  }

  friend Poly2 operator+(Poly2 a, const Poly2& b) { return a += b; }
  friend Poly2 operator-(Poly2 a, const Poly2& b) { return a -= b; }
  friend Poly2 operator*(Real a, Poly2 p) { return p *= a; }

  friend Poly2 operator*(const Poly2& a, const Poly2& b) {
    Poly2 p(a.deg_ + b.deg_);
    for (int sa = 0; sa <= a.deg_; ++sa)
      for (int ja = 0; ja <= sa; ++ja) {
        Real ca = a.c_[idx(sa - ja, ja)];
        if (ca == 0.0) continue;
        for (int sb = 0; sb <= b.deg_; ++sb)
          for (int jb = 0; jb <= sb; ++jb) {
            Real cb = b.c_[idx(sb - jb, jb)];
            if (cb != 0.0) p.coeff(sa - ja + sb - jb, ja + jb) += ca * cb;
          }
      }
    return p;
  }

 private:
  void grow(int deg) {
    Vec nc = Vec::Zero(dim(deg));
    nc.head(c_.size()) = c_;
    c_.swap(nc);
    deg_ = deg;
  }

  int deg_;
  Vec c_;
};

/// Exact integral of x^a y^b over the reference triangle (0,0)-(1,0)-(0,1):
/// a! b! / (a+b+2)! computed overflow-free as 1/(C(a+b,a) (a+b+1) (a+b+2)).
inline long double tri_monomial_integral_ld(int a, int b) {
  long double binom = 1.0L;
  for (int i = 1; i <= a; ++i) binom *= static_cast<long double>(b + i) / i;
  return 1.0L / (binom * (a + b + 1) * (a + b + 2));
}

inline Real tri_monomial_integral(int a, int b) {
  return static_cast<Real>(tri_monomial_integral_ld(a, b));
}

inline Real tri_integral(const Poly2& p) {
  long double sum = 0.0L;
  for (int s = 0; s <= p.degree(); ++s)
    for (int j = 0; j <= s; ++j) {
      Real c = p.coeff(s - j, j);
      if (c != 0.0) sum += static_cast<long double>(c) * tri_monomial_integral_ld(s - j, j);
    }
  return static_cast<Real>(sum);
}

/// L2 inner product over the reference triangle, accumulated coefficient pair
/// by coefficient pair in extended precision. The basis constructions divide
/// out heavy cancellation here, so the extra digits are load-bearing.
inline Real tri_l2(const Poly2& a, const Poly2& b) {
  long double sum = 0.0L;
  for (int sa = 0; sa <= a.degree(); ++sa)
    for (int ja = 0; ja <= sa; ++ja) {
      Real ca = a.coeff(sa - ja, ja);
      if (ca == 0.0) continue;
      for (int sb = 0; sb <= b.degree(); ++sb)
        for (int jb = 0; jb <= sb; ++jb) {
          Real cb = b.coeff(sb - jb, jb);
          if (cb == 0.0) continue;
          sum += static_cast<long double>(ca) * cb *
                 tri_monomial_integral_ld(sa + sb - ja - jb, ja + jb);
        }
    }
  return static_cast<Real>(sum);
}

/// L2(reference triangle)-orthonormal basis of P^k, ordered by total degree
/// (first member is the constant sqrt(2)). Modified Gram-Schmidt with exact
/// monomial integrals, re-orthogonalized.
inline std::vector<Poly2> orthonormal_scalar_basis(int k) {
  std::vector<Poly2> basis;
  basis.reserve(Poly2::dim(k));
  for (int s = 0; s <= k; ++s)
    for (int j = 0; j <= s; ++j) {
      Poly2 v = Poly2::monomial(s - j, j);
      // repeated Gram-Schmidt; monomials above degree 3 are ill-conditioned
      // enough that two passes leave O(1e-12) residual coupling
      for (int pass = 0; pass < 4; ++pass) {
        for (const Poly2& q : basis) v -= tri_l2(v, q) * q;
        Real nrm = std::sqrt(tri_l2(v, v));
        assert(nrm > 1e-14);
        v *= 1.0 / nrm;
      }
      basis.push_back(v);
    }
  return basis;
}

}  // namespace hdivmg

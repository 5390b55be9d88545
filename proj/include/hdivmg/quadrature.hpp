#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "hdivmg/common.hpp"

namespace hdivmg {

/// Gauss-Legendre rule on [-1,1]; weights sum to 2, exact through degree 2n-1.
struct LineRule {
  std::vector<Real> points;
  std::vector<Real> weights;
  int exact_degree = 0;
};

inline LineRule line_rule(int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  LineRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  rule.exact_degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    Real x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      Real p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        Real p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      Real dp = n * (x * p1 - p0) / (x * x - 1.0);
      Real dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    Real p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
      Real p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    Real dp = n * (x * p1 - p0) / (x * x - 1.0);
    rule.points[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Quadrature on the reference triangle (0,0)-(1,0)-(0,1); weights sum to 1/2.
struct TriRule {
  std::vector<Vec2> points;
  std::vector<Real> weights;
  int exact_degree = 0;
};

/// Duffy (collapsed tensor-Gauss) rule, exact for polynomials through `degree`:
/// x = u(1-v), y = uv turns a monomial x^a y^b into u^{a+b+1}(1-v)^a v^b.
inline TriRule tri_rule(int degree) {
  LineRule gu = line_rule(degree + 1);
  LineRule gv = line_rule(degree);
  TriRule rule;
  rule.exact_degree = degree;
  rule.points.reserve(gu.points.size() * gv.points.size());
  rule.weights.reserve(gu.points.size() * gv.points.size());
  for (std::size_t i = 0; i < gu.points.size(); ++i) {
    Real u = 0.5 * (gu.points[i] + 1.0);
    Real wu = 0.5 * gu.weights[i];
    for (std::size_t j = 0; j < gv.points.size(); ++j) {
      Real v = 0.5 * (gv.points[j] + 1.0);
      Real wv = 0.5 * gv.weights[j];
      rule.points.emplace_back(u * (1.0 - v), u * v);
      rule.weights.push_back(wu * wv * u);
    }
  }
  return rule;
}

}  // namespace hdivmg

#pragma once

#include <functional>

#include "hdivmg/common.hpp"

namespace hdivmg {
namespace manufactured {

// Closed-form reference flow on the unit square: the velocity is the curl of
// the stream function -G(x) G(y) with G(s) = s^2 (s-1)^2, so it is exactly
// divergence-free and vanishes with its tangential trace on the boundary.
// The pressure is a zero-mean polynomial. Momentum sources come from the
// closed-form derivatives below.

inline Real bump(Real s) { return sq(s) * sq(s - 1.0); }
inline Real bump_d1(Real s) { return 2.0 * s * (s - 1.0) * (2.0 * s - 1.0); }
inline Real bump_d2(Real s) { return 12.0 * s * s - 12.0 * s + 2.0; }
inline Real bump_d3(Real s) { return 24.0 * s - 12.0; }

inline Vec2 velocity(const Vec2& x) {
  return Vec2(-bump(x.x()) * bump_d1(x.y()), bump_d1(x.x()) * bump(x.y()));
}

/// Entry (i, j) is the derivative of component i in direction j.
inline Mat2 velocity_gradient(const Vec2& x) {
  Mat2 g;
  g(0, 0) = -bump_d1(x.x()) * bump_d1(x.y());
  g(0, 1) = -bump(x.x()) * bump_d2(x.y());
  g(1, 0) = bump_d2(x.x()) * bump(x.y());
  g(1, 1) = bump_d1(x.x()) * bump_d1(x.y());
  return g;
}

inline Vec2 velocity_laplacian(const Vec2& x) {
  return Vec2(
      -bump_d2(x.x()) * bump_d1(x.y()) - bump(x.x()) * bump_d3(x.y()),
      bump_d3(x.x()) * bump(x.y()) + bump_d1(x.x()) * bump_d2(x.y()));
}

inline Real pressure(const Vec2& x) {
  return x.x() * (1.0 - x.x()) * (1.0 - x.y()) - 1.0 / 12.0;
}

inline Vec2 pressure_gradient(const Vec2& x) {
  return Vec2((1.0 - 2.0 * x.x()) * (1.0 - x.y()), x.x() * x.x() - x.x());
}

/// Momentum source -nu lap(u) + beta u + grad(p) of the generalized Stokes
/// equation.
inline std::function<Vec2(const Vec2&)> stokes_load(Real nu, Real beta) {
  return [nu, beta](const Vec2& x) {
    return Vec2(-nu * velocity_laplacian(x) + beta * velocity(x) +
                pressure_gradient(x));
  };
}

/// Momentum source -nu lap(u) + (u . grad) u + grad(p) of the stationary
/// Navier-Stokes equations.
inline std::function<Vec2(const Vec2&)> navier_stokes_load(Real nu) {
  return [nu](const Vec2& x) {
    return Vec2(-nu * velocity_laplacian(x) +
                velocity_gradient(x) * velocity(x) + pressure_gradient(x));
  };
}

}  // namespace manufactured
}  // namespace hdivmg

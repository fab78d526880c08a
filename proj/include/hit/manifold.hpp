#pragma once

// Poincare ball B_c^d = { x : c * |x|^2 < 1 } of curvature -c.
//
// All arithmetic is carried out in double precision. The distance is
// evaluated through the gyrovector identity
//
//   |(-u) (+)_c v|^2 = |u - v|^2 / (1 - 2c<u,v> + c^2 |u|^2 |v|^2)
//
// which is algebraically identical to taking the Euclidean norm of the
// Mobius sum, but symmetric in (u, v) by construction and free of the
// cancellation that forming the sum explicitly suffers near the boundary.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hit/error.hpp"

namespace hit {

using Vector = std::vector<double>;

inline double curvature_for_dim(std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidDimension, "manifold", "dimension must be >= 1");
  return 1.0 / static_cast<double>(dim);
}

struct ManifoldConfig {
  std::size_t dim = 1;
  double curvature = 1.0;
  double eps = 1e-5;

  ManifoldConfig() = default;
  ManifoldConfig(std::size_t d, double c, double e = 1e-5) : dim(d), curvature(c), eps(e) {
    if (dim == 0) throw Error(ErrorKind::InvalidDimension, "manifold", "dimension must be >= 1");
    if (!(curvature > 0.0) || !std::isfinite(curvature))
      throw Error(ErrorKind::InvalidValue, "manifold", "curvature must be positive and finite");
    if (!(eps > 0.0 && eps <= 1e-3))
      throw Error(ErrorKind::InvalidValue, "manifold", "eps must lie in (0, 1e-3]");
  }

  /// Ball of radius sqrt(d): the sphere circumscribing the [-1, 1]^d cube.
  static ManifoldConfig for_dim(std::size_t d, double e = 1e-5) {
    return ManifoldConfig(d, curvature_for_dim(d), e);
  }

  double radius() const { return 1.0 / std::sqrt(curvature); }
  /// Largest Euclidean norm kept by project().
  double max_norm() const { return (1.0 - eps) / std::sqrt(curvature); }

  bool operator==(const ManifoldConfig&) const = default;
};

namespace detail {

inline constexpr double kArtanhCeiling = 1.0 - 1e-15;
inline constexpr double kDenominatorFloor = 1e-30;
inline constexpr double kCoincidenceSq = 1e-24;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

inline void require_dim(std::span<const double> x, const ManifoldConfig& cfg) {
  if (x.size() != cfg.dim)
    throw Error(ErrorKind::DimensionMismatch, "manifold",
                "vector of length " + std::to_string(x.size()) + " on a " +
                    std::to_string(cfg.dim) + "-dimensional ball");
}

/// Returns |x|^2 after checking x is a finite point of the open ball.
inline double checked_sq_norm(std::span<const double> x, const ManifoldConfig& cfg) {
  require_dim(x, cfg);
  const double sq = dot(x, x);
  if (!std::isfinite(sq)) throw Error(ErrorKind::InvalidValue, "manifold", "non-finite coordinates");
  if (!(cfg.curvature * sq < 1.0))
    throw Error(ErrorKind::InvalidValue, "manifold", "point lies outside the open ball");
  return sq;
}

inline double artanh_clamped(double s) {
  if (!std::isfinite(s)) throw Error(ErrorKind::NumericInstability, "manifold", "non-finite artanh argument");
  if (s < 0.0) s = 0.0;
  if (s > kArtanhCeiling) s = kArtanhCeiling;
  return std::atanh(s);
}

}  // namespace detail

/// Euclidean coordinates of u (+)_c v.
inline Vector mobius_add(std::span<const double> u, std::span<const double> v,
                         const ManifoldConfig& cfg) {
  const double c = cfg.curvature;
  const double uu = detail::checked_sq_norm(u, cfg);
  const double vv = detail::checked_sq_norm(v, cfg);
  const double uv = detail::dot(u, v);
  const double cu = 1.0 + 2.0 * c * uv + c * vv;
  const double cv = 1.0 - c * uu;
  const double den = 1.0 + 2.0 * c * uv + c * c * uu * vv;
  if (!(den > detail::kDenominatorFloor) || !std::isfinite(den))
    throw Error(ErrorKind::NumericInstability, "manifold", "Mobius denominator underflow");
  Vector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = (cu * u[i] + cv * v[i]) / den;
  // Rounding may land the sum on or past the boundary; pull it back inside.
  const double sq = detail::dot(out, out);
  if (!(c * sq < 1.0)) {
    const double scale = cfg.max_norm() / std::sqrt(sq);
    for (double& x : out) x *= scale;
  }
  return out;
}

inline Vector negate(std::span<const double> u) {
  Vector out(u.begin(), u.end());
  for (double& x : out) x = -x;
  return out;
}

/// Geodesic distance (2/sqrt(c)) * artanh(sqrt(c) * |(-u) (+)_c v|).
inline double distance(std::span<const double> u, std::span<const double> v,
                       const ManifoldConfig& cfg) {
  const double c = cfg.curvature;
  const double uu = detail::checked_sq_norm(u, cfg);
  const double vv = detail::checked_sq_norm(v, cfg);
  const double a = detail::sq_dist(u, v);
  if (a == 0.0) return 0.0;
  const double den = 1.0 - 2.0 * c * detail::dot(u, v) + c * c * (uu * vv);
  if (!(den > detail::kDenominatorFloor))
    throw Error(ErrorKind::NumericInstability, "manifold", "distance denominator underflow");
  const double s = std::sqrt(c * a / den);
  return 2.0 / std::sqrt(c) * detail::artanh_clamped(s);
}

/// Hyperbolic norm: distance to the origin.
inline double hnorm(std::span<const double> u, const ManifoldConfig& cfg) {
  const double c = cfg.curvature;
  const double uu = detail::checked_sq_norm(u, cfg);
  if (uu == 0.0) return 0.0;
  return 2.0 / std::sqrt(c) * detail::artanh_clamped(std::sqrt(c * uu));
}

/// In-place projection onto the closed ball of radius (1 - eps)/sqrt(c).
inline void project_inplace(std::span<double> x, const ManifoldConfig& cfg) {
  detail::require_dim(x, cfg);
  const double sq = detail::dot(x, x);
  if (!std::isfinite(sq)) throw Error(ErrorKind::InvalidValue, "manifold", "non-finite vector");
  const double limit = 1.0 - cfg.eps;
  if (cfg.curvature * sq < limit * limit) return;
  const double scale = cfg.max_norm() / std::sqrt(sq);
  for (double& t : x) t *= scale;
  // Rounding can leave the result a hair outside the limit; shrink by ulps
  // until it sits strictly inside so a second projection is a no-op.
  while (cfg.curvature * detail::dot(x, x) >= limit * limit)
    for (double& t : x) t *= 1.0 - 0x1.0p-52;
}

inline Vector project(std::span<const double> x, const ManifoldConfig& cfg) {
  Vector out(x.begin(), x.end());
  project_inplace(out, cfg);
  return out;
}

struct DistanceGrad {
  Vector du;
  Vector dv;
};

/// Closed-form Euclidean gradients of distance(u, v).
///
/// With a = |u-v|^2 and D = 1 - 2c<u,v> + c^2|u|^2|v|^2,
///   d/du = 2 [(u - v) D + a c (v - c|v|^2 u)] / (sqrt(a D) (1-c|u|^2)(1-c|v|^2))
/// and d/dv follows by exchanging u and v.
inline DistanceGrad distance_grad(std::span<const double> u, std::span<const double> v,
                                  const ManifoldConfig& cfg) {
  const double c = cfg.curvature;
  const double uu = detail::checked_sq_norm(u, cfg);
  const double vv = detail::checked_sq_norm(v, cfg);
  const double a = detail::sq_dist(u, v);
  if (a <= detail::kCoincidenceSq)
    throw Error(ErrorKind::DegenerateGradient, "manifold", "distance gradient at coincident points");
  const double den = 1.0 - 2.0 * c * detail::dot(u, v) + c * c * (uu * vv);
  if (!(den > detail::kDenominatorFloor))
    throw Error(ErrorKind::NumericInstability, "manifold", "distance denominator underflow");
  const double pref = 2.0 / (std::sqrt(a * den) * (1.0 - c * uu) * (1.0 - c * vv));
  DistanceGrad g{Vector(u.size()), Vector(u.size())};
  for (std::size_t i = 0; i < u.size(); ++i) {
    g.du[i] = pref * ((u[i] - v[i]) * den + a * c * (v[i] - c * vv * u[i]));
    g.dv[i] = pref * ((v[i] - u[i]) * den + a * c * (u[i] - c * uu * v[i]));
  }
  return g;
}

/// Euclidean gradient of hnorm: 2u / (|u| (1 - c|u|^2)).
inline Vector hnorm_grad(std::span<const double> u, const ManifoldConfig& cfg) {
  const double c = cfg.curvature;
  const double uu = detail::checked_sq_norm(u, cfg);
  if (uu <= detail::kCoincidenceSq)
    throw Error(ErrorKind::DegenerateGradient, "manifold", "hyperbolic norm gradient at the origin");
  const double pref = 2.0 / (std::sqrt(uu) * (1.0 - c * uu));
  Vector g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = pref * u[i];
  return g;
}

/// Conformal factor lambda_x = 2 / (1 - c|x|^2) of the ball metric.
inline double conformal_factor(std::span<const double> x, const ManifoldConfig& cfg) {
  return 2.0 / (1.0 - cfg.curvature * detail::dot(x, x));
}

/// Riemannian gradient from a Euclidean one: g * (1 - c|u|^2)^2 / 4.
inline Vector egrad_to_rgrad(std::span<const double> u, std::span<const double> g,
                             const ManifoldConfig& cfg) {
  const double uu = detail::checked_sq_norm(u, cfg);
  if (g.size() != u.size())
    throw Error(ErrorKind::DimensionMismatch, "manifold", "gradient and point lengths differ");
  const double t = 1.0 - cfg.curvature * uu;
  const double factor = t * t / 4.0;
  Vector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw Error(ErrorKind::InvalidValue, "manifold", "non-finite gradient");
    out[i] = g[i] * factor;
  }
  return out;
}

}  // namespace hit

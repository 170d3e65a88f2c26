#pragma once

// Gyrovector-space kernel for stereographically projected constant-curvature
// spaces. A single signed curvature k selects the regime:
//
//   k < 0   Poincare ball of radius 1/sqrt(|k|)
//   k = 0   Euclidean space (every operation takes its analytic flat limit)
//   k > 0   stereographically projected sphere (whole plane, pole at infinity)
//
// All reals are double precision. Operations are pure functions of their
// arguments.

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::geometry {

using Vec = Eigen::VectorXd;

enum class Regime { kHyperbolic, kFlat, kSpherical };

std::string to_string(Regime r);

/// Signed sectional curvature.
class Curvature {
 public:
  explicit Curvature(double k);

  double value() const noexcept { return k_; }
  double sqrt_abs() const noexcept { return sqrt_abs_; }
  Regime regime() const noexcept;
  bool is_flat() const noexcept { return k_ == 0.0; }

  friend bool operator==(const Curvature& a, const Curvature& b) noexcept { return a.k_ == b.k_; }

 private:
  double k_;
  double sqrt_abs_;
};

/// Circular functions for k > 0, hyperbolic for k < 0. Flat curvature is
/// rejected with RegimeError; callers take the analytic limit themselves.
namespace ktrig {
double sin_k(Curvature k, double u);
double cos_k(Curvature k, double u);
double tan_k(Curvature k, double u);
double asin_k(Curvature k, double u);
double acos_k(Curvature k, double u);
double atan_k(Curvature k, double u);
}  // namespace ktrig

/// Coordinates of a point in the projected space of curvature k.
///
/// For k < 0 the coordinates lie strictly inside the ball of radius
/// 1/sqrt(|k|); for k >= 0 any finite vector is admissible.
class ManifoldPoint {
 public:
  ManifoldPoint(Curvature k, Vec x);

  static ManifoldPoint origin(Curvature k, Eigen::Index dim);

  Curvature curvature() const noexcept { return k_; }
  const Vec& coords() const noexcept { return x_; }
  Eigen::Index dim() const noexcept { return x_.size(); }

 private:
  Curvature k_;
  Vec x_;
};

/// Tangent vector at `base`, expressed in projected-space coordinates. Its
/// metric norm is conformal_factor(base) * v.norm().
class TangentVector {
 public:
  TangentVector(ManifoldPoint base, Vec v);

  const ManifoldPoint& base() const noexcept { return base_; }
  const Vec& v() const noexcept { return v_; }
  double metric_norm() const;

 private:
  ManifoldPoint base_;
  Vec v_;
};

/// Point (xi, x) on the sphere xi^2 + |x|^2 = 1/k (k > 0) or the upper sheet
/// of the hyperboloid xi^2 - |x|^2 = 1/|k|, xi > 0 (k < 0).
class AmbientPoint {
 public:
  AmbientPoint(Curvature k, double xi, Vec x);

  Curvature curvature() const noexcept { return k_; }
  double xi() const noexcept { return xi_; }
  const Vec& x() const noexcept { return x_; }

 private:
  Curvature k_;
  double xi_;
  Vec x_;
};

ManifoldPoint mobius_add(const ManifoldPoint& x, const ManifoldPoint& y);
ManifoldPoint mobius_neg(const ManifoldPoint& x);
ManifoldPoint mobius_scalar(double t, const ManifoldPoint& v);
double conformal_factor(const ManifoldPoint& p);

/// 2/sqrt|k| * atan_k(sqrt|k| * |-x (+) y|); 2|y - x| when k = 0.
double gyro_distance(const ManifoldPoint& x, const ManifoldPoint& y);
/// Closed-form distance through acos_k of the cross ratio term.
double arc_distance(const ManifoldPoint& x, const ManifoldPoint& y);

ManifoldPoint stereo_project(const AmbientPoint& a);
AmbientPoint stereo_lift(const ManifoldPoint& z);

ManifoldPoint exp_map(const TangentVector& v);
ManifoldPoint exp_map(const ManifoldPoint& x, const Vec& v);
TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y);

/// (lambda_0 / lambda_p) * v, rebased at p.
TangentVector parallel_transport_from_origin(const ManifoldPoint& p, const Vec& v);

/// x (+) ((-x (+) y) (x) t); t is unrestricted.
ManifoldPoint geodesic(const ManifoldPoint& x, const ManifoldPoint& y, double t);

/// Angle at x between the geodesics towards y and z, in [0, pi].
double gyroangle(const ManifoldPoint& x, const ManifoldPoint& y, const ManifoldPoint& z);

struct KarcherOptions {
  double step = 1.0;
  int max_iterations = 200;
  double tolerance = 1e-10;
};

/// Raised when karcher_mean runs out of iterations; carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, ManifoldPoint last)
      : Error(what), last_(std::move(last)) {}
  const ManifoldPoint& last_iterate() const noexcept { return last_; }

 private:
  ManifoldPoint last_;
};

/// Weighted Karcher mean (gyrobarycenter) by Riemannian gradient descent.
ManifoldPoint karcher_mean(std::span<const ManifoldPoint> points, std::span<const double> weights,
                           const KarcherOptions& options = {});
ManifoldPoint karcher_mean(std::span<const ManifoldPoint> points,
                           const KarcherOptions& options = {});

// Unchecked coordinate kernel. These take the curvature as a plain double and
// skip invariant validation; they back the typed API above and the training
// code, which also needs their vector-Jacobian products.
namespace coords {

inline constexpr double kZeroNorm = 1e-15;
inline constexpr double kClampSlack = 1e-12;
inline constexpr double kBoundaryMargin = 1e-12;

/// tan_k(sqrt|k| u) / sqrt|k|, with limit u at k = 0.
double tan_c(double k, double u);
/// atan_k(sqrt|k| u) / sqrt|k|, with limit u at k = 0.
double atan_c(double k, double u);
/// asin_k(sqrt|k| u) / sqrt|k|, with limit u at k = 0.
double asin_c(double k, double u);
/// sin_k(sqrt|k| u) / sqrt|k|, with limit u at k = 0.
double sin_c(double k, double u);

double conformal(double k, const Vec& x);
/// Pulls points that rounding pushed onto or past the ball boundary back inside.
Vec project(double k, Vec x);

Vec mobius_add(double k, const Vec& x, const Vec& y);
Vec mobius_scalar(double k, double t, const Vec& v);
double distance(double k, const Vec& x, const Vec& y);
Vec exp_map(double k, const Vec& x, const Vec& v);
Vec log_map(double k, const Vec& x, const Vec& y);
Vec expmap0(double k, const Vec& v);
Vec logmap0(double k, const Vec& y);

struct PairGrad {
  Vec gx;
  Vec gy;
};

/// Gradients of <g, x (+) y> with respect to x and y.
PairGrad mobius_add_vjp(double k, const Vec& x, const Vec& y, const Vec& g);
/// Gradients of g * distance(x, y) with respect to x and y.
PairGrad distance_vjp(double k, const Vec& x, const Vec& y, double g);
/// Gradients of <g, exp_x(v)>; gx is w.r.t. the base point, gy w.r.t. v.
PairGrad exp_map_vjp(double k, const Vec& x, const Vec& v, const Vec& g);

}  // namespace coords

}  // namespace gyrolatent::geometry

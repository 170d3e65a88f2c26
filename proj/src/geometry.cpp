#include "gyrolatent/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gyrolatent::geometry {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

std::string describe(const char* branch, double k, double u) {
  std::ostringstream os;
  os.precision(17);
  os << branch << ": argument " << u << " outside the domain for k=" << k;
  return os.str();
}

void require_same_space(const ManifoldPoint& x, const ManifoldPoint& y, const char* op) {
  if (!(x.curvature() == y.curvature())) {
    throw ShapeError(std::string(op) + ": curvature mismatch");
  }
  if (x.dim() != y.dim()) {
    throw ShapeError(std::string(op) + ": dimension mismatch");
  }
}

// Clamp an inverse-trig argument to [lo, hi] if it is within kClampSlack of
// the interval, otherwise report the violation.
double clamp_arg(double u, double lo, double hi, const char* branch, double k) {
  if (u < lo) {
    if (u < lo - coords::kClampSlack) throw DomainError(describe(branch, k, u));
    return lo;
  }
  if (u > hi) {
    if (u > hi + coords::kClampSlack) throw DomainError(describe(branch, k, u));
    return hi;
  }
  return u;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kHyperbolic:
      return "hyperbolic";
    case Regime::kFlat:
      return "flat";
    case Regime::kSpherical:
      return "spherical";
  }
  return "unknown";
}

Curvature::Curvature(double k) : k_(k), sqrt_abs_(std::sqrt(std::abs(k))) {
  if (!std::isfinite(k)) throw DomainError("curvature must be finite");
}

Regime Curvature::regime() const noexcept {
  if (k_ < 0.0) return Regime::kHyperbolic;
  if (k_ > 0.0) return Regime::kSpherical;
  return Regime::kFlat;
}

namespace ktrig {

namespace {
void require_curved(Curvature k, const char* name) {
  if (k.is_flat()) throw RegimeError(std::string(name) + " is undefined for k=0");
}
}  // namespace

double sin_k(Curvature k, double u) {
  require_curved(k, "sin_k");
  return k.value() > 0 ? std::sin(u) : std::sinh(u);
}

double cos_k(Curvature k, double u) {
  require_curved(k, "cos_k");
  return k.value() > 0 ? std::cos(u) : std::cosh(u);
}

double tan_k(Curvature k, double u) {
  require_curved(k, "tan_k");
  return k.value() > 0 ? std::tan(u) : std::tanh(u);
}

double asin_k(Curvature k, double u) {
  require_curved(k, "asin_k");
  if (k.value() > 0) return std::asin(clamp_arg(u, -1.0, 1.0, "asin_k", k.value()));
  return std::asinh(u);
}

double acos_k(Curvature k, double u) {
  require_curved(k, "acos_k");
  if (k.value() > 0) return std::acos(clamp_arg(u, -1.0, 1.0, "acos_k", k.value()));
  return std::acosh(clamp_arg(u, 1.0, INFINITY, "acos_k", k.value()));
}

double atan_k(Curvature k, double u) {
  require_curved(k, "atan_k");
  if (k.value() > 0) return std::atan(u);
  if (!(std::abs(u) < 1.0)) throw DomainError(describe("atan_k", k.value(), u));
  return std::atanh(u);
}

}  // namespace ktrig

// ---------------------------------------------------------------------------
// Coordinate kernel

namespace coords {

double tan_c(double k, double u) {
  if (k == 0.0) return u;
  const double s = std::sqrt(std::abs(k));
  return (k > 0 ? std::tan(s * u) : std::tanh(s * u)) / s;
}

double atan_c(double k, double u) {
  if (k == 0.0) return u;
  const double s = std::sqrt(std::abs(k));
  if (k > 0) return std::atan(s * u) / s;
  const double arg = s * u;
  if (!(std::abs(arg) < 1.0)) throw DomainError(describe("atan_k", k, arg));
  return std::atanh(arg) / s;
}

double asin_c(double k, double u) {
  if (k == 0.0) return u;
  const double s = std::sqrt(std::abs(k));
  if (k > 0) return std::asin(clamp_arg(s * u, -1.0, 1.0, "asin_k", k)) / s;
  return std::asinh(s * u) / s;
}

double sin_c(double k, double u) {
  if (k == 0.0) return u;
  const double s = std::sqrt(std::abs(k));
  return (k > 0 ? std::sin(s * u) : std::sinh(s * u)) / s;
}

double conformal(double k, const Vec& x) { return 2.0 / (1.0 + k * x.squaredNorm()); }

Vec project(double k, Vec x) {
  if (k >= 0.0) return x;
  const double max_norm = (1.0 - kBoundaryMargin) / std::sqrt(-k);
  const double n = x.norm();
  if (n > max_norm) x *= max_norm / n;
  return x;
}

namespace {

// Inside the ball (k < 0) the denominator is bounded below by
// (1 - |k||x||y|)^2 > 0, so only k > 0 has a genuine antipodal singularity.
bool singular_denominator(double k, double den) { return k > 0.0 ? !(den > 1e-15) : !(den > 0.0); }

}  // namespace

Vec mobius_add(double k, const Vec& x, const Vec& y) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double den = 1.0 - 2.0 * k * xy + k * k * x2 * y2;
  if (singular_denominator(k, den)) {
    throw SingularityError("mobius_add: vanishing denominator (antipodal configuration)");
  }
  Vec out = ((1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y) / den;
  return project(k, std::move(out));
}

PairGrad mobius_add_vjp(double k, const Vec& x, const Vec& y, const Vec& g) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double a = 1.0 - 2.0 * k * xy - k * y2;
  const double b = 1.0 + k * x2;
  const double den = 1.0 - 2.0 * k * xy + k * k * x2 * y2;
  if (singular_denominator(k, den)) throw SingularityError("mobius_add_vjp: vanishing denominator");

  const Vec out = (a * x + b * y) / den;
  const double g_a = g.dot(x) / den;
  const double g_b = g.dot(y) / den;
  const double g_den = -g.dot(out) / den;

  PairGrad r;
  r.gx = (a / den) * g;
  r.gy = (b / den) * g;
  // a = 1 - 2k<x,y> - k|y|^2
  r.gx += g_a * (-2.0 * k) * y;
  r.gy += g_a * (-2.0 * k * x - 2.0 * k * y);
  // b = 1 + k|x|^2
  r.gx += g_b * (2.0 * k) * x;
  // den = 1 - 2k<x,y> + k^2 |x|^2 |y|^2
  r.gx += g_den * (-2.0 * k * y + 2.0 * k * k * y2 * x);
  r.gy += g_den * (-2.0 * k * x + 2.0 * k * k * x2 * y);
  return r;
}

Vec mobius_scalar(double k, double t, const Vec& v) {
  const double n = v.norm();
  if (n < kZeroNorm) return Vec::Zero(v.size());
  const double inner = t * atan_c(k, n);
  if (k > 0 && std::abs(std::sqrt(k) * inner) >= kHalfPi) {
    throw DomainError(describe("mobius_scalar tan_k", k, std::sqrt(k) * inner));
  }
  return project(k, (tan_c(k, inner) / n) * v);
}

double distance(double k, const Vec& x, const Vec& y) {
  const Vec w = mobius_add(k, -x, y);
  return 2.0 * atan_c(k, w.norm());
}

PairGrad distance_vjp(double k, const Vec& x, const Vec& y, double g) {
  const Vec neg_x = -x;
  const Vec w = mobius_add(k, neg_x, y);
  const double n = w.norm();
  PairGrad r{Vec::Zero(x.size()), Vec::Zero(y.size())};
  if (n < kZeroNorm) return r;
  const Vec gw = (g * 2.0 / (1.0 + k * n * n) / n) * w;
  PairGrad inner = mobius_add_vjp(k, neg_x, y, gw);
  r.gx = -inner.gx;
  r.gy = std::move(inner.gy);
  return r;
}

namespace {

// Scale c(n) = tan_c(k, lambda n / 2) / n applied to v in the exponential map,
// with derivatives dc/dn and dc/dlambda.
struct ExpScale {
  double c;
  double dc_dn;
  double dc_dlambda;
};

ExpScale exp_scale(double k, double lambda, double n) {
  const double s = 0.5 * lambda * n;
  if (k > 0 && std::sqrt(k) * s >= kHalfPi) {
    throw DomainError(describe("exp_map chart", k, std::sqrt(k) * s));
  }
  const double t = tan_c(k, s);
  const double dt = 1.0 + k * t * t;
  ExpScale e;
  e.c = t / n;
  e.dc_dlambda = 0.5 * dt;
  const double ks2 = k * s * s;
  if (std::abs(ks2) < 1e-4) {
    // Series of (dt * lambda / 2 - c) / n, which cancels for small s.
    const double h = 0.5 * lambda;
    e.dc_dn = h * h * (2.0 * k * s / 3.0 + 8.0 * k * k * s * s * s / 15.0 +
                       102.0 * k * k * k * s * s * s * s * s / 315.0);
  } else {
    e.dc_dn = (dt * 0.5 * lambda - e.c) / n;
  }
  return e;
}

}  // namespace

Vec exp_map(double k, const Vec& x, const Vec& v) {
  const double n = v.norm();
  if (n < kZeroNorm) return x;
  const ExpScale e = exp_scale(k, conformal(k, x), n);
  return mobius_add(k, x, e.c * v);
}

PairGrad exp_map_vjp(double k, const Vec& x, const Vec& v, const Vec& g) {
  const double n = v.norm();
  if (n < kZeroNorm) {
    // d exp_x(v) / dv is the identity at v = 0.
    return PairGrad{g, g};
  }
  const double lambda = conformal(k, x);
  const ExpScale e = exp_scale(k, lambda, n);
  const Vec w = e.c * v;
  PairGrad inner = mobius_add_vjp(k, x, w, g);
  const double g_c = inner.gy.dot(v);
  PairGrad r;
  r.gy = e.c * inner.gy + (g_c * e.dc_dn / n) * v;
  // lambda = 2 / (1 + k |x|^2)  =>  dlambda/dx = -k lambda^2 x
  r.gx = std::move(inner.gx) + (g_c * e.dc_dlambda * (-k * lambda * lambda)) * x;
  return r;
}

Vec log_map(double k, const Vec& x, const Vec& y) {
  const Vec w = mobius_add(k, -x, y);
  const double n = w.norm();
  if (n < kZeroNorm) return Vec::Zero(x.size());
  const double lambda = conformal(k, x);
  return (2.0 / lambda) * atan_c(k, n) / n * w;
}

Vec expmap0(double k, const Vec& v) { return exp_map(k, Vec::Zero(v.size()), v); }

Vec logmap0(double k, const Vec& y) {
  const double n = y.norm();
  if (n < kZeroNorm) return Vec::Zero(y.size());
  return (atan_c(k, n) / n) * y;
}

}  // namespace coords

// ---------------------------------------------------------------------------
// Typed API

ManifoldPoint::ManifoldPoint(Curvature k, Vec x) : k_(k), x_(std::move(x)) {
  if (x_.size() < 1) throw ShapeError("ManifoldPoint: dimension must be >= 1");
  if (!x_.allFinite()) throw DomainError("ManifoldPoint: non-finite coordinates");
  if (k_.value() < 0 && !(x_.squaredNorm() < -1.0 / k_.value())) {
    std::ostringstream os;
    os.precision(17);
    os << "ManifoldPoint: |x|^2=" << x_.squaredNorm() << " not inside ball of radius^2 "
       << -1.0 / k_.value();
    throw DomainError(os.str());
  }
}

ManifoldPoint ManifoldPoint::origin(Curvature k, Eigen::Index dim) {
  return ManifoldPoint(k, Vec::Zero(dim));
}

TangentVector::TangentVector(ManifoldPoint base, Vec v) : base_(std::move(base)), v_(std::move(v)) {
  if (v_.size() != base_.dim()) throw ShapeError("TangentVector: dimension does not match base");
  if (!v_.allFinite()) throw DomainError("TangentVector: non-finite components");
}

double TangentVector::metric_norm() const { return conformal_factor(base_) * v_.norm(); }

AmbientPoint::AmbientPoint(Curvature k, double xi, Vec x) : k_(k), xi_(xi), x_(std::move(x)) {
  if (k_.is_flat()) throw RegimeError("AmbientPoint: flat space has no ambient model");
  if (!std::isfinite(xi_) || !x_.allFinite()) throw DomainError("AmbientPoint: non-finite");
  const double r2 = 1.0 / std::abs(k_.value());
  const double x2 = x_.squaredNorm();
  const double lhs = k_.value() > 0 ? xi_ * xi_ + x2 : xi_ * xi_ - x2;
  const double scale = std::max(r2, xi_ * xi_ + x2);
  if (std::abs(lhs - r2) > 1e-9 * scale) {
    throw DomainError("AmbientPoint: not on the constant-curvature surface");
  }
  if (k_.value() < 0 && !(xi_ > 0)) throw DomainError("AmbientPoint: lower hyperboloid sheet");
}

ManifoldPoint mobius_add(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_space(x, y, "mobius_add");
  const double k = x.curvature().value();
  return ManifoldPoint(x.curvature(), coords::mobius_add(k, x.coords(), y.coords()));
}

ManifoldPoint mobius_neg(const ManifoldPoint& x) { return ManifoldPoint(x.curvature(), -x.coords()); }

ManifoldPoint mobius_scalar(double t, const ManifoldPoint& v) {
  return ManifoldPoint(v.curvature(), coords::mobius_scalar(v.curvature().value(), t, v.coords()));
}

double conformal_factor(const ManifoldPoint& p) {
  return coords::conformal(p.curvature().value(), p.coords());
}

double gyro_distance(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_space(x, y, "gyro_distance");
  return coords::distance(x.curvature().value(), x.coords(), y.coords());
}

double arc_distance(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_space(x, y, "arc_distance");
  const Curvature kc = x.curvature();
  const double k = kc.value();
  const double diff2 = (x.coords() - y.coords()).squaredNorm();
  if (kc.is_flat()) return 2.0 * std::sqrt(diff2);
  const double arg = 1.0 - 2.0 * k * diff2 /
                               ((1.0 + k * x.coords().squaredNorm()) *
                                (1.0 + k * y.coords().squaredNorm()));
  return ktrig::acos_k(kc, arg) / kc.sqrt_abs();
}

ManifoldPoint stereo_project(const AmbientPoint& a) {
  const double den = 1.0 + a.curvature().sqrt_abs() * a.xi();
  if (std::abs(den) < 1e-15) throw SingularityError("stereo_project: projection pole");
  return ManifoldPoint(a.curvature(), coords::project(a.curvature().value(), a.x() / den));
}

AmbientPoint stereo_lift(const ManifoldPoint& z) {
  const Curvature kc = z.curvature();
  if (kc.is_flat()) throw RegimeError("stereo_lift: flat space has no lift");
  const double k = kc.value();
  const double y2 = z.coords().squaredNorm();
  const double den = 1.0 + k * y2;
  const double xi = (1.0 - k * y2) / den / kc.sqrt_abs();
  return AmbientPoint(kc, xi, 2.0 * z.coords() / den);
}

ManifoldPoint exp_map(const TangentVector& v) { return exp_map(v.base(), v.v()); }

ManifoldPoint exp_map(const ManifoldPoint& x, const Vec& v) {
  if (v.size() != x.dim()) throw ShapeError("exp_map: dimension mismatch");
  return ManifoldPoint(x.curvature(), coords::exp_map(x.curvature().value(), x.coords(), v));
}

TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_space(x, y, "log_map");
  return TangentVector(x, coords::log_map(x.curvature().value(), x.coords(), y.coords()));
}

TangentVector parallel_transport_from_origin(const ManifoldPoint& p, const Vec& v) {
  if (v.size() != p.dim()) throw ShapeError("parallel_transport_from_origin: dimension mismatch");
  return TangentVector(p, (2.0 / conformal_factor(p)) * v);
}

ManifoldPoint geodesic(const ManifoldPoint& x, const ManifoldPoint& y, double t) {
  require_same_space(x, y, "geodesic");
  const double k = x.curvature().value();
  const Vec w = coords::mobius_add(k, -x.coords(), y.coords());
  return ManifoldPoint(x.curvature(),
                       coords::mobius_add(k, x.coords(), coords::mobius_scalar(k, t, w)));
}

double gyroangle(const ManifoldPoint& x, const ManifoldPoint& y, const ManifoldPoint& z) {
  require_same_space(x, y, "gyroangle");
  require_same_space(x, z, "gyroangle");
  const double k = x.curvature().value();
  const Vec u = coords::mobius_add(k, -x.coords(), y.coords());
  const Vec w = coords::mobius_add(k, -x.coords(), z.coords());
  const double nu = u.norm();
  const double nw = w.norm();
  if (nu < coords::kZeroNorm || nw < coords::kZeroNorm) {
    throw DegenerateError("gyroangle: vertex coincides with an endpoint");
  }
  const double c = std::clamp(u.dot(w) / (nu * nw), -1.0, 1.0);
  return std::acos(c);
}

ManifoldPoint karcher_mean(std::span<const ManifoldPoint> points, std::span<const double> weights,
                           const KarcherOptions& options) {
  if (points.empty()) throw EmptyInputError("karcher_mean: no points");
  if (weights.size() != points.size()) throw ShapeError("karcher_mean: weight count mismatch");
  const Curvature kc = points.front().curvature();
  const Eigen::Index d = points.front().dim();
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].curvature() == kc) || points[i].dim() != d) {
      throw ShapeError("karcher_mean: points live in different spaces");
    }
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw DomainError("karcher_mean: weights must be finite and nonnegative");
    }
    total += weights[i];
  }
  if (!(total > 0.0)) throw DomainError("karcher_mean: weights sum to zero");

  const double k = kc.value();
  // Start from the heaviest point: always inside the chart.
  std::size_t start = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (weights[i] > weights[start]) start = i;
  }
  Vec p = points[start].coords();
  for (int it = 0; it < options.max_iterations; ++it) {
    Vec direction = Vec::Zero(d);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (weights[i] == 0.0) continue;
      direction += weights[i] * coords::log_map(k, p, points[i].coords());
    }
    direction /= total;
    const Vec step = options.step * direction;
    const double step_norm = coords::conformal(k, p) * step.norm();
    p = coords::exp_map(k, p, step);
    if (step_norm <= options.tolerance) return ManifoldPoint(kc, p);
  }
  throw ConvergenceError("karcher_mean: no convergence within max_iterations",
                         ManifoldPoint(kc, p));
}

ManifoldPoint karcher_mean(std::span<const ManifoldPoint> points, const KarcherOptions& options) {
  const std::vector<double> w(points.size(), 1.0);
  return karcher_mean(points, w, options);
}

}  // namespace gyrolatent::geometry

#include "gyrolatent/gyroplane.hpp"

#include <algorithm>
#include <cmath>

namespace gyrolatent::gyroplane {

namespace {

void require_match(const ManifoldPoint& z, Curvature k, Eigen::Index d, const char* op) {
  if (!(z.curvature() == k)) throw ShapeError(std::string(op) + ": curvature mismatch");
  if (z.dim() != d) throw ShapeError(std::string(op) + ": dimension mismatch");
}

// Quantities shared by the feature and its gradient. With y = -p (+) z:
//   q = 2 <y, a> / ((1 + k |y|^2) |a|),   feature = |a| * asin_c(k, q).
struct FeatureParts {
  Vec y;
  double a_norm;
  double ya;
  double den;
  double q;
};

FeatureParts feature_parts(double k, const Vec& z, const Vec& p, const Vec& a) {
  FeatureParts f;
  f.y = geometry::coords::mobius_add(k, -p, z);
  f.a_norm = a.norm();
  if (!(f.a_norm > 0.0)) throw DegenerateError("gyroplane: orientation a is zero");
  f.ya = f.y.dot(a);
  f.den = 1.0 + k * f.y.squaredNorm();
  f.q = 2.0 * f.ya / (f.den * f.a_norm);
  return f;
}

}  // namespace

GyroHyperplane::GyroHyperplane(ManifoldPoint p, Vec a) : p_(std::move(p)), a_(std::move(a)) {
  if (a_.size() != p_.dim()) throw ShapeError("GyroHyperplane: dimension mismatch");
  if (!a_.allFinite()) throw DomainError("GyroHyperplane: non-finite orientation");
  if (!(a_.norm() > 0.0)) throw DegenerateError("GyroHyperplane: orientation a is zero");
}

GyroplaneLayer::GyroplaneLayer(Curvature k, Mat offsets, Mat orientations)
    : k_(k), offsets_(std::move(offsets)), orientations_(std::move(orientations)) {
  if (offsets_.rows() < 1) throw ShapeError("GyroplaneLayer: needs at least one hyperplane");
  if (offsets_.rows() != orientations_.rows() || offsets_.cols() != orientations_.cols()) {
    throw ShapeError("GyroplaneLayer: offsets and orientations disagree in shape");
  }
}

GyroHyperplane GyroplaneLayer::hyperplane(Eigen::Index j) const {
  return GyroHyperplane(ManifoldPoint(k_, offsets_.row(j).transpose()),
                        orientations_.row(j).transpose());
}

namespace coords {

double feature(double k, const Vec& z, const Vec& p, const Vec& a) {
  const FeatureParts f = feature_parts(k, z, p, a);
  return f.a_norm * geometry::coords::asin_c(k, f.q);
}

FeatureGrad feature_vjp(double k, const Vec& z, const Vec& p, const Vec& a, double upstream) {
  const Vec neg_p = -p;
  const FeatureParts f = feature_parts(k, z, p, a);
  const double asin_q = geometry::coords::asin_c(k, f.q);
  const double dasin = 1.0 / std::sqrt(std::max(1.0 - k * f.q * f.q, 1e-300));
  const double scale = 2.0 / (f.den * f.a_norm);

  const Vec dq_dy = scale * (a - (2.0 * k * f.ya / f.den) * f.y);
  const Vec dq_da = scale * (f.y - (f.ya / (f.a_norm * f.a_norm)) * a);

  FeatureGrad g;
  g.ga = upstream * ((asin_q / f.a_norm) * a + f.a_norm * dasin * dq_da);
  const Vec gy = (upstream * f.a_norm * dasin) * dq_dy;
  geometry::coords::PairGrad inner = geometry::coords::mobius_add_vjp(k, neg_p, z, gy);
  g.gz = std::move(inner.gy);
  g.gp = -inner.gx;
  return g;
}

}  // namespace coords

double hyperplane_distance(const ManifoldPoint& z, const GyroHyperplane& h) {
  require_match(z, h.offset().curvature(), h.offset().dim(), "hyperplane_distance");
  const double k = z.curvature().value();
  const FeatureParts f = feature_parts(k, z.coords(), h.offset().coords(), h.orientation());
  return geometry::coords::asin_c(k, std::abs(f.q));
}

double gyroplane_feature(const ManifoldPoint& z, const GyroHyperplane& h) {
  require_match(z, h.offset().curvature(), h.offset().dim(), "gyroplane_feature");
  return coords::feature(z.curvature().value(), z.coords(), h.offset().coords(), h.orientation());
}

Vec gyroplane_forward(const ManifoldPoint& z, const GyroplaneLayer& layer) {
  require_match(z, layer.curvature(), layer.dim(), "gyroplane_forward");
  const double k = layer.curvature().value();
  Vec out(layer.width());
  for (Eigen::Index j = 0; j < layer.width(); ++j) {
    out[j] = coords::feature(k, z.coords(), layer.offsets().row(j).transpose(),
                             layer.orientations().row(j).transpose());
  }
  return out;
}

GyroplaneGrads gyroplane_backward(const ManifoldPoint& z, const GyroplaneLayer& layer,
                                  const Vec& upstream) {
  require_match(z, layer.curvature(), layer.dim(), "gyroplane_backward");
  if (upstream.size() != layer.width()) throw ShapeError("gyroplane_backward: upstream width");
  if (!upstream.allFinite()) throw NumericError("gyroplane_backward: non-finite upstream");
  const double k = layer.curvature().value();
  GyroplaneGrads g{Vec::Zero(layer.dim()), Mat::Zero(layer.width(), layer.dim()),
                   Mat::Zero(layer.width(), layer.dim())};
  for (Eigen::Index j = 0; j < layer.width(); ++j) {
    if (upstream[j] == 0.0) continue;
    coords::FeatureGrad fg =
        coords::feature_vjp(k, z.coords(), layer.offsets().row(j).transpose(),
                            layer.orientations().row(j).transpose(), upstream[j]);
    g.grad_z += fg.gz;
    g.grad_a.row(j) = fg.ga.transpose();
    g.grad_p.row(j) = fg.gp.transpose();
  }
  return g;
}

}  // namespace gyrolatent::gyroplane

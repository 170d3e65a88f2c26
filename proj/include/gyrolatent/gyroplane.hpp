#pragma once

// Hyperplanes H_{a,p} = { z : <a, -p (+) z> = 0 } in projected spaces and the
// gyroplane layer, which maps a latent point to its signed, orientation-scaled
// distances to m such hyperplanes.

#include <Eigen/Core>

#include "gyrolatent/geometry.hpp"

namespace gyrolatent::gyroplane {

using geometry::Curvature;
using geometry::ManifoldPoint;
using geometry::Vec;
using Mat = Eigen::MatrixXd;

class GyroHyperplane {
 public:
  /// Throws DegenerateError if a = 0 and ShapeError if dimensions differ.
  GyroHyperplane(ManifoldPoint p, Vec a);

  const ManifoldPoint& offset() const noexcept { return p_; }
  const Vec& orientation() const noexcept { return a_; }

 private:
  ManifoldPoint p_;
  Vec a_;
};

/// m hyperplanes sharing curvature and dimension. Row j of offsets() is p_j and
/// row j of orientations() is a_j.
class GyroplaneLayer {
 public:
  GyroplaneLayer(Curvature k, Mat offsets, Mat orientations);

  Curvature curvature() const noexcept { return k_; }
  Eigen::Index width() const noexcept { return offsets_.rows(); }
  Eigen::Index dim() const noexcept { return offsets_.cols(); }
  const Mat& offsets() const noexcept { return offsets_; }
  const Mat& orientations() const noexcept { return orientations_; }
  GyroHyperplane hyperplane(Eigen::Index j) const;

 private:
  Curvature k_;
  Mat offsets_;
  Mat orientations_;
};

/// Geodesic distance from z to H. For k > 0 the argument of arcsin is checked
/// against [-1, 1] with a 1e-12 slack.
double hyperplane_distance(const ManifoldPoint& z, const GyroHyperplane& h);

/// sign(<-p (+) z, a>) * |a| * hyperplane_distance(z, H); 2<a, z - p> at k = 0.
double gyroplane_feature(const ManifoldPoint& z, const GyroHyperplane& h);

Vec gyroplane_forward(const ManifoldPoint& z, const GyroplaneLayer& layer);

struct GyroplaneGrads {
  Vec grad_z;
  Mat grad_a;  // m x d, row j = d/d a_j
  Mat grad_p;  // m x d, row j = d/d p_j
};

/// Coordinate gradients of sum_j upstream_j * feature_j.
GyroplaneGrads gyroplane_backward(const ManifoldPoint& z, const GyroplaneLayer& layer,
                                  const Vec& upstream);

namespace coords {
/// Unchecked feature for raw coordinates; the training loop's fast path.
double feature(double k, const Vec& z, const Vec& p, const Vec& a);
struct FeatureGrad {
  Vec gz;
  Vec gp;
  Vec ga;
};
/// upstream * d feature / d(z, p, a).
FeatureGrad feature_vjp(double k, const Vec& z, const Vec& p, const Vec& a, double upstream);
}  // namespace coords

}  // namespace gyrolatent::gyroplane

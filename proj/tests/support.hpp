#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Core>

namespace gyrolatent::testing {

using Vec = Eigen::VectorXd;

inline constexpr double kCurvatures[] = {-1.0, -0.1, 0.1, 1.0};

/// Uniform direction, radius uniform in [0, fraction * R) for k < 0 and in
/// [0, fraction / sqrt(k)) for k > 0 (the hemisphere around the origin).
inline Vec random_point(std::mt19937_64& gen, double k, Eigen::Index d, double fraction = 0.9) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(gen);
  v.normalize();
  const double scale = k == 0.0 ? 1.0 : 1.0 / std::sqrt(std::abs(k));
  return v * (fraction * scale * u(gen));
}

inline Vec random_normal(std::mt19937_64& gen, Eigen::Index d, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(gen);
  return v;
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f along coordinate i of x.
inline double central_diff(const std::function<double(const Vec&)>& f, Vec x, Eigen::Index i, double h = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// Largest relative error between an analytic gradient and central differences.
inline double max_grad_err(const std::function<double(const Vec&)>& f, const Vec& x, const Vec& grad,
                           double h = 1e-6, double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) worst = std::max(worst, rel_err(grad[i], central_diff(f, x, i, h), floor));
  return worst;
}

}  // namespace gyrolatent::testing

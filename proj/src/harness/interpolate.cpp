#include "gyrolatent/harness/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::harness {

namespace gc = geometry::coords;
using geometry::Vec;

std::string to_string(InterpMode m) { return m == InterpMode::kGeodesic ? "geodesic" : "linear"; }

InterpMode interp_mode_from_string(const std::string& s) {
  if (s == "geodesic") return InterpMode::kGeodesic;
  if (s == "linear") return InterpMode::kLinear;
  throw ConfigError("interpolation mode must be 'geodesic' or 'linear', got '" + s + "'");
}

namespace {
nn::Tensor as_batch(const nn::Tensor& x) {
  if (x.rank() == 2) return x.reshaped({1, 1, x.dim(0), x.dim(1)});
  if (x.rank() == 4 && x.dim(0) == 1 && x.dim(1) == 1) return x;
  throw ShapeError("interpolate_pair: expected [H, W] or [1, 1, H, W], got " + nn::shape_string(x.shape()));
}
}  // namespace

InterpolationPath interpolate_pair(spvae::SpVaeModel& model, const nn::Tensor& x_a, const nn::Tensor& x_b,
                                   std::size_t n, InterpMode mode) {
  if (n < 2) throw DomainError("interpolate_pair: need at least 2 points");
  const double k = model.curvature();
  const Vec za = spvae::posterior_means(model, as_batch(x_a)).row(0).transpose();
  const Vec zb = spvae::posterior_means(model, as_batch(x_b)).row(0).transpose();

  InterpolationPath path{mode, {}, {}, 0};
  const Vec w = gc::mobius_add(k, -za, zb);
  const double limit = k < 0.0 ? kLinearClampFraction / std::sqrt(-k) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec z;
    if (i == 0) {
      z = za;
    } else if (i + 1 == n) {
      z = zb;
    } else {
      const double t = static_cast<double>(i) / static_cast<double>(n - 1);
      if (mode == InterpMode::kGeodesic) {
        z = gc::mobius_add(k, za, gc::mobius_scalar(k, t, w));
      } else {
        z = (1.0 - t) * za + t * zb;
        if (k < 0.0 && z.norm() > limit) {
          z *= limit / z.norm();
          ++path.clamped;
        }
      }
    }
    path.latents.push_back(std::move(z));
  }
  // One point at a time, so each image matches a single-image reconstruction
  // bit for bit regardless of the batch kernels.
  const geometry::Curvature kk(k);
  for (std::size_t i = 0; i < n; ++i) {
    const nn::Tensor img = spvae::decode(model, geometry::ManifoldPoint(kk, path.latents[i]));
    if (i == 0) {
      nn::Shape s = img.shape();
      s[0] = n;
      path.images = nn::Tensor(s);
    }
    std::copy(img.data(), img.data() + img.size(), path.images.data() + i * img.size());
  }
  return path;
}

std::vector<GridPoint> score_grid(svdd::SvddModel& model, const GridBounds& b, std::size_t resolution) {
  if (model.config().latent_dim != 2) throw ConfigError("score_grid: latent space must be 2-dimensional");
  if (resolution < 2) throw ConfigError("score_grid: resolution must be >= 2");
  if (!(b.x_max > b.x_min && b.y_max > b.y_min)) throw ConfigError("score_grid: empty bounds");
  const double k = model.curvature();
  const Vec c = model.center().coords();
  std::vector<GridPoint> out;
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    const double y = b.y_min + (b.y_max - b.y_min) * static_cast<double>(iy) / static_cast<double>(resolution - 1);
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      const double x = b.x_min + (b.x_max - b.x_min) * static_cast<double>(ix) / static_cast<double>(resolution - 1);
      Vec z(2);
      z << x, y;
      if (k < 0.0 && !(z.squaredNorm() < -1.0 / k)) continue;
      out.push_back({x, y, gc::distance(k, z, c)});
    }
  }
  return out;
}

std::string grid_csv(const std::vector<GridPoint>& grid) {
  std::string s = "x,y,score\n";
  char buf[96];
  for (const auto& g : grid) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.x, g.y, g.score);
    s += buf;
  }
  return s;
}

}  // namespace gyrolatent::harness

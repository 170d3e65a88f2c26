#pragma once

#include <string>
#include <vector>

#include "gyrolatent/spvae.hpp"
#include "gyrolatent/svdd.hpp"

namespace gyrolatent::harness {

enum class InterpMode { kGeodesic, kLinear };
std::string to_string(InterpMode m);
InterpMode interp_mode_from_string(const std::string& s);

/// Radial clamp applied to linear-mode points that leave the ball, as a
/// fraction of the ball radius.
inline constexpr double kLinearClampFraction = 1.0 - 1e-6;
inline constexpr std::size_t kDefaultInterpolationSteps = 10;

struct InterpolationPath {
  InterpMode mode;
  std::vector<geometry::Vec> latents;  // n points, t = i / (n - 1)
  nn::Tensor images;                   // [n, 1, S, S]
  std::size_t clamped = 0;             // linear points pulled back into the ball
};

/// Decodes n points between the posterior means of x_a and x_b ([H, W] or
/// [1, 1, H, W] each). The first and last points are the means themselves.
InterpolationPath interpolate_pair(spvae::SpVaeModel& model, const nn::Tensor& x_a, const nn::Tensor& x_b,
                                   std::size_t n, InterpMode mode);

struct GridBounds {
  double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
};

struct GridPoint {
  double x, y, score;
};

/// SVDD scores on a resolution x resolution lattice over `bounds`; nodes
/// outside the ball (k < 0) are omitted. Requires a 2-D latent space
/// (ConfigError otherwise).
std::vector<GridPoint> score_grid(svdd::SvddModel& model, const GridBounds& bounds, std::size_t resolution);
std::string grid_csv(const std::vector<GridPoint>& grid);

}  // namespace gyrolatent::harness

#pragma once

// Wrapped Normal distributions on projected constant-curvature spaces.
//
// Convention: the reparameterization noise v0 ~ N(0, diag(sigma^2)) lives in an
// orthonormal frame of the tangent space at the origin, so its coordinate
// representation is v0 / lambda_0 = v0 / 2. A draw is
//
//   z = exp_mu( PT_{0 -> mu}(v0 / 2) ) = exp_mu( v0 / lambda_mu ),
//
// and gyro_distance(mu, z) = |v0|. Densities are with respect to the
// Riemannian volume element lambda_z^d dz.

#include <cstdint>
#include <random>

#include "gyrolatent/geometry.hpp"

namespace gyrolatent::dist {

using geometry::Curvature;
using geometry::ManifoldPoint;
using geometry::Vec;

/// Seeded 64-bit Mersenne Twister stream. Identical seeds give identical
/// streams; the draw counter is informational.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }

  double normal();
  double uniform();
  std::uint64_t next_u64();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  Vec normal_vector(Eigen::Index d);

  /// Independent child stream derived from this stream's seed and `stream`.
  SeededRng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

class WrappedNormal {
 public:
  WrappedNormal(ManifoldPoint mu, Vec sigma);

  const ManifoldPoint& mu() const noexcept { return mu_; }
  const Vec& sigma() const noexcept { return sigma_; }
  Curvature curvature() const noexcept { return mu_.curvature(); }
  Eigen::Index dim() const noexcept { return mu_.dim(); }

 private:
  ManifoldPoint mu_;
  Vec sigma_;
};

struct LatentPrior {
  Curvature k;
  Eigen::Index dim;
  double sigma0;

  LatentPrior(Curvature k_, Eigen::Index dim_, double sigma0_);
  WrappedNormal as_wrapped_normal() const;
};

struct WnDraw {
  ManifoldPoint z;
  Vec eps;  // standard normal noise
  Vec v0;   // sigma * eps, the tangent draw at the origin
  int retries = 0;
};

/// Reparameterized draw. For k > 0 draws that leave the chart of mu are
/// redrawn; after 100 redraws a NumericError is raised.
WnDraw wn_sample(const WrappedNormal& q, SeededRng& rng);

/// Deterministic part of the draw for given standard noise.
ManifoldPoint wn_reparam(const WrappedNormal& q, const Vec& eps);

double wn_log_prob(const WrappedNormal& q, const ManifoldPoint& z);
double prior_log_prob(const LatentPrior& prior, const ManifoldPoint& z);

struct KlEstimate {
  double estimate;
  double std_error;  // 0 when n = 1
};

/// Monte-Carlo KL(q || prior) over n draws from q.
KlEstimate kl_mc(const WrappedNormal& q, const LatentPrior& prior, std::size_t n, SeededRng& rng);

namespace coords {

inline constexpr int kMaxRedraws = 100;

/// log(sin_k(sqrt|k| r) / (sqrt|k| r)), 0 at k = 0.
double log_sinc(double k, double r);
/// d/dr of log_sinc.
double log_sinc_grad(double k, double r);

Vec reparam(double k, const Vec& mu, const Vec& sigma, const Vec& eps);

struct ReparamGrad {
  Vec g_mu;
  Vec g_sigma;
};
/// Gradients of <g_z, reparam(mu, sigma, eps)> w.r.t. mu and sigma.
ReparamGrad reparam_vjp(double k, const Vec& mu, const Vec& sigma, const Vec& eps, const Vec& g_z);

/// log q(z) for z = reparam(mu, sigma, eps), in closed form from eps.
double log_q_reparam(double k, const Vec& sigma, const Vec& eps);

/// Log-density of the origin-centred isotropic prior at z.
double prior_log_prob(double k, double sigma0, const Vec& z);
/// Gradient of prior_log_prob w.r.t. z.
Vec prior_log_prob_grad(double k, double sigma0, const Vec& z);

struct KlSample {
  double value;  // log q(z) - log p(z)
  Vec z;
  Vec g_mu;
  Vec g_sigma;
};
/// Single-draw KL term and its total derivative through the reparameterization.
KlSample kl_sample(double k, const Vec& mu, const Vec& sigma, double sigma0, const Vec& eps);

}  // namespace coords

}  // namespace gyrolatent::dist

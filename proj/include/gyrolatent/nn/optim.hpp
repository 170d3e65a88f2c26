#pragma once

#include <cstddef>
#include <vector>

#include "gyrolatent/nn/tape.hpp"

namespace gyrolatent::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over the trainable parameters it was given.
///
/// step() reads each parameter's grad. If any gradient is non-finite the step
/// is skipped, skipped_steps() is incremented and NumericError is thrown.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, AdamConfig config = {});
  virtual ~Adam() = default;

  void step();

  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::size_t step_count() const noexcept { return t_; }
  std::size_t skipped_steps() const noexcept { return skipped_; }
  const std::vector<Parameter*>& parameters() const noexcept { return params_; }
  const Tensor& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor& second_moment(std::size_t i) const { return v_.at(i); }

 protected:
  virtual void update(std::size_t i, double bias1, double bias2);
  void euclidean_update(std::size_t i, double bias1, double bias2);

  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
};

/// Adam on the conformal manifold for parameters carrying a curvature tag.
///
/// Each row of a tagged parameter is a point p. The coordinate gradient g is
/// rescaled to the Riemannian gradient g / lambda_p^2, the Adam direction is
/// formed from it, and the point moves to exp_p(-lr * direction). Steps that
/// leave the chart are halved up to 10 times before NumericError. The first
/// moment is transported to the new point through the origin, which for this
/// conformal metric multiplies it by lambda_p / lambda_new. Untagged
/// parameters follow plain Adam.
///
/// With curvature 0 (lambda = 2) the trajectory equals Adam with eps
/// replaced by 4 * eps.
class RiemannianAdam final : public Adam {
 public:
  explicit RiemannianAdam(std::vector<Parameter*> params, AdamConfig config = {});

  std::size_t halvings() const noexcept { return halvings_; }

 protected:
  void update(std::size_t i, double bias1, double bias2) override;

 private:
  std::size_t halvings_ = 0;
};

inline constexpr int kMaxStepHalvings = 10;

}  // namespace gyrolatent::nn

#pragma once

#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::nn {

inline constexpr double kProbClamp = 1e-7;

struct LossValue {
  double value;  // summed over elements of a sample, averaged over the batch
  Tensor grad;   // d value / d x_hat
};

/// Bernoulli negative log-likelihood with x_hat clamped to [1e-7, 1 - 1e-7].
/// Throws DomainError if any target lies outside [0, 1].
LossValue bernoulli_nll(const Tensor& x_hat, const Tensor& x);

/// Fixed-variance Gaussian negative log-likelihood without the constant term:
/// sum (x_hat - x)^2 / (2 variance), averaged over the batch.
LossValue gaussian_nll(const Tensor& x_hat, const Tensor& x, double variance = 1.0);

}  // namespace gyrolatent::nn

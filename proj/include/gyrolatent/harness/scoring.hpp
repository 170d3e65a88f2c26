#pragma once

#include <span>

#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::harness {

using nn::Tensor;

inline constexpr double kDefaultSigmaMultiplier = 1.5;

struct ThresholdStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  double tau = 0.0;    // mu + multiplier * sigma
  std::size_t pixels = 0;
};

/// Mean and standard deviation of every pixel error in the reference split.
ThresholdStats recon_threshold(std::span<const Tensor> errors, double multiplier = kDefaultSigmaMultiplier);

/// 1 where error > tau, 0 elsewhere. Throws DomainError for tau < 0.
Tensor localize(const Tensor& error, double tau);

/// Clears 4-connected components of a binary [H, W] mask with fewer than
/// min_area pixels. min_area <= 1 returns the mask unchanged.
Tensor remove_small_regions(const Tensor& mask, std::size_t min_area);

/// Per-image error maps [H, W] from a reconstruction batch [N, 1, H, W].
std::vector<Tensor> split_errors(const Tensor& batch_error);

}  // namespace gyrolatent::harness

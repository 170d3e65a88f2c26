#pragma once

// One-class anomaly detection in a latent space of constant curvature.
//
// An encoder phi maps an image to exp_0(e(x)); training pulls embeddings
// towards a fixed center c and the anomaly score is the geodesic distance
// d_k(phi(x), c). The encoder has no bias terms so the constant map is not a
// solution of the objective.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/distributions.hpp"
#include "gyrolatent/nn/layers.hpp"

namespace gyrolatent::svdd {

using dist::SeededRng;
using geometry::ManifoldPoint;
using nn::Tensor;

struct SvddConfig {
  double curvature = -1.0;
  std::size_t latent_dim = 2;
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t hidden_dim = 64;
  std::size_t image_size = 32;
  double leaky_slope = 0.01;
  std::size_t pretrain_epochs = 20;
  std::size_t finetune_epochs = 20;
  double lr = 1e-4;
  /// The learning rate drops by lr_decay from this epoch on (per phase).
  std::size_t lr_milestone = 250;
  double lr_decay = 0.1;
  double weight_decay = 5e-7;
  double percentile = 90.0;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SvddConfig from_json(const nlohmann::json& j);
};

class SvddModel {
 public:
  SvddModel(const SvddConfig& config, SeededRng& rng);
  /// Zero-initialized, for loading a checkpoint.
  explicit SvddModel(const SvddConfig& config);

  SvddModel(SvddModel&&) = default;
  SvddModel& operator=(SvddModel&&) = default;

  const SvddConfig& config() const noexcept { return config_; }
  double curvature() const noexcept { return config_.curvature; }
  nn::Sequential& encoder() { return encoder_; }

  bool has_center() const noexcept { return has_center_; }
  ManifoldPoint center() const;
  void set_center(const ManifoldPoint& c);
  std::optional<double> radius() const noexcept { return radius_; }
  void set_radius_value(double r);

  /// Encoder parameters followed by the center (a non-trainable buffer).
  std::vector<nn::Parameter*> parameters();
  nlohmann::json architecture() const { return encoder_.spec(); }

  /// Tangent vectors e(x) at the origin, N x d.
  Eigen::MatrixXd tangent(const Tensor& x, nn::GradientTape* tape);
  /// Embeddings exp_0(e(x)), N x d.
  Eigen::MatrixXd embed(const Tensor& x);

 private:
  void build();

  SvddConfig config_;
  nn::Sequential encoder_;
  nn::Parameter center_;
  bool has_center_ = false;
  std::optional<double> radius_;
};

/// Weight-decay term lambda * sum of squared decayed weights.
double weight_decay_term(const std::vector<nn::Parameter*>& params, double lambda);

struct PretrainResult {
  std::vector<double> losses;  // per epoch: mean reconstruction + weight decay
};

/// Trains encoder and a mirrored decoder as an autoencoder whose decoder reads
/// the origin tangent vector log_0(phi(x)) = e(x). The decoder is discarded.
PretrainResult pretrain_autoencoder(SvddModel& model, const Tensor& train, SeededRng& rng);

/// Uniform gyrobarycenter of the training embeddings (the arithmetic mean at
/// curvature 0). Stores and returns it.
ManifoldPoint init_center(SvddModel& model, const Tensor& train);

struct FinetuneEpoch {
  std::size_t epoch;
  double distance_term;  // mean squared geodesic distance to c over the training set
  double decay_term;     // weight_decay * sum |w|^2
  double total;
};

/// Minimizes mean d_k(phi(x), c)^2 + weight_decay * sum |w|^2 with c fixed.
/// Each row is evaluated on the full training set after the epoch.
std::vector<FinetuneEpoch> finetune(SvddModel& model, const Tensor& train, SeededRng& rng);

/// d_k(phi(x_i), c) for every sample.
std::vector<double> score(SvddModel& model, const Tensor& x);

/// Nearest-rank percentile: the ceil(q / 100 * N)-th smallest score. Stores it.
double set_radius(SvddModel& model, std::span<const double> scores, double percentile);
double nearest_rank(std::span<const double> scores, double percentile);

}  // namespace gyrolatent::svdd

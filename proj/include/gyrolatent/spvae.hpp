#pragma once

// Variational autoencoder with a latent space of constant curvature k.
//
//   x -> conv encoder -> dense head [e | s]
//     mu    = exp_0(e)                 (|e| clamped for k != 0)
//     sigma = softplus(s) + 1e-6
//     z ~ WrappedNormal(mu, sigma)
//   z -> gyroplane layer (m hyperplanes) -> dense / transposed-conv decoder -> sigmoid

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/distributions.hpp"
#include "gyrolatent/gyroplane.hpp"
#include "gyrolatent/nn/layers.hpp"
#include "gyrolatent/nn/optim.hpp"

namespace gyrolatent::spvae {

using dist::SeededRng;
using geometry::ManifoldPoint;
using nn::Tensor;

enum class Likelihood { kBernoulli, kGaussian };

struct SpVaeConfig {
  double curvature = -1.0;
  std::size_t latent_dim = 6;
  std::size_t hidden_dim = 400;
  std::size_t gyro_width = 128;
  std::vector<std::size_t> channels{16, 32, 64, 128};
  std::size_t image_size = 32;
  bool batchnorm = true;
  double leaky_slope = 0.01;
  double bn_momentum = 0.9;
  double sigma0 = 1.0;
  double beta0 = 0.01;
  double nu = 5.0;
  double kappa = 0.1;
  Likelihood likelihood = Likelihood::kBernoulli;
  double gaussian_variance = 0.01;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  std::size_t max_epochs = 300;
  std::size_t warmup_epochs = 150;
  std::size_t lookahead_epochs = 80;
  std::size_t n_mc_train = 1;
  std::size_t n_mc_eval = 16;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys raise ConfigError.
  static SpVaeConfig from_json(const nlohmann::json& j);
};

struct BetaState {
  double beta = 0.01;
  bool active = false;
  double nu = 5.0;
  double kappa = 0.1;
};

inline constexpr double kBetaMin = 1e-6;
inline constexpr double kBetaMax = 1e3;
inline constexpr double kSigmaFloor = 1e-6;
/// Fraction of the k > 0 chart radius pi / (2 sqrt k) the mean head may reach.
inline constexpr double kChartFraction = 0.99;
/// For k < 0 the mean head is clamped to |e| sqrt|k| <= 6, i.e. posterior means
/// within 1.2e-5 of the ball boundary at most.
inline constexpr double kMaxTangentNorm = 6.0;

/// Once the epoch-mean reconstruction error first reaches kappa^2, every call
/// multiplies beta by exp(nu * (C_hat - kappa^2)); before that beta is left
/// alone. The result is clamped to [1e-6, 1e3].
double beta_update(BetaState& state, double c_hat);

class SpVaeModel {
 public:
  /// Builds and randomly initializes the networks.
  SpVaeModel(const SpVaeConfig& config, SeededRng& rng);
  /// Builds the networks with zero parameters (for loading a checkpoint).
  explicit SpVaeModel(const SpVaeConfig& config);

  SpVaeModel(const SpVaeModel&) = delete;
  SpVaeModel& operator=(const SpVaeModel&) = delete;
  SpVaeModel(SpVaeModel&&) = default;
  SpVaeModel& operator=(SpVaeModel&&) = default;

  const SpVaeConfig& config() const noexcept { return config_; }
  double curvature() const noexcept { return config_.curvature; }
  nn::Sequential& encoder() { return encoder_; }
  nn::Sequential& decoder() { return decoder_; }
  /// m x d hyperplane offsets, tagged with the model curvature.
  nn::Parameter& offsets() { return offsets_; }
  /// m x d hyperplane orientations.
  nn::Parameter& orientations() { return orientations_; }
  gyroplane::GyroplaneLayer gyroplane() const;
  dist::LatentPrior prior() const;
  BetaState& beta_state() { return beta_; }
  const BetaState& beta_state() const { return beta_; }

  /// Encoder, gyroplane and decoder parameters in a fixed order.
  std::vector<nn::Parameter*> parameters();
  void set_training(bool on);
  std::size_t clamp_events() const noexcept { return clamp_events_; }

  nlohmann::json architecture() const;

  // Batched internals shared by encode/decode/elbo/fit.
  struct Posterior {
    Eigen::MatrixXd pre;    // N x d mean-head output before clamping
    Eigen::MatrixXd e;      // N x d after clamping
    Eigen::MatrixXd mu;     // N x d
    Eigen::MatrixXd s;      // N x d log-sigma head output
    Eigen::MatrixXd sigma;  // N x d
  };
  Posterior posterior(const Tensor& x, nn::GradientTape* tape);
  Tensor gyro_features(const Eigen::MatrixXd& z) const;
  Tensor decode_features(const Tensor& h, nn::GradientTape* tape);

 private:
  void build();

  SpVaeConfig config_;
  nn::Sequential encoder_;
  nn::Sequential decoder_;
  nn::Parameter offsets_;
  nn::Parameter orientations_;
  BetaState beta_;
  std::size_t clamp_events_ = 0;
};

/// Posterior per sample; x is [N, 1, S, S] in [0, 1]. Uses evaluation mode.
std::vector<dist::WrappedNormal> encode(SpVaeModel& model, const Tensor& x);

/// Decoded images [N, 1, S, S] for latent points. Uses evaluation mode.
Tensor decode(SpVaeModel& model, std::span<const ManifoldPoint> z);
Tensor decode(SpVaeModel& model, const ManifoldPoint& z);

struct ElboReport {
  double recon = 0.0;     // mean over draws and batch
  double recon_se = 0.0;
  double kl = 0.0;
  double kl_se = 0.0;
  double beta = 0.0;
  double total = 0.0;     // recon + beta * kl
  double total_se = 0.0;
  std::size_t epoch = 0;
};

/// Monte-Carlo ELBO terms in evaluation mode.
ElboReport elbo(SpVaeModel& model, const Tensor& x, std::size_t n_mc, SeededRng& rng);

struct StepStats {
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double pixel_se = 0.0;  // mean squared pixel error of the reconstruction
  std::size_t redraws = 0;
};

/// One stochastic forward/backward pass in training mode. Parameter
/// gradients are left in the parameters; no optimizer step is taken.
StepStats forward_backward(SpVaeModel& model, const Tensor& x, SeededRng& rng);

struct HistoryRow {
  std::size_t epoch;
  double recon;
  double kl;
  double beta;
  double total;
  double val_total;
};

struct FitResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
  bool aborted = false;
  std::string abort_reason;
};

/// Mini-batch training with Adam on Euclidean parameters and Riemannian Adam
/// on the hyperplane offsets. The model ends holding the parameters (and
/// beta state) of the best validation epoch; a NumericError ends training
/// early with aborted set. The validation set may be empty, in which case the
/// training loss is used.
FitResult fit(SpVaeModel& model, const Tensor& train, const Tensor& valid, SeededRng& rng);

std::string history_csv(const std::vector<HistoryRow>& rows);

struct Reconstruction {
  Tensor x_hat;  // [N, 1, S, S]
  Tensor error;  // (x - x_hat)^2, same shape
};

/// Decodes the posterior mean; deterministic.
Reconstruction reconstruct(SpVaeModel& model, const Tensor& x);

/// Posterior means as an N x d matrix (evaluation mode).
Eigen::MatrixXd posterior_means(SpVaeModel& model, const Tensor& x);

}  // namespace gyrolatent::spvae

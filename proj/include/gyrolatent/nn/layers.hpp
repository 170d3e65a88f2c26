#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/distributions.hpp"
#include "gyrolatent/nn/tape.hpp"
#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::nn {

using json = nlohmann::json;

/// A differentiable layer acting on batches. Shapes passed to output_shape()
/// exclude the leading batch dimension.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  /// When tape is non-null the layer records its backward closure.
  virtual Tensor forward(const Tensor& x, GradientTape* tape) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void set_training(bool) {}
  /// Hyperparameters needed to rebuild the layer (no parameter values).
  virtual json spec() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, std::string name = "dense", bool bias = true);
  void init(dist::SeededRng& rng, double fan_gain = 6.0);

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  std::vector<Parameter*> parameters() override;
  json spec() const override;

  Parameter& weight() { return weight_; }  // [out, in]
  Parameter& bias() { return bias_; }      // [out], fixed at zero when disabled

 private:
  std::size_t in_, out_;
  bool has_bias_;
  Parameter weight_, bias_;
};

/// Square-kernel convolution with symmetric zero padding kernel / 2.
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
         std::string name = "conv", bool bias = true);
  void init(dist::SeededRng& rng);

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  std::vector<Parameter*> parameters() override;
  json spec() const override;

  Parameter& weight() { return weight_; }  // [out, in, k, k]
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  Parameter weight_, bias_;
};

/// Adjoint of Conv2d with output padding stride - 1, so a stride-s layer
/// multiplies the spatial size by s.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                  std::string name = "deconv");
  void init(dist::SeededRng& rng);

  std::string kind() const override { return "conv_transpose2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  json spec() const override;

  Parameter& weight() { return weight_; }  // [in, out, k, k]
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
  Parameter weight_, bias_;
};

/// Per-channel batch normalization over [N, C] or [N, C, H, W] inputs.
/// Running statistics follow r = momentum * r + (1 - momentum) * batch and are
/// used in evaluation mode.
class BatchNorm final : public Layer {
 public:
  BatchNorm(std::size_t channels, double momentum = 0.9, double eps = 1e-5, std::string name = "bn");

  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  std::vector<Parameter*> parameters() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }
  void set_training(bool on) override { training_ = on; }
  json spec() const override;

 private:
  std::size_t channels_;
  double momentum_, eps_;
  bool training_ = true;
  Parameter gamma_, beta_, running_mean_, running_var_;
};

class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(double slope = 0.01) : slope_(slope) {}
  std::string kind() const override { return "leaky_relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  json spec() const override { return {{"kind", kind()}, {"slope", slope_}}; }

 private:
  double slope_;
};

class Sigmoid final : public Layer {
 public:
  std::string kind() const override { return "sigmoid"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  json spec() const override { return {{"kind", kind()}}; }
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override { return {numel(input)}; }
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  json spec() const override { return {{"kind", kind()}}; }
};

class Reshape final : public Layer {
 public:
  explicit Reshape(Shape target) : target_(std::move(target)) {}
  std::string kind() const override { return "reshape"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, GradientTape* tape) override;
  json spec() const override { return {{"kind", kind()}, {"shape", target_}}; }

 private:
  Shape target_;
};

/// Layer chain with a fixed per-sample input shape.
class Sequential {
 public:
  explicit Sequential(Shape input_shape) : input_shape_(std::move(input_shape)) {}

  /// Appends a layer; throws ShapeError if it cannot accept the current output.
  Layer& add(std::unique_ptr<Layer> layer);
  template <class L, class... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  Tensor forward(const Tensor& x, GradientTape* tape);
  std::vector<Parameter*> parameters();
  void set_training(bool on);

  const Shape& input_shape() const noexcept { return input_shape_; }
  Shape output_shape() const;
  std::size_t size() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

  json spec() const;
  /// Rebuilds a chain from spec(); parameters are zero until loaded.
  static Sequential from_spec(const json& j);

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> shapes_;  // output shape of each layer
};

}  // namespace gyrolatent::nn

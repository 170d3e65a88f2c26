#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::nn {

/// Trainable (or buffered) array with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Buffers such as batch-norm running statistics are not optimized.
  bool trainable = true;
  /// Set when each row of `value` is a point of the projected space with this
  /// curvature; Riemannian optimizers keep such rows on the manifold.
  std::optional<double> manifold_curvature;
  /// Whether L2 weight decay applies (weights yes, biases and offsets no).
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad = Tensor(value.shape()); }
};

/// Records the backward closures of a forward pass in execution order.
///
/// backward() replays them in exact reverse order, once. A second call
/// without a fresh forward pass raises StateError.
class GradientTape {
 public:
  using BackwardFn = std::function<Tensor(const Tensor& grad_out)>;

  void record(std::string label, BackwardFn fn, std::vector<Parameter*> params = {});

  /// Zeroes every registered parameter gradient, then propagates grad_out to
  /// the input of the first recorded operation and returns that gradient.
  Tensor backward(const Tensor& grad_out);

  std::size_t size() const noexcept { return entries_.size(); }
  bool consumed() const noexcept { return consumed_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<Parameter*>& parameters() const noexcept { return registry_; }

 private:
  struct Entry {
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  std::vector<std::string> labels_;
  std::vector<Parameter*> registry_;
  bool consumed_ = false;
};

}  // namespace gyrolatent::nn

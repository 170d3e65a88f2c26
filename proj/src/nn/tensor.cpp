#include "gyrolatent/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw ShapeError("reshape " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

MatrixMap Tensor::matrix() {
  const std::size_t rows = shape_.empty() ? 1 : shape_[0];
  const std::size_t cols = rows ? data_.size() / rows : 0;
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::matrix() const {
  const std::size_t rows = shape_.empty() ? 1 : shape_[0];
  const std::size_t cols = rows ? data_.size() / rows : 0;
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

Tensor Tensor::slice(std::size_t i) const {
  if (shape_.empty() || i >= shape_[0]) throw ShapeError("Tensor::slice: index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  const std::size_t n = numel(inner);
  return Tensor(std::move(inner), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(i * n),
                                                      data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) throw EmptyInputError("Tensor::stack: nothing to stack");
  Shape shape = items.front().shape();
  std::vector<double> data;
  data.reserve(items.size() * items.front().size());
  for (const Tensor& t : items) {
    if (t.shape() != shape) throw ShapeError("Tensor::stack: shapes differ");
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  shape.insert(shape.begin(), items.size());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace gyrolatent::nn

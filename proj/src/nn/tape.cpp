#include "gyrolatent/nn/tape.hpp"

#include <algorithm>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::nn {

void GradientTape::record(std::string label, BackwardFn fn, std::vector<Parameter*> params) {
  if (consumed_) throw StateError("GradientTape: recording onto a consumed tape");
  entries_.push_back(Entry{std::move(fn)});
  labels_.push_back(std::move(label));
  for (Parameter* p : params) {
    if (std::find(registry_.begin(), registry_.end(), p) == registry_.end()) registry_.push_back(p);
  }
}

Tensor GradientTape::backward(const Tensor& grad_out) {
  if (consumed_) throw StateError("GradientTape: backward called twice without a new forward pass");
  consumed_ = true;
  for (Parameter* p : registry_) p->zero_grad();
  Tensor g = grad_out;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) g = it->fn(g);
  return g;
}

}  // namespace gyrolatent::nn

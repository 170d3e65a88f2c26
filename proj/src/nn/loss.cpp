#include "gyrolatent/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::nn {

namespace {
void check_pair(const Tensor& x_hat, const Tensor& x, const char* who) {
  if (x_hat.shape() != x.shape()) {
    throw ShapeError(std::string(who) + ": prediction " + shape_string(x_hat.shape()) + " vs target " +
                     shape_string(x.shape()));
  }
  if (x.rank() == 0 || x.dim(0) == 0) throw EmptyInputError(std::string(who) + ": empty batch");
}
}  // namespace

LossValue bernoulli_nll(const Tensor& x_hat, const Tensor& x) {
  check_pair(x_hat, x, "bernoulli_nll");
  const double inv_n = 1.0 / static_cast<double>(x.dim(0));
  LossValue out{0.0, Tensor(x.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("bernoulli_nll: target outside [0, 1]");
    const double p = std::clamp(x_hat[i], kProbClamp, 1.0 - kProbClamp);
    total -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
    // The clamp is treated as transparent so saturated outputs still receive a signal.
    out.grad[i] = inv_n * (p - t) / (p * (1.0 - p));
  }
  out.value = total * inv_n;
  return out;
}

LossValue gaussian_nll(const Tensor& x_hat, const Tensor& x, double variance) {
  check_pair(x_hat, x, "gaussian_nll");
  if (!(variance > 0.0)) throw DomainError("gaussian_nll: variance must be > 0");
  const double inv_n = 1.0 / static_cast<double>(x.dim(0));
  LossValue out{0.0, Tensor(x.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x_hat[i] - x[i];
    total += 0.5 * r * r / variance;
    out.grad[i] = inv_n * r / variance;
  }
  out.value = total * inv_n;
  return out;
}

}  // namespace gyrolatent::nn

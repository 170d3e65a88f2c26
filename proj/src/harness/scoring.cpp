#include "gyrolatent/harness/scoring.hpp"

#include <cmath>
#include <vector>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::harness {

ThresholdStats recon_threshold(std::span<const Tensor> errors, double multiplier) {
  ThresholdStats s;
  double sum = 0.0;
  for (const Tensor& e : errors) {
    for (double v : e.values()) sum += v;
    s.pixels += e.size();
  }
  if (s.pixels == 0) throw EmptyInputError("recon_threshold: no pixel errors");
  s.mu = sum / static_cast<double>(s.pixels);
  double ss = 0.0;
  for (const Tensor& e : errors)
    for (double v : e.values()) ss += (v - s.mu) * (v - s.mu);
  s.sigma = std::sqrt(ss / static_cast<double>(s.pixels));
  s.tau = s.mu + multiplier * s.sigma;
  return s;
}

Tensor localize(const Tensor& error, double tau) {
  if (!(tau >= 0.0)) throw DomainError("localize: threshold must be >= 0");
  Tensor m(error.shape());
  for (std::size_t i = 0; i < error.size(); ++i) m[i] = error[i] > tau ? 1.0 : 0.0;
  return m;
}

Tensor remove_small_regions(const Tensor& mask, std::size_t min_area) {
  if (mask.rank() != 2) throw ShapeError("remove_small_regions: expected an [H, W] mask");
  if (min_area <= 1) return mask;
  const std::size_t H = mask.dim(0), W = mask.dim(1);
  Tensor out = mask;
  std::vector<int> seen(mask.size(), 0);
  std::vector<std::size_t> stack, comp;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (mask[start] <= 0.5 || seen[start]) continue;
    comp.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const std::size_t y = p / W, x = p % W;
      const std::size_t nb[4] = {y > 0 ? p - W : p, y + 1 < H ? p + W : p, x > 0 ? p - 1 : p, x + 1 < W ? p + 1 : p};
      for (std::size_t q : nb) {
        if (q != p && mask[q] > 0.5 && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (comp.size() < min_area)
      for (std::size_t p : comp) out[p] = 0.0;
  }
  return out;
}

std::vector<Tensor> split_errors(const Tensor& batch_error) {
  if (batch_error.rank() != 4 || batch_error.dim(1) != 1) {
    throw ShapeError("split_errors: expected [N, 1, H, W], got " + nn::shape_string(batch_error.shape()));
  }
  std::vector<Tensor> out;
  const std::size_t H = batch_error.dim(2), W = batch_error.dim(3);
  for (std::size_t i = 0; i < batch_error.dim(0); ++i) out.push_back(batch_error.slice(i).reshaped({H, W}));
  return out;
}

}  // namespace gyrolatent::harness

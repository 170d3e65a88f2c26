#include "gyrolatent/harness/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::harness {

Prf prf(const Counts& c) {
  Prf r;
  const double tp = static_cast<double>(c.tp);
  r.precision = c.tp + c.fp > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.iou = c.tp + c.fp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fp + c.fn) : 1.0;
  return r;
}

namespace {
Counts count_pixels(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("mask shapes differ: " + nn::shape_string(pred.shape()) + " vs " + nn::shape_string(truth.shape()));
  }
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] > 0.5, t = truth[i] > 0.5;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

void add(Counts& a, const Counts& b) {
  a.tp += b.tp;
  a.fp += b.fp;
  a.fn += b.fn;
  a.tn += b.tn;
}
}  // namespace

double mask_iou(std::span<const Tensor> predicted, std::span<const Tensor> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("mask_iou: mask counts differ");
  Counts total;
  for (std::size_t i = 0; i < predicted.size(); ++i) add(total, count_pixels(predicted[i], truth[i]));
  return prf(total).iou;
}

AnomalyReport eval_metrics(std::span<const Tensor> errors, const ImageSet& truth, const ThresholdStats& threshold,
                           const EvalOptions& options) {
  if (errors.size() != truth.size()) {
    throw ShapeError("eval_metrics: " + std::to_string(errors.size()) + " error maps for " +
                     std::to_string(truth.size()) + " images");
  }
  AnomalyReport r;
  r.threshold = threshold;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].shape() != truth.images[i].shape()) {
      throw ShapeError("eval_metrics: error map " + nn::shape_string(errors[i].shape()) + " vs image " +
                       nn::shape_string(truth.images[i].shape()) + " for " + truth.ids[i]);
    }
    Tensor m = remove_small_regions(localize(errors[i], threshold.tau), options.min_region);
    double area = 0.0;
    for (double v : m.values()) area += v;
    const bool flag = area > 0.0;
    flagged += flag;
    r.image_scores.push_back(area / static_cast<double>(m.size()));
    r.image_flags.push_back(flag);
    const Label l = truth.labels[i];
    if (l != Label::kUnknown) {
      const bool pos = l == Label::kAnomalous;
      if (flag && pos) ++r.image_counts.tp;
      else if (flag) ++r.image_counts.fp;
      else if (pos) ++r.image_counts.fn;
      else ++r.image_counts.tn;
      if (pos) {
        const Tensor gt = truth.masks[i] ? *truth.masks[i] : Tensor(m.shape(), 1.0);
        add(r.pixel_counts, count_pixels(m, gt));
      }
    }
    r.masks.push_back(std::move(m));
  }
  r.image = prf(r.image_counts);
  r.pixel = prf(r.pixel_counts);
  r.flag_rate = errors.empty() ? 0.0 : static_cast<double>(flagged) / static_cast<double>(errors.size());
  return r;
}

nlohmann::json AnomalyReport::summary() const {
  auto block = [](const Prf& p, const Counts& c) {
    return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},   {"iou", p.iou},
                          {"tp", c.tp},               {"fp", c.fp},         {"fn", c.fn},   {"tn", c.tn}};
  };
  return {{"tau", threshold.tau},
          {"mu_rec", threshold.mu},
          {"sigma_rec", threshold.sigma},
          {"reference_pixels", threshold.pixels},
          {"flag_rate", flag_rate},
          {"image_level", block(image, image_counts)},
          {"pixel_level", block(pixel, pixel_counts)}};
}

double roc_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ShapeError("roc_auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks for ties.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (positive[idx[t]]) {
        rank_sum += avg;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("roc_auc: need both classes");
  const double np = static_cast<double>(n_pos), nn_ = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn_);
}

}  // namespace gyrolatent::harness

#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/harness/image_set.hpp"
#include "gyrolatent/harness/scoring.hpp"

namespace gyrolatent::harness {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct Prf {
  double precision = 0.0;  // 0 when nothing is predicted positive
  double recall = 0.0;     // 0 when nothing is actually positive
  double f1 = 0.0;         // harmonic mean, 0 when precision + recall = 0
  double iou = 0.0;        // tp / (tp + fp + fn), 1 when all three are 0
};

Prf prf(const Counts& c);

/// Micro-averaged intersection over union of binary masks; 1 when both
/// unions are empty.
double mask_iou(std::span<const Tensor> predicted, std::span<const Tensor> truth);

struct EvalOptions {
  /// Localized regions smaller than this many pixels are discarded.
  std::size_t min_region = 1;
};

struct AnomalyReport {
  ThresholdStats threshold;
  std::vector<double> image_scores;  // flagged-pixel fraction after region filtering
  std::vector<bool> image_flags;     // flagged iff the filtered mask is non-empty
  std::vector<Tensor> masks;         // filtered localization masks
  Counts image_counts;
  Prf image;
  Counts pixel_counts;               // over the anomalous subset
  Prf pixel;                         // pixel.iou is the micro IoU on the anomalous subset
  double flag_rate = 0.0;            // fraction of all images flagged

  nlohmann::json summary() const;
};

/// Localizes every error map at threshold.tau and scores it against the
/// labels and masks of `truth`. Images with unknown labels count towards
/// neither image-level nor pixel-level metrics.
AnomalyReport eval_metrics(std::span<const Tensor> errors, const ImageSet& truth, const ThresholdStats& threshold,
                           const EvalOptions& options = {});

/// Area under the ROC curve of scores for a binary labelling (ties count
/// one half). Throws DegenerateError if either class is empty.
double roc_auc(std::span<const double> scores, std::span<const bool> positive);

}  // namespace gyrolatent::harness

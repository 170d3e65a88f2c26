#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/distributions.hpp"
#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::harness {

using nn::Tensor;

enum class Label { kNormal, kAnomalous, kUnknown };
std::string to_string(Label l);
Label label_from_string(const std::string& s);

/// Grayscale images [H, W] in [0, 1] with optional binary masks and labels.
struct ImageSet {
  std::vector<std::string> ids;
  std::vector<Tensor> images;
  std::vector<std::optional<Tensor>> masks;
  std::vector<Label> labels;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const noexcept { return images.size(); }
  void push(std::string id, Tensor image, std::optional<Tensor> mask, Label label);

  /// Throws ShapeError / IngestError when the invariants do not hold: masks
  /// match their image's shape, and a labelled image is anomalous exactly
  /// when its mask is non-empty.
  void validate() const;

  std::vector<std::size_t> indices(Label l) const;
  ImageSet subset(const std::vector<std::size_t>& idx) const;
  /// Stacks the selected images into an [N, 1, H, W] batch.
  Tensor batch(const std::vector<std::size_t>& idx) const;
  Tensor batch() const;
};

/// Non-overlapping tiles of one source image; residual borders are dropped.
struct PatchGrid {
  std::string source;
  std::size_t tile = 128;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// (top, left) corner of each tile in row-major order.
  std::vector<std::pair<std::size_t, std::size_t>> corners;
};

struct LoadedImages {
  ImageSet set;
  std::vector<PatchGrid> grids;
};

/// Every *.png in `dir` (lexicographic order) cut into tile x tile patches.
LoadedImages load_image_dir(const std::filesystem::path& dir, std::size_t tile = 128);

/// Reads a directory written by write_dataset (index.json with labels and
/// masks). Without an index, falls back to load_image_dir with tiles of the
/// full image size of the first file and unknown labels.
ImageSet load_dataset(const std::filesystem::path& dir);

/// Writes images/, masks/ and index.json. Returns the written file names.
std::vector<std::string> write_dataset(const std::filesystem::path& dir, const ImageSet& set);

/// Keeps every normal image and round(ratio * |normal|) anomalies chosen
/// uniformly without replacement. If fewer anomalies exist all are kept and
/// `warning` (when given) is filled in. Order of the source set is preserved.
ImageSet subsample_anomalies(const ImageSet& set, double ratio, dist::SeededRng& rng,
                             std::string* warning = nullptr);

/// Seeded random permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, dist::SeededRng& rng);

}  // namespace gyrolatent::harness

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/distributions.hpp"
#include "gyrolatent/harness/image_set.hpp"

namespace gyrolatent::harness {

/// Procedural texture dataset with planted defects.
///
/// Normal images draw their texture uniformly from `textures`, each with a
/// random phase, frequency, orientation, contrast and mean level. Anomalous
/// images use `anomaly_texture` when it is set (the whole image is then the
/// ground-truth region) and otherwise a normal texture; a defect of kind
/// `defect` covering a [min_defect_area, max_defect_area] fraction of pixels
/// is painted on top unless `defect` is "none".
struct SyntheticSpec {
  std::size_t n_normal = 100;
  std::size_t n_anomalous = 10;
  std::size_t size = 32;
  std::vector<std::string> textures{"stripes"};  // stripes | grid | blobs
  std::string anomaly_texture;                   // empty: same family as normals
  std::string defect = "blot";                   // scratch | hole | blot | mixed | none
  double defect_intensity = 0.8;                 // blend weight towards black or white
  double min_defect_area = 0.01;
  double max_defect_area = 0.10;
  double contrast = 0.2;
  std::uint64_t seed = 7;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Accepts "texture" as a string or list; unknown keys raise ConfigError.
  static SyntheticSpec from_json(const nlohmann::json& j);
};

/// Normals first, then anomalies. Deterministic for a given rng state.
ImageSet gen_synthetic(const SyntheticSpec& spec, dist::SeededRng& rng);

}  // namespace gyrolatent::harness

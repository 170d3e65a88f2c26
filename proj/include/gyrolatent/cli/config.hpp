#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gyrolatent/harness/interpolate.hpp"
#include "gyrolatent/harness/synthetic.hpp"
#include "gyrolatent/spvae.hpp"
#include "gyrolatent/svdd.hpp"

namespace gyrolatent::cli {

struct DatasetSource {
  std::string dir;                                  // PNG directory or dataset written by `gen`
  std::optional<harness::SyntheticSpec> synthetic;  // generated in memory when set
};

struct Splits {
  double val_fraction = 0.1;   // of normal images
  double test_fraction = 0.1;  // of normal images; all anomalies go to test
  std::string stats_split = "val";   // reference split for mu_rec / sigma_rec: val | test
  std::string radius_split = "val";  // split for the SVDD radius: val | test
  std::optional<double> anomaly_ratio;  // subsample anomalies to ratio * |normal|
};

struct ScoreOptions {
  double sigma_multiplier = 1.5;
  std::size_t min_region = 1;
  std::string error = "squared";  // squared | bernoulli
};

struct InterpolateOptions {
  std::string image_a;
  std::string image_b;
  std::size_t n = harness::kDefaultInterpolationSteps;
  std::string mode = "both";  // geodesic | linear | both
};

struct GridOptions {
  bool emit = true;
  std::size_t resolution = 101;
  std::optional<harness::GridBounds> bounds;  // default: the ball, or [-3, 3]^2
};

/// A complete, validated run description. Unknown keys anywhere raise
/// ConfigError; top-level "curvature" and "latent_dim" apply to both models.
struct RunConfig {
  std::string task;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string checkpoint;
  DatasetSource dataset;
  Splits splits;
  spvae::SpVaeConfig spvae;
  svdd::SvddConfig svdd;
  ScoreOptions score;
  InterpolateOptions interpolate;
  GridOptions grid;

  void validate() const;
  /// Resolved form: every default spelled out, model seeds equal to `seed`.
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Canonical serialization used for hashing (two-space indent, sorted keys).
std::string canonical_dump(const nlohmann::json& j);
/// git blob hash of the canonical resolved config without output_dir, so the
/// same experiment written to two places hashes the same.
std::string config_hash(const RunConfig& c);

nlohmann::json read_json_file(const std::string& path);

}  // namespace gyrolatent::cli

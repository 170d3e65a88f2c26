#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/cli/config.hpp"
#include "gyrolatent/harness/image_set.hpp"
#include "gyrolatent/harness/metrics.hpp"

namespace gyrolatent::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumeric = 4 };

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Exclusive lock on an output directory, held through a `.lock` file created
/// with O_EXCL and removed on destruction.
class OutputLock {
 public:
  explicit OutputLock(const std::string& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

/// Images of the configured source with anomalies subsampled when requested.
harness::ImageSet load_source(const RunConfig& c);

struct DataSplits {
  harness::ImageSet train;  // normal (or unlabelled) images only
  harness::ImageSet val;    // normal (or unlabelled) images only
  harness::ImageSet test;   // held-out normals followed by every anomaly, source order
};

/// Seeded split of the normal images into train / val / test fractions;
/// anomalous images all go to test.
DataSplits make_splits(const harness::ImageSet& all, const Splits& s, std::uint64_t seed);

/// Per-image error maps [H, W] of a dataset under the model.
std::vector<nn::Tensor> error_maps(spvae::SpVaeModel& model, const harness::ImageSet& set, const std::string& kind);

/// Threshold from `reference` errors, then localization and metrics on `test`.
harness::AnomalyReport score_vae(spvae::SpVaeModel& model, const harness::ImageSet& reference,
                                 const harness::ImageSet& test, const ScoreOptions& options);

struct RunSummary {
  int exit_code = kExitOk;
  std::string config_hash;
  nlohmann::json metrics = nlohmann::json::object();
};

/// Locks the output directory, writes config.resolved.json and config.hash,
/// then runs the task. Errors propagate.
RunSummary run_task(const RunConfig& c);

/// Command-line entry point; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace gyrolatent::cli

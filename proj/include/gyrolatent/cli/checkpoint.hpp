#pragma once

// Checkpoint directory layout:
//   manifest.json  model kind, config, architecture, curvature, parameter
//                  manifest, model state, metrics, size and SHA-1 of params.bin
//   params.bin     parameter values as little-endian float64, manifest order

#include <string>

#include <nlohmann/json.hpp>

#include "gyrolatent/spvae.hpp"
#include "gyrolatent/svdd.hpp"

namespace gyrolatent::cli {

inline constexpr const char* kCheckpointFormat = "gyrolatent-checkpoint";
inline constexpr int kCheckpointVersion = 1;

void save_spvae(const std::string& dir, spvae::SpVaeModel& model, const nlohmann::json& metrics);
spvae::SpVaeModel load_spvae(const std::string& dir);

void save_svdd(const std::string& dir, svdd::SvddModel& model, const nlohmann::json& metrics);
svdd::SvddModel load_svdd(const std::string& dir);

/// Manifest only, after checking params.bin against the recorded size and hash.
nlohmann::json read_manifest(const std::string& dir);
/// "spvae" or "svdd".
std::string checkpoint_kind(const std::string& dir);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace gyrolatent::cli

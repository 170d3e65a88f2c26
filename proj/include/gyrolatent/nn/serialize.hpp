#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gyrolatent/nn/tape.hpp"

namespace gyrolatent::nn {

/// One entry per parameter: name, shape, element offset into the blob,
/// trainable flag and curvature tag (null when Euclidean).
nlohmann::json parameter_manifest(const std::vector<Parameter*>& params);

/// Concatenated parameter values as little-endian IEEE-754 doubles.
std::string encode_parameters(const std::vector<Parameter*>& params);

/// Inverse of encode_parameters. Names, shapes and the blob length must match
/// the manifest exactly (IngestError otherwise).
void decode_parameters(std::string_view blob, const nlohmann::json& manifest,
                       const std::vector<Parameter*>& params);

}  // namespace gyrolatent::nn

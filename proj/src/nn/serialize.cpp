#include "gyrolatent/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::nn {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace

nlohmann::json parameter_manifest(const std::vector<Parameter*>& params) {
  nlohmann::json out = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    nlohmann::json e = {{"name", p->name},
                        {"shape", p->value.shape()},
                        {"offset", offset},
                        {"trainable", p->trainable},
                        {"curvature", nullptr}};
    if (p->manifold_curvature) e["curvature"] = *p->manifold_curvature;
    out.push_back(std::move(e));
    offset += p->value.size();
  }
  return out;
}

std::string encode_parameters(const std::vector<Parameter*>& params) {
  std::string blob;
  for (const Parameter* p : params) {
    for (double v : p->value.values()) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      blob.append(buf, 8);
    }
  }
  return blob;
}

void decode_parameters(std::string_view blob, const nlohmann::json& manifest,
                       const std::vector<Parameter*>& params) {
  if (!manifest.is_array() || manifest.size() != params.size()) {
    throw IngestError("parameter manifest lists " + std::to_string(manifest.is_array() ? manifest.size() : 0) +
                      " entries, model has " + std::to_string(params.size()));
  }
  std::size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  if (blob.size() != total * 8) {
    throw IngestError("parameter blob has " + std::to_string(blob.size()) + " bytes, expected " +
                      std::to_string(total * 8));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto& e = manifest[i];
    if (e.at("name").get<std::string>() != p.name || e.at("shape").get<Shape>() != p.value.shape()) {
      throw IngestError("parameter " + std::to_string(i) + " mismatch: manifest has " +
                        e.at("name").get<std::string>() + ", model has " + p.name);
    }
    const std::size_t offset = e.at("offset").get<std::size_t>();
    if ((offset + p.value.size()) * 8 > blob.size()) throw IngestError("parameter offset out of range");
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      std::uint64_t bits;
      std::memcpy(&bits, blob.data() + (offset + j) * 8, 8);
      p.value[j] = std::bit_cast<double>(to_little(bits));
    }
  }
}

}  // namespace gyrolatent::nn

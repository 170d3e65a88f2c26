#include "gyrolatent/cli/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gyrolatent/cli/config.hpp"
#include "gyrolatent/errors.hpp"
#include "gyrolatent/hash.hpp"
#include "gyrolatent/nn/serialize.hpp"

namespace gyrolatent::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

namespace {

void write_checkpoint(const std::string& dir, json manifest, const std::vector<nn::Parameter*>& params) {
  const std::string blob = nn::encode_parameters(params);
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["parameters"] = nn::parameter_manifest(params);
  manifest["params_bytes"] = blob.size();
  manifest["params_sha1"] = sha1_hex(blob);
  fs::create_directories(dir);
  write_file((fs::path(dir) / "params.bin").string(), blob);
  write_file((fs::path(dir) / "manifest.json").string(), canonical_dump(manifest));
}

struct Loaded {
  json manifest;
  std::string blob;
};

Loaded read_checkpoint(const std::string& dir) {
  Loaded l;
  try {
    l.manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw IngestError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  if (l.manifest.value("format", std::string()) != kCheckpointFormat) throw IngestError("not a checkpoint: " + dir);
  if (l.manifest.value("version", 0) != kCheckpointVersion) throw IngestError("unsupported checkpoint version");
  l.blob = read_file((fs::path(dir) / "params.bin").string());
  if (l.blob.size() != l.manifest.value("params_bytes", std::size_t{0})) {
    throw IngestError("params.bin size does not match the manifest");
  }
  if (sha1_hex(l.blob) != l.manifest.value("params_sha1", std::string())) {
    throw IngestError("params.bin hash does not match the manifest");
  }
  return l;
}

void expect_kind(const json& m, const char* kind) {
  if (m.value("model", std::string()) != kind) {
    throw IngestError(std::string("checkpoint holds a '") + m.value("model", std::string("?")) + "' model, expected " + kind);
  }
}

}  // namespace

json read_manifest(const std::string& dir) { return read_checkpoint(dir).manifest; }

std::string checkpoint_kind(const std::string& dir) { return read_manifest(dir).value("model", std::string()); }

void save_spvae(const std::string& dir, spvae::SpVaeModel& model, const json& metrics) {
  const spvae::BetaState& b = model.beta_state();
  json m = {{"model", "spvae"},
            {"config", model.config().to_json()},
            {"architecture", model.architecture()},
            {"curvature", model.curvature()},
            {"state", {{"beta", b.beta}, {"beta_active", b.active}}},
            {"metrics", metrics}};
  write_checkpoint(dir, std::move(m), model.parameters());
}

spvae::SpVaeModel load_spvae(const std::string& dir) {
  const Loaded l = read_checkpoint(dir);
  expect_kind(l.manifest, "spvae");
  spvae::SpVaeModel model(spvae::SpVaeConfig::from_json(l.manifest.at("config")));
  nn::decode_parameters(l.blob, l.manifest.at("parameters"), model.parameters());
  const json& s = l.manifest.at("state");
  model.beta_state().beta = s.at("beta").get<double>();
  model.beta_state().active = s.at("beta_active").get<bool>();
  return model;
}

void save_svdd(const std::string& dir, svdd::SvddModel& model, const json& metrics) {
  json state = {{"has_center", model.has_center()}, {"radius", nullptr}};
  if (model.radius()) state["radius"] = *model.radius();
  json m = {{"model", "svdd"},
            {"config", model.config().to_json()},
            {"architecture", model.architecture()},
            {"curvature", model.curvature()},
            {"state", state},
            {"metrics", metrics}};
  write_checkpoint(dir, std::move(m), model.parameters());
}

svdd::SvddModel load_svdd(const std::string& dir) {
  const Loaded l = read_checkpoint(dir);
  expect_kind(l.manifest, "svdd");
  svdd::SvddModel model(svdd::SvddConfig::from_json(l.manifest.at("config")));
  auto params = model.parameters();
  nn::decode_parameters(l.blob, l.manifest.at("parameters"), params);
  const json& s = l.manifest.at("state");
  if (s.at("has_center").get<bool>()) {
    const nn::Parameter* c = params.back();
    geometry::Vec v(static_cast<Eigen::Index>(c->value.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = c->value[static_cast<std::size_t>(i)];
    model.set_center(geometry::ManifoldPoint(geometry::Curvature(model.curvature()), v));
  }
  if (!s.at("radius").is_null()) model.set_radius_value(s.at("radius").get<double>());
  return model;
}

}  // namespace gyrolatent::cli

#include "gyrolatent/cli/config.hpp"

#include <fstream>
#include <set>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/hash.hpp"

namespace gyrolatent::cli {

using json = nlohmann::json;

namespace {

const std::set<std::string> kTasks = {"gen", "train-vae", "svdd", "score", "interpolate", "grid"};

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void check_split(const std::string& s, const char* name) {
  if (s != "val" && s != "test") throw ConfigError(std::string(name) + " must be 'val' or 'test'");
}

}  // namespace

void RunConfig::validate() const {
  if (!kTasks.count(task)) throw ConfigError("task must be one of gen, train-vae, svdd, score, interpolate, grid");
  if (output_dir.empty()) throw ConfigError("output_dir is required");
  if (dataset.synthetic) dataset.synthetic->validate();
  if (!(splits.val_fraction >= 0.0 && splits.test_fraction >= 0.0 && splits.val_fraction + splits.test_fraction < 1.0)) {
    throw ConfigError("splits: need val_fraction, test_fraction >= 0 with sum < 1");
  }
  check_split(splits.stats_split, "splits.stats_split");
  check_split(splits.radius_split, "splits.radius_split");
  if (splits.anomaly_ratio && !(*splits.anomaly_ratio > 0.0)) throw ConfigError("splits.anomaly_ratio must be > 0");
  spvae.validate();
  svdd.validate();
  if (!(score.sigma_multiplier >= 0.0)) throw ConfigError("score.sigma_multiplier must be >= 0");
  if (score.error != "squared" && score.error != "bernoulli") throw ConfigError("score.error must be squared or bernoulli");
  if (interpolate.n < 2) throw ConfigError("interpolate.n must be >= 2");
  if (interpolate.mode != "geodesic" && interpolate.mode != "linear" && interpolate.mode != "both") {
    throw ConfigError("interpolate.mode must be geodesic, linear or both");
  }
  if (grid.resolution < 2) throw ConfigError("grid.resolution must be >= 2");
  const bool needs_data = task == "train-vae" || task == "svdd" || task == "score" || task == "gen";
  if (needs_data && dataset.dir.empty() && !dataset.synthetic) {
    throw ConfigError("dataset: either 'dir' or 'synthetic' is required for " + task);
  }
  if (task == "gen" && !dataset.synthetic) throw ConfigError("gen needs dataset.synthetic");
  if ((task == "score" || task == "interpolate" || task == "grid") && checkpoint.empty()) {
    throw ConfigError(task + " needs a checkpoint");
  }
  if (task == "interpolate" && (interpolate.image_a.empty() || interpolate.image_b.empty())) {
    throw ConfigError("interpolate needs image_a and image_b");
  }
}

json RunConfig::to_json() const {
  json ds = json::object();
  if (!dataset.dir.empty()) ds["dir"] = dataset.dir;
  if (dataset.synthetic) ds["synthetic"] = dataset.synthetic->to_json();
  json sp = {{"val_fraction", splits.val_fraction},
             {"test_fraction", splits.test_fraction},
             {"stats_split", splits.stats_split},
             {"radius_split", splits.radius_split},
             {"anomaly_ratio", splits.anomaly_ratio ? json(*splits.anomaly_ratio) : json(nullptr)}};
  json gr = {{"emit", grid.emit}, {"resolution", grid.resolution}, {"bounds", nullptr}};
  if (grid.bounds) gr["bounds"] = {grid.bounds->x_min, grid.bounds->x_max, grid.bounds->y_min, grid.bounds->y_max};
  return {{"task", task},
          {"seed", seed},
          {"output_dir", output_dir},
          {"checkpoint", checkpoint},
          {"dataset", ds},
          {"splits", sp},
          {"spvae", spvae.to_json()},
          {"svdd", svdd.to_json()},
          {"score", {{"sigma_multiplier", score.sigma_multiplier}, {"min_region", score.min_region}, {"error", score.error}}},
          {"interpolate",
           {{"image_a", interpolate.image_a}, {"image_b", interpolate.image_b}, {"n", interpolate.n}, {"mode", interpolate.mode}}},
          {"grid", gr}};
}

RunConfig RunConfig::from_json(const json& j) {
  only_keys(j,
            {"task", "seed", "output_dir", "checkpoint", "dataset", "splits", "spvae", "svdd", "score", "interpolate",
             "grid", "curvature", "latent_dim"},
            "config");
  RunConfig c;
  try {
    c.task = j.value("task", std::string());
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", std::string());
    c.checkpoint = j.value("checkpoint", std::string());
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      only_keys(d, {"dir", "synthetic"}, "dataset");
      c.dataset.dir = d.value("dir", std::string());
      if (d.contains("synthetic") && !d.at("synthetic").is_null()) {
        c.dataset.synthetic = harness::SyntheticSpec::from_json(d.at("synthetic"));
      }
    }
    if (j.contains("splits")) {
      const json& s = j.at("splits");
      only_keys(s, {"val_fraction", "test_fraction", "stats_split", "radius_split", "anomaly_ratio"}, "splits");
      c.splits.val_fraction = s.value("val_fraction", c.splits.val_fraction);
      c.splits.test_fraction = s.value("test_fraction", c.splits.test_fraction);
      c.splits.stats_split = s.value("stats_split", c.splits.stats_split);
      c.splits.radius_split = s.value("radius_split", c.splits.radius_split);
      if (s.contains("anomaly_ratio") && !s.at("anomaly_ratio").is_null()) c.splits.anomaly_ratio = s.at("anomaly_ratio").get<double>();
    }
    json spj = j.value("spvae", json::object());
    json svj = j.value("svdd", json::object());
    for (const char* key : {"curvature", "latent_dim"}) {
      if (j.contains(key)) {
        spj[key] = j.at(key);
        svj[key] = j.at(key);
      }
    }
    spj["seed"] = c.seed;
    svj["seed"] = c.seed;
    c.spvae = spvae::SpVaeConfig::from_json(spj);
    c.svdd = svdd::SvddConfig::from_json(svj);
    if (j.contains("score")) {
      const json& s = j.at("score");
      only_keys(s, {"sigma_multiplier", "min_region", "error"}, "score");
      c.score.sigma_multiplier = s.value("sigma_multiplier", c.score.sigma_multiplier);
      c.score.min_region = s.value("min_region", c.score.min_region);
      c.score.error = s.value("error", c.score.error);
    }
    if (j.contains("interpolate")) {
      const json& s = j.at("interpolate");
      only_keys(s, {"image_a", "image_b", "n", "mode"}, "interpolate");
      c.interpolate.image_a = s.value("image_a", std::string());
      c.interpolate.image_b = s.value("image_b", std::string());
      c.interpolate.n = s.value("n", c.interpolate.n);
      c.interpolate.mode = s.value("mode", c.interpolate.mode);
    }
    if (j.contains("grid")) {
      const json& s = j.at("grid");
      only_keys(s, {"emit", "resolution", "bounds"}, "grid");
      c.grid.emit = s.value("emit", c.grid.emit);
      c.grid.resolution = s.value("resolution", c.grid.resolution);
      if (s.contains("bounds") && !s.at("bounds").is_null()) {
        const auto b = s.at("bounds").get<std::vector<double>>();
        if (b.size() != 4) throw ConfigError("grid.bounds must be [x_min, x_max, y_min, y_max]");
        c.grid.bounds = harness::GridBounds{b[0], b[1], b[2], b[3]};
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

std::string config_hash(const RunConfig& c) {
  json j = c.to_json();
  j.erase("output_dir");
  return git_blob_hash(canonical_dump(j));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

}  // namespace gyrolatent::cli

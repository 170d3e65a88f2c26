#include "gyrolatent/cli/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "gyrolatent/cli/checkpoint.hpp"
#include "gyrolatent/errors.hpp"
#include "gyrolatent/hash.hpp"
#include "gyrolatent/harness/interpolate.hpp"
#include "gyrolatent/harness/png_io.hpp"
#include "gyrolatent/harness/scoring.hpp"
#include "gyrolatent/harness/synthetic.hpp"
#include "gyrolatent/nn/loss.hpp"

namespace gyrolatent::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;
using harness::ImageSet;
using harness::Label;
using nn::Tensor;

namespace {

constexpr std::size_t kEvalBatch = 256;
constexpr std::uint64_t kSplitStream = 0x73706c74;
constexpr std::uint64_t kSubsampleStream = 0x73756273;
constexpr std::uint64_t kModelStream = 0x6d6f646c;
constexpr std::uint64_t kTrainStream = 0x7472616e;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.17g", v); }

fs::path out_path(const RunConfig& c, const std::string& name) { return fs::path(c.output_dir) / name; }

void check_image_size(const ImageSet& set, std::size_t size) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Tensor& im = set.images[i];
    if (im.dim(0) != size || im.dim(1) != size) {
      throw ShapeError("image " + set.ids[i] + " is " + nn::shape_string(im.shape()) + ", model expects " +
                       std::to_string(size) + "x" + std::to_string(size));
    }
  }
}

std::vector<std::size_t> all_indices(const ImageSet& s) {
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

json split_ids(const DataSplits& d) { return {{"train", d.train.ids}, {"val", d.val.ids}, {"test", d.test.ids}}; }

double bernoulli_pixel(double x, double p) {
  p = std::clamp(p, nn::kProbClamp, 1.0 - nn::kProbClamp);
  return -(x * std::log(p) + (1.0 - x) * std::log(1.0 - p));
}

RunSummary cmd_gen(const RunConfig& c) {
  dist::SeededRng rng(c.dataset.synthetic->seed);
  const ImageSet set = harness::gen_synthetic(*c.dataset.synthetic, rng);
  const auto files = harness::write_dataset(c.output_dir, set);
  RunSummary s;
  s.metrics = {{"images", set.size()},
               {"normal", set.indices(Label::kNormal).size()},
               {"anomalous", set.indices(Label::kAnomalous).size()},
               {"files", files.size()}};
  return s;
}

RunSummary cmd_train_vae(const RunConfig& c) {
  const ImageSet all = load_source(c);
  check_image_size(all, c.spvae.image_size);
  const DataSplits d = make_splits(all, c.splits, c.seed);
  if (d.train.size() == 0) throw EmptyInputError("train-vae: training split is empty");
  write_file(out_path(c, "splits.json").string(), canonical_dump(split_ids(d)));

  dist::SeededRng root(c.seed);
  dist::SeededRng init_rng = root.fork(kModelStream);
  dist::SeededRng train_rng = root.fork(kTrainStream);
  spvae::SpVaeModel model(c.spvae, init_rng);
  const Tensor valid = d.val.size() ? d.val.batch() : Tensor({0, 1, c.spvae.image_size, c.spvae.image_size});
  const spvae::FitResult fit = spvae::fit(model, d.train.batch(), valid, train_rng);
  write_file(out_path(c, "history.csv").string(), spvae::history_csv(fit.history));

  RunSummary s;
  s.metrics = {{"best_epoch", fit.best_epoch},
               {"best_val_total", fit.best_val},
               {"epochs_run", fit.history.size()},
               {"stopped_early", fit.stopped_early},
               {"aborted", fit.aborted},
               {"abort_reason", fit.abort_reason},
               {"beta", model.beta_state().beta},
               {"beta_active", model.beta_state().active},
               {"clamp_events", model.clamp_events()}};
  const auto normals = d.test.indices(Label::kNormal);
  if (!normals.empty()) {
    dist::SeededRng eval_rng = root.fork(kTrainStream + 1);
    const spvae::ElboReport e = spvae::elbo(model, d.test.batch(normals), c.spvae.n_mc_eval, eval_rng);
    s.metrics["test_normal_elbo"] = {{"recon", e.recon}, {"recon_se", e.recon_se}, {"kl", e.kl},     {"kl_se", e.kl_se},
                                     {"beta", e.beta},   {"total", e.total},       {"total_se", e.total_se}};
  }
  save_spvae(out_path(c, "checkpoint").string(), model, s.metrics);
  if (fit.aborted) s.exit_code = kExitNumeric;
  return s;
}

void write_grid(const RunConfig& c, svdd::SvddModel& model, const fs::path& path) {
  harness::GridBounds b;
  if (c.grid.bounds) {
    b = *c.grid.bounds;
  } else {
    const double r = model.curvature() < 0.0 ? 1.0 / std::sqrt(-model.curvature()) : 3.0;
    b = harness::GridBounds{-r, r, -r, r};
  }
  write_file(path.string(), harness::grid_csv(harness::score_grid(model, b, c.grid.resolution)));
}

RunSummary cmd_svdd(const RunConfig& c) {
  const ImageSet all = load_source(c);
  check_image_size(all, c.svdd.image_size);
  const DataSplits d = make_splits(all, c.splits, c.seed);
  if (d.train.size() == 0) throw EmptyInputError("svdd: training split is empty");
  write_file(out_path(c, "splits.json").string(), canonical_dump(split_ids(d)));

  dist::SeededRng root(c.seed);
  dist::SeededRng init_rng = root.fork(kModelStream);
  dist::SeededRng train_rng = root.fork(kTrainStream);
  svdd::SvddModel model(c.svdd, init_rng);
  const Tensor train = d.train.batch();
  const svdd::PretrainResult pre = svdd::pretrain_autoencoder(model, train, train_rng);
  svdd::init_center(model, train);
  const auto fine = svdd::finetune(model, train, train_rng);

  const ImageSet& radius_set = c.splits.radius_split == "test" ? d.test : d.val;
  if (radius_set.size() == 0) throw EmptyInputError("svdd: radius split '" + c.splits.radius_split + "' is empty");
  const auto radius_scores = svdd::score(model, radius_set.batch());
  const double radius = svdd::set_radius(model, radius_scores, c.svdd.percentile);

  RunSummary s;
  s.metrics = {{"radius", radius}, {"radius_split", c.splits.radius_split}};
  if (!pre.losses.empty()) s.metrics["pretrain_final_loss"] = pre.losses.back();
  if (!fine.empty()) s.metrics["finetune_final_loss"] = fine.back().total;

  std::string csv = "id,label,score,outside\n";
  if (d.test.size()) {
    const auto scores = svdd::score(model, d.test.batch());
    std::vector<double> known_scores;
    std::vector<bool> positive;
    std::size_t outside = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool out = scores[i] > radius;
      outside += out;
      csv += d.test.ids[i] + "," + harness::to_string(d.test.labels[i]) + "," + num(scores[i]) + "," + (out ? "1" : "0") + "\n";
      if (d.test.labels[i] != Label::kUnknown) {
        known_scores.push_back(scores[i]);
        positive.push_back(d.test.labels[i] == Label::kAnomalous);
      }
    }
    s.metrics["test_outside_fraction"] = static_cast<double>(outside) / static_cast<double>(scores.size());
    const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    if (n_pos > 0 && n_pos < positive.size()) {
      const auto flags = std::make_unique<bool[]>(positive.size());
      std::copy(positive.begin(), positive.end(), flags.get());
      s.metrics["test_auc"] = harness::roc_auc(known_scores, std::span<const bool>(flags.get(), positive.size()));
    }
  }
  write_file(out_path(c, "scores.csv").string(), csv);
  if (c.grid.emit && c.svdd.latent_dim == 2) write_grid(c, model, out_path(c, "grid.csv"));
  save_svdd(out_path(c, "checkpoint").string(), model, s.metrics);
  return s;
}

RunSummary cmd_score(const RunConfig& c) {
  spvae::SpVaeModel model = load_spvae(c.checkpoint);
  const ImageSet all = load_source(c);
  check_image_size(all, model.config().image_size);
  const DataSplits d = make_splits(all, c.splits, c.seed);
  const ImageSet& reference = c.splits.stats_split == "test" ? d.test : d.val;
  if (reference.size() == 0) throw EmptyInputError("score: stats split '" + c.splits.stats_split + "' is empty");
  if (d.test.size() == 0) throw EmptyInputError("score: test split is empty");

  const harness::AnomalyReport r = score_vae(model, reference, d.test, c.score);
  std::string csv = "index,id,label,score,flagged\n";
  fs::create_directories(out_path(c, "masks"));
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    csv += std::to_string(i) + "," + d.test.ids[i] + "," + harness::to_string(d.test.labels[i]) + "," +
           num(r.image_scores[i]) + "," + (r.image_flags[i] ? "1" : "0") + "\n";
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    harness::write_png_gray(out_path(c, "masks") / name, harness::to_gray(r.masks[i]));
  }
  write_file(out_path(c, "scores.csv").string(), csv);

  RunSummary s;
  s.metrics = r.summary();
  s.metrics["stats_split"] = c.splits.stats_split;
  s.metrics["min_region"] = c.score.min_region;
  s.metrics["error"] = c.score.error;
  return s;
}

Tensor load_png(const std::string& path, std::size_t size) {
  const Tensor t = harness::to_tensor(harness::read_png_gray(path));
  if (t.dim(0) != size || t.dim(1) != size) {
    throw ShapeError(path + " is " + nn::shape_string(t.shape()) + ", model expects " + std::to_string(size) + "x" +
                     std::to_string(size));
  }
  return t;
}

RunSummary cmd_interpolate(const RunConfig& c) {
  spvae::SpVaeModel model = load_spvae(c.checkpoint);
  const std::size_t size = model.config().image_size;
  const Tensor a = load_png(c.interpolate.image_a, size);
  const Tensor b = load_png(c.interpolate.image_b, size);
  std::vector<harness::InterpMode> modes;
  if (c.interpolate.mode != "linear") modes.push_back(harness::InterpMode::kGeodesic);
  if (c.interpolate.mode != "geodesic") modes.push_back(harness::InterpMode::kLinear);

  RunSummary s;
  for (const harness::InterpMode mode : modes) {
    const harness::InterpolationPath path = harness::interpolate_pair(model, a, b, c.interpolate.n, mode);
    const std::string tag = harness::to_string(mode);
    const std::size_t d = model.config().latent_dim;
    std::string csv = "step,t";
    for (std::size_t j = 0; j < d; ++j) csv += ",z" + std::to_string(j);
    csv += "\n";
    harness::GrayImage strip{size * path.latents.size(), size, {}};
    strip.pixels.assign(strip.width * strip.height, 0);
    for (std::size_t i = 0; i < path.latents.size(); ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(path.latents.size() - 1);
      csv += std::to_string(i) + "," + num(t);
      for (std::size_t j = 0; j < d; ++j) csv += "," + num(path.latents[i][static_cast<Eigen::Index>(j)]);
      csv += "\n";
      const harness::GrayImage frame = harness::to_gray(path.images.slice(i).reshaped({size, size}));
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) strip.pixels[y * strip.width + i * size + x] = frame.pixels[y * size + x];
      }
    }
    write_file(out_path(c, "interp_" + tag + ".csv").string(), csv);
    harness::write_png_gray(out_path(c, "interp_" + tag + ".png"), strip);
    s.metrics[tag] = {{"steps", path.latents.size()}, {"clamped", path.clamped}};
  }
  return s;
}

RunSummary cmd_grid(const RunConfig& c) {
  svdd::SvddModel model = load_svdd(c.checkpoint);
  if (model.config().latent_dim != 2) throw ConfigError("grid needs a 2-dimensional SVDD checkpoint");
  write_grid(c, model, out_path(c, "grid.csv"));
  RunSummary s;
  s.metrics = {{"resolution", c.grid.resolution}};
  return s;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const IngestError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const EmptyInputError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const SingularityError*>(&e) || dynamic_cast<const RegimeError*>(&e) ||
      dynamic_cast<const DegenerateError*>(&e) || dynamic_cast<const geometry::ConvergenceError*>(&e)) {
    return kExitNumeric;
  }
  return kExitFailure;
}

OutputLock::OutputLock(const std::string& dir) {
  fs::create_directories(dir);
  path_ = (fs::path(dir) / ".lock").string();
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    const int err = errno;
    path_.clear();
    if (err == EEXIST) throw IoError("output directory " + dir + " is locked by another run");
    throw IoError("cannot lock " + dir + ": " + std::strerror(err));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  if (!path_.empty()) ::unlink(path_.c_str());
}

ImageSet load_source(const RunConfig& c) {
  ImageSet set;
  if (c.dataset.synthetic) {
    dist::SeededRng rng(c.dataset.synthetic->seed);
    set = harness::gen_synthetic(*c.dataset.synthetic, rng);
  } else {
    set = harness::load_dataset(c.dataset.dir);
  }
  set.validate();
  if (set.size() == 0) throw EmptyInputError("dataset is empty");
  if (c.splits.anomaly_ratio) {
    dist::SeededRng rng = dist::SeededRng(c.seed).fork(kSubsampleStream);
    std::string warning;
    set = harness::subsample_anomalies(set, *c.splits.anomaly_ratio, rng, &warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
  }
  return set;
}

DataSplits make_splits(const ImageSet& all, const Splits& s, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all.labels[i] != Label::kAnomalous) pool.push_back(i);
  }
  dist::SeededRng rng = dist::SeededRng(seed).fork(kSplitStream);
  const auto perm = harness::permutation(pool.size(), rng);
  const auto n = static_cast<double>(pool.size());
  const auto n_val = static_cast<std::size_t>(std::llround(s.val_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(s.test_fraction * n));
  std::vector<std::size_t> val, test, train;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    const std::size_t i = pool[perm[r]];
    if (r < n_val) {
      val.push_back(i);
    } else if (r < n_val + n_test) {
      test.push_back(i);
    } else {
      train.push_back(i);
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all.labels[i] == Label::kAnomalous) test.push_back(i);
  }
  for (auto* v : {&val, &test, &train}) std::sort(v->begin(), v->end());
  return DataSplits{all.subset(train), all.subset(val), all.subset(test)};
}

std::vector<Tensor> error_maps(spvae::SpVaeModel& model, const ImageSet& set, const std::string& kind) {
  std::vector<Tensor> maps;
  maps.reserve(set.size());
  const auto idx = all_indices(set);
  for (std::size_t lo = 0; lo < idx.size(); lo += kEvalBatch) {
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), lo + kEvalBatch)));
    const Tensor x = set.batch(chunk);
    spvae::Reconstruction r = spvae::reconstruct(model, x);
    if (kind == "bernoulli") {
      for (std::size_t i = 0; i < x.size(); ++i) r.error[i] = bernoulli_pixel(x[i], r.x_hat[i]);
    } else if (kind != "squared") {
      throw ConfigError("unknown error kind " + kind);
    }
    for (Tensor& m : harness::split_errors(r.error)) maps.push_back(std::move(m));
  }
  return maps;
}

harness::AnomalyReport score_vae(spvae::SpVaeModel& model, const ImageSet& reference, const ImageSet& test,
                                 const ScoreOptions& options) {
  const auto ref_errors = error_maps(model, reference, options.error);
  const harness::ThresholdStats t = harness::recon_threshold(ref_errors, options.sigma_multiplier);
  const auto test_errors = error_maps(model, test, options.error);
  return harness::eval_metrics(test_errors, test, t, harness::EvalOptions{options.min_region});
}

RunSummary run_task(const RunConfig& c) {
  c.validate();
  OutputLock lock(c.output_dir);
  const std::string resolved = canonical_dump(c.to_json());
  const std::string hash = config_hash(c);
  write_file(out_path(c, "config.resolved.json").string(), resolved);
  write_file(out_path(c, "config.hash").string(), hash + "\n");

  RunSummary s;
  if (c.task == "gen") {
    s = cmd_gen(c);
  } else if (c.task == "train-vae") {
    s = cmd_train_vae(c);
  } else if (c.task == "svdd") {
    s = cmd_svdd(c);
  } else if (c.task == "score") {
    s = cmd_score(c);
  } else if (c.task == "interpolate") {
    s = cmd_interpolate(c);
  } else if (c.task == "grid") {
    s = cmd_grid(c);
  } else {
    throw ConfigError("unknown task " + c.task);
  }
  s.config_hash = hash;
  s.metrics["config_hash"] = hash;
  s.metrics["seed"] = c.seed;
  s.metrics["task"] = c.task;
  write_file(out_path(c, "metrics.json").string(), canonical_dump(s.metrics));
  return s;
}

namespace {

struct Overrides {
  std::string config;
  std::string output;
  std::string data;
  std::string synthetic;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<double> curvature;
  std::optional<std::size_t> latent_dim;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> pretrain_epochs;
  std::optional<std::size_t> finetune_epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<double> anomaly_ratio;
  std::string stats_split;
  std::string radius_split;
  std::optional<double> percentile;
  std::optional<std::size_t> min_region;
  std::optional<double> sigma_multiplier;
  std::string error;
  std::string image_a;
  std::string image_b;
  std::optional<std::size_t> steps;
  std::string mode;
  std::optional<std::size_t> resolution;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "JSON run configuration; flags override its values");
  app->add_option("-o,--output", o.output, "output directory");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_data(CLI::App* app, Overrides& o) {
  app->add_option("--data", o.data, "dataset directory (index.json or plain PNGs)");
  app->add_option("--synthetic", o.synthetic, "JSON file with a synthetic dataset spec");
  app->add_option("--anomaly-ratio", o.anomaly_ratio, "keep ratio * |normal| anomalies");
}

void add_model(CLI::App* app, Overrides& o) {
  app->add_option("-k,--curvature", o.curvature, "latent curvature");
  app->add_option("-d,--latent-dim", o.latent_dim, "latent dimension");
  app->add_option("--lr", o.lr, "learning rate");
  app->add_option("--batch-size", o.batch_size, "mini-batch size");
}

json apply_overrides(const std::string& task, const Overrides& o) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  j["task"] = task;
  auto section = [&j](const char* name) -> json& {
    if (!j.contains(name)) j[name] = json::object();
    return j[name];
  };
  const char* model = task == "svdd" ? "svdd" : "spvae";
  if (!o.output.empty()) j["output_dir"] = o.output;
  if (!o.checkpoint.empty()) j["checkpoint"] = o.checkpoint;
  if (o.seed) j["seed"] = *o.seed;
  if (o.curvature) j["curvature"] = *o.curvature;
  if (o.latent_dim) j["latent_dim"] = *o.latent_dim;
  if (!o.data.empty()) section("dataset") = json{{"dir", o.data}};
  if (!o.synthetic.empty()) section("dataset") = json{{"synthetic", read_json_file(o.synthetic)}};
  if (o.anomaly_ratio) section("splits")["anomaly_ratio"] = *o.anomaly_ratio;
  if (!o.stats_split.empty()) section("splits")["stats_split"] = o.stats_split;
  if (!o.radius_split.empty()) section("splits")["radius_split"] = o.radius_split;
  if (o.epochs) section("spvae")["max_epochs"] = *o.epochs;
  if (o.pretrain_epochs) section("svdd")["pretrain_epochs"] = *o.pretrain_epochs;
  if (o.finetune_epochs) section("svdd")["finetune_epochs"] = *o.finetune_epochs;
  if (o.percentile) section("svdd")["percentile"] = *o.percentile;
  if (o.lr) section(model)["lr"] = *o.lr;
  if (o.batch_size) section(model)["batch_size"] = *o.batch_size;
  if (o.min_region) section("score")["min_region"] = *o.min_region;
  if (o.sigma_multiplier) section("score")["sigma_multiplier"] = *o.sigma_multiplier;
  if (!o.error.empty()) section("score")["error"] = o.error;
  if (!o.image_a.empty()) section("interpolate")["image_a"] = o.image_a;
  if (!o.image_b.empty()) section("interpolate")["image_b"] = o.image_b;
  if (o.steps) section("interpolate")["n"] = *o.steps;
  if (!o.mode.empty()) section("interpolate")["mode"] = o.mode;
  if (o.resolution) section("grid")["resolution"] = *o.resolution;
  return j;
}

}  // namespace

int main_entry(int argc, char** argv) {
  CLI::App app{"Constant-curvature latent models for texture anomaly detection"};
  app.require_subcommand(1);
  Overrides o;

  CLI::App* gen = app.add_subcommand("gen", "write a synthetic texture dataset");
  add_common(gen, o);
  add_data(gen, o);

  CLI::App* vae = app.add_subcommand("train-vae", "train the variational autoencoder");
  add_common(vae, o);
  add_data(vae, o);
  add_model(vae, o);
  vae->add_option("--epochs", o.epochs, "maximum epochs");

  CLI::App* sv = app.add_subcommand("svdd", "pretrain, center and fine-tune the one-class model");
  add_common(sv, o);
  add_data(sv, o);
  add_model(sv, o);
  sv->add_option("--pretrain-epochs", o.pretrain_epochs, "autoencoder epochs");
  sv->add_option("--finetune-epochs", o.finetune_epochs, "one-class epochs");
  sv->add_option("--percentile", o.percentile, "radius percentile in (0, 100)");
  sv->add_option("--radius-split", o.radius_split, "split used for the radius")->check(CLI::IsMember({"val", "test"}));
  sv->add_option("--resolution", o.resolution, "score grid resolution (2-d latents)");

  CLI::App* sc = app.add_subcommand("score", "threshold, localize and evaluate with a trained autoencoder");
  add_common(sc, o);
  add_data(sc, o);
  sc->add_option("--checkpoint", o.checkpoint, "autoencoder checkpoint directory");
  sc->add_option("--stats-split", o.stats_split, "split for the error statistics")->check(CLI::IsMember({"val", "test"}));
  sc->add_option("--min-region", o.min_region, "discard localized regions below this many pixels");
  sc->add_option("--sigma-multiplier", o.sigma_multiplier, "tau = mu + multiplier * sigma");
  sc->add_option("--error", o.error, "pixel error")->check(CLI::IsMember({"squared", "bernoulli"}));

  CLI::App* in = app.add_subcommand("interpolate", "decode a latent path between two images");
  add_common(in, o);
  in->add_option("--checkpoint", o.checkpoint, "autoencoder checkpoint directory");
  in->add_option("--image-a", o.image_a, "first PNG");
  in->add_option("--image-b", o.image_b, "second PNG");
  in->add_option("-n,--steps", o.steps, "points on the path");
  in->add_option("--mode", o.mode, "path type")->check(CLI::IsMember({"geodesic", "linear", "both"}));

  CLI::App* gr = app.add_subcommand("grid", "score a lattice of 2-d latent points");
  add_common(gr, o);
  gr->add_option("--checkpoint", o.checkpoint, "one-class checkpoint directory");
  gr->add_option("--resolution", o.resolution, "nodes per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (o.threads) ::setenv("GYRO_THREADS", std::to_string(*o.threads).c_str(), 1);
    const std::string task = app.get_subcommands().front()->get_name();
    const RunConfig c = RunConfig::from_json(apply_overrides(task, o));
    const RunSummary s = run_task(c);
    std::cout << s.metrics.dump(2) << "\n";
    return s.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace gyrolatent::cli

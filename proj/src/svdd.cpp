#include "gyrolatent/svdd.hpp"

#include <algorithm>
#include <cmath>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/nn/loss.hpp"
#include "gyrolatent/nn/optim.hpp"

namespace gyrolatent::svdd {

namespace gc = geometry::coords;
using geometry::Vec;
using json = nlohmann::json;

namespace {

void init_layers(nn::Sequential& net, SeededRng& rng) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    nn::Layer& l = net.layer(i);
    if (auto* d = dynamic_cast<nn::Dense*>(&l)) d->init(rng);
    if (auto* c = dynamic_cast<nn::Conv2d*>(&l)) c->init(rng);
    if (auto* t = dynamic_cast<nn::ConvTranspose2d*>(&l)) t->init(rng);
  }
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  nn::Shape s = x.shape();
  const std::size_t per = x.size() / s[0];
  s[0] = end - begin;
  std::vector<double> data(s[0] * per);
  for (std::size_t i = begin; i < end; ++i) std::copy_n(x.data() + idx[i] * per, per, data.data() + (i - begin) * per);
  return Tensor(std::move(s), std::move(data));
}

void shuffle(std::vector<std::size_t>& order, SeededRng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
}

void add_decay_grad(const std::vector<nn::Parameter*>& params, double lambda) {
  if (lambda == 0.0) return;
  for (nn::Parameter* p : params) {
    if (!p->trainable || !p->decay) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += 2.0 * lambda * p->value[i];
  }
}

double lr_for(const SvddConfig& c, std::size_t epoch) {
  return epoch >= c.lr_milestone ? c.lr * c.lr_decay : c.lr;
}

nn::Sequential make_decoder(const SvddConfig& c) {
  nn::Sequential dec(nn::Shape{c.latent_dim});
  const std::size_t L = c.channels.size();
  const std::size_t S = c.image_size;
  if (L > 0) {
    const std::size_t s0 = S >> L;
    const std::size_t top = c.channels.back();
    dec.emplace<nn::Dense>(c.latent_dim, top * s0 * s0, "ae.fc");
    dec.emplace<nn::LeakyRelu>(c.leaky_slope);
    dec.emplace<nn::Reshape>(nn::Shape{top, s0, s0});
    for (std::size_t l = L - 1; l >= 1; --l) {
      dec.emplace<nn::ConvTranspose2d>(c.channels[l], c.channels[l - 1], 3, 2, "ae.deconv" + std::to_string(l));
      dec.emplace<nn::LeakyRelu>(c.leaky_slope);
    }
    dec.emplace<nn::ConvTranspose2d>(c.channels[0], 1, 3, 2, "ae.deconv0");
  } else {
    dec.emplace<nn::Dense>(c.latent_dim, c.hidden_dim, "ae.fc");
    dec.emplace<nn::LeakyRelu>(c.leaky_slope);
    dec.emplace<nn::Dense>(c.hidden_dim, S * S, "ae.out");
    dec.emplace<nn::Reshape>(nn::Shape{1, S, S});
  }
  dec.emplace<nn::Sigmoid>();
  return dec;
}

}  // namespace

// ---------------------------------------------------------------- config

void SvddConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("svdd config: " + what); };
  if (!std::isfinite(curvature)) fail("curvature must be finite");
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (image_size < 1) fail("image_size must be >= 1");
  for (std::size_t c : channels)
    if (c < 1) fail("channel counts must be >= 1");
  if (channels.size() >= 16 || image_size % (std::size_t{1} << channels.size()) != 0) {
    fail("image_size must be divisible by 2^(number of conv layers)");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) fail("lr_decay must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
  if (!(percentile > 0.0 && percentile < 100.0)) fail("percentile must lie in (0, 100)");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
}

json SvddConfig::to_json() const {
  return {{"curvature", curvature},         {"latent_dim", latent_dim},
          {"channels", channels},           {"hidden_dim", hidden_dim},
          {"image_size", image_size},       {"leaky_slope", leaky_slope},
          {"pretrain_epochs", pretrain_epochs}, {"finetune_epochs", finetune_epochs},
          {"lr", lr},                       {"lr_milestone", lr_milestone},
          {"lr_decay", lr_decay},           {"weight_decay", weight_decay},
          {"percentile", percentile},       {"batch_size", batch_size},
          {"seed", seed}};
}

SvddConfig SvddConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("svdd config must be a JSON object");
  SvddConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("svdd config: unknown key '" + key + "'");
  }
  try {
    c.curvature = j.value("curvature", c.curvature);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.channels = j.value("channels", c.channels);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.image_size = j.value("image_size", c.image_size);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
    c.lr = j.value("lr", c.lr);
    c.lr_milestone = j.value("lr_milestone", c.lr_milestone);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.percentile = j.value("percentile", c.percentile);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("svdd config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- model

SvddModel::SvddModel(const SvddConfig& config)
    : config_(config), encoder_(nn::Shape{1, config.image_size, config.image_size}) {
  config_.validate();
  build();
}

SvddModel::SvddModel(const SvddConfig& config, SeededRng& rng) : SvddModel(config) { init_layers(encoder_, rng); }

void SvddModel::build() {
  const auto& c = config_;
  std::size_t in = 1;
  for (std::size_t l = 0; l < c.channels.size(); ++l) {
    encoder_.emplace<nn::Conv2d>(in, c.channels[l], 3, 2, "svdd.conv" + std::to_string(l), false);
    encoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
    in = c.channels[l];
  }
  encoder_.emplace<nn::Flatten>();
  encoder_.emplace<nn::Dense>(nn::numel(encoder_.output_shape()), c.hidden_dim, "svdd.fc", false);
  encoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
  encoder_.emplace<nn::Dense>(c.hidden_dim, c.latent_dim, "svdd.head", false);

  center_ = nn::Parameter("svdd.center", Tensor({c.latent_dim}));
  center_.trainable = false;
  center_.decay = false;
  center_.manifold_curvature = c.curvature;
}

ManifoldPoint SvddModel::center() const {
  if (!has_center_) throw StateError("svdd: center not initialized");
  return ManifoldPoint(geometry::Curvature(config_.curvature),
                       Eigen::Map<const Vec>(center_.value.data(), static_cast<Eigen::Index>(config_.latent_dim)));
}

void SvddModel::set_center(const ManifoldPoint& c) {
  if (c.dim() != static_cast<Eigen::Index>(config_.latent_dim) || c.curvature().value() != config_.curvature) {
    throw ShapeError("svdd: center does not live in the latent space");
  }
  for (Eigen::Index i = 0; i < c.dim(); ++i) center_.value[static_cast<std::size_t>(i)] = c.coords()[i];
  has_center_ = true;
}

void SvddModel::set_radius_value(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("svdd: radius must be finite and >= 0");
  radius_ = r;
}

std::vector<nn::Parameter*> SvddModel::parameters() {
  auto p = encoder_.parameters();
  p.push_back(&center_);
  return p;
}

Eigen::MatrixXd SvddModel::tangent(const Tensor& x, nn::GradientTape* tape) {
  const Tensor e = encoder_.forward(x, tape);
  return e.matrix();
}

Eigen::MatrixXd SvddModel::embed(const Tensor& x) {
  Eigen::MatrixXd e = tangent(x, nullptr);
  const double k = config_.curvature;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    e.row(i) = gc::project(k, gc::expmap0(k, e.row(i).transpose())).transpose();
  }
  return e;
}

double weight_decay_term(const std::vector<nn::Parameter*>& params, double lambda) {
  double s = 0.0;
  for (const nn::Parameter* p : params) {
    if (!p->trainable || !p->decay) continue;
    for (double v : p->value.values()) s += v * v;
  }
  return lambda * s;
}

// ---------------------------------------------------------------- training

PretrainResult pretrain_autoencoder(SvddModel& model, const Tensor& train, SeededRng& rng) {
  const auto& c = model.config();
  if (train.rank() == 0 || train.dim(0) == 0) throw EmptyInputError("pretrain: empty training set");
  nn::Sequential decoder = make_decoder(c);
  init_layers(decoder, rng);

  std::vector<nn::Parameter*> params = model.encoder().parameters();
  for (nn::Parameter* p : decoder.parameters()) params.push_back(p);
  nn::Adam opt(params, nn::AdamConfig{c.lr, 0.9, 0.999, 1e-8});

  const std::size_t n = train.dim(0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  PretrainResult res;
  for (std::size_t epoch = 0; epoch < c.pretrain_epochs; ++epoch) {
    opt.set_lr(lr_for(c, epoch));
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < n; b += c.batch_size) {
      const std::size_t e = std::min(n, b + c.batch_size);
      const Tensor batch = gather(train, order, b, e);
      nn::GradientTape enc_tape, dec_tape;
      const Eigen::MatrixXd t = model.tangent(batch, &enc_tape);
      Tensor h({e - b, c.latent_dim});
      h.matrix() = t;
      const Tensor x_hat = decoder.forward(h, &dec_tape);
      const nn::LossValue loss = nn::gaussian_nll(x_hat, batch, 1.0);
      const Tensor g_h = dec_tape.backward(loss.grad);
      enc_tape.backward(g_h);
      add_decay_grad(params, c.weight_decay);
      opt.step();
      total += static_cast<double>(e - b) * loss.value;
    }
    res.losses.push_back(total / static_cast<double>(n) + weight_decay_term(params, c.weight_decay));
  }
  return res;
}

ManifoldPoint init_center(SvddModel& model, const Tensor& train) {
  if (train.rank() == 0 || train.dim(0) == 0) throw EmptyInputError("init_center: empty training set");
  const Eigen::MatrixXd z = model.embed(train);
  const geometry::Curvature k(model.curvature());
  if (k.is_flat()) {
    Vec mean = Vec::Zero(z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) mean += z.row(i).transpose();
    mean /= static_cast<double>(z.rows());
    model.set_center(ManifoldPoint(k, mean));
    return model.center();
  }
  std::vector<ManifoldPoint> pts;
  pts.reserve(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) pts.emplace_back(k, z.row(i).transpose());
  geometry::KarcherOptions opts;
  opts.max_iterations = 2000;
  model.set_center(geometry::karcher_mean(pts, opts));
  return model.center();
}

std::vector<FinetuneEpoch> finetune(SvddModel& model, const Tensor& train, SeededRng& rng) {
  const auto& c = model.config();
  if (train.rank() == 0 || train.dim(0) == 0) throw EmptyInputError("finetune: empty training set");
  const Vec center = model.center().coords();
  const double k = c.curvature;
  const auto d = static_cast<Eigen::Index>(c.latent_dim);
  std::vector<nn::Parameter*> params = model.encoder().parameters();
  nn::Adam opt(params, nn::AdamConfig{c.lr, 0.9, 0.999, 1e-8});

  const std::size_t n = train.dim(0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<FinetuneEpoch> out;
  for (std::size_t epoch = 0; epoch < c.finetune_epochs; ++epoch) {
    opt.set_lr(lr_for(c, epoch));
    shuffle(order, rng);
    for (std::size_t b = 0; b < n; b += c.batch_size) {
      const std::size_t e = std::min(n, b + c.batch_size);
      const Tensor batch = gather(train, order, b, e);
      nn::GradientTape tape;
      const Eigen::MatrixXd t = model.tangent(batch, &tape);
      const double inv_b = 1.0 / static_cast<double>(e - b);
      Tensor g({e - b, c.latent_dim});
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        const Vec ti = t.row(i).transpose();
        const Vec z = gc::project(k, gc::expmap0(k, ti));
        const double dist = gc::distance(k, z, center);
        const Vec gz = gc::distance_vjp(k, z, center, 2.0 * dist * inv_b).gx;
        const Vec gt = gc::exp_map_vjp(k, Vec::Zero(d), ti, gz).gy;
        for (Eigen::Index j = 0; j < d; ++j) g[static_cast<std::size_t>(i * d + j)] = gt[j];
      }
      tape.backward(g);
      add_decay_grad(params, c.weight_decay);
      opt.step();
    }
    const std::vector<double> s = score(model, train);
    double dist2 = 0.0;
    for (double v : s) dist2 += v * v;
    FinetuneEpoch row{epoch + 1, dist2 / static_cast<double>(n), weight_decay_term(params, c.weight_decay), 0.0};
    row.total = row.distance_term + row.decay_term;
    if (!std::isfinite(row.total)) throw NumericError("svdd finetune: non-finite loss");
    out.push_back(row);
  }
  return out;
}

std::vector<double> score(SvddModel& model, const Tensor& x) {
  const Vec center = model.center().coords();
  const Eigen::MatrixXd z = model.embed(x);
  std::vector<double> s(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    s[static_cast<std::size_t>(i)] = gc::distance(model.curvature(), z.row(i).transpose(), center);
  }
  return s;
}

double nearest_rank(std::span<const double> scores, double percentile) {
  if (scores.empty()) throw EmptyInputError("nearest_rank: no scores");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw DomainError("nearest_rank: percentile must lie in (0, 100]");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double exact = percentile * static_cast<double>(sorted.size()) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double set_radius(SvddModel& model, std::span<const double> scores, double percentile) {
  const double r = nearest_rank(scores, percentile);
  model.set_radius_value(r);
  return r;
}

}  // namespace gyrolatent::svdd

#include "gyrolatent/spvae.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/nn/loss.hpp"
#include "gyrolatent/parallel.hpp"

namespace gyrolatent::spvae {

namespace gc = geometry::coords;
using geometry::Vec;
using json = nlohmann::json;

namespace {

double softplus(double s) { return s > 30.0 ? s : std::log1p(std::exp(s)); }
double sigmoid(double s) { return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s)); }

void init_layers(nn::Sequential& net, SeededRng& rng) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    nn::Layer& l = net.layer(i);
    if (auto* d = dynamic_cast<nn::Dense*>(&l)) d->init(rng);
    if (auto* c = dynamic_cast<nn::Conv2d*>(&l)) c->init(rng);
    if (auto* t = dynamic_cast<nn::ConvTranspose2d*>(&l)) t->init(rng);
  }
}

// Per-sample likelihood terms, each summed over pixels.
std::vector<double> nll_per_sample(const Tensor& x_hat, const Tensor& x, const SpVaeConfig& c) {
  const std::size_t n = x.dim(0);
  const std::size_t per = x.size() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i * per; j < (i + 1) * per; ++j) {
      if (c.likelihood == Likelihood::kBernoulli) {
        const double p = std::clamp(x_hat[j], nn::kProbClamp, 1.0 - nn::kProbClamp);
        s -= x[j] * std::log(p) + (1.0 - x[j]) * std::log1p(-p);
      } else {
        const double r = x_hat[j] - x[j];
        s += 0.5 * r * r / c.gaussian_variance;
      }
    }
    out[i] = s;
  }
  return out;
}

nn::LossValue likelihood_loss(const Tensor& x_hat, const Tensor& x, const SpVaeConfig& c) {
  return c.likelihood == Likelihood::kBernoulli ? nn::bernoulli_nll(x_hat, x)
                                                : nn::gaussian_nll(x_hat, x, c.gaussian_variance);
}

// x repeated `times` along the batch dimension (draw-major).
Tensor repeat_batch(const Tensor& x, std::size_t times) {
  if (times == 1) return x;
  nn::Shape s = x.shape();
  s[0] *= times;
  std::vector<double> data;
  data.reserve(x.size() * times);
  for (std::size_t r = 0; r < times; ++r) data.insert(data.end(), x.values().begin(), x.values().end());
  return Tensor(std::move(s), std::move(data));
}

Vec draw_noise(double k, const Vec& sigma, SeededRng& rng, std::size_t& redraws) {
  for (int attempt = 0; attempt <= dist::coords::kMaxRedraws; ++attempt) {
    Vec eps = rng.normal_vector(sigma.size());
    if (k <= 0.0 || std::sqrt(k) * sigma.cwiseProduct(eps).norm() < std::numbers::pi) return eps;
    ++redraws;
  }
  throw NumericError("wrapped normal: too many draws outside the chart");
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  nn::Shape s = x.shape();
  const std::size_t per = x.size() / s[0];
  s[0] = end - begin;
  std::vector<double> data(s[0] * per);
  for (std::size_t i = begin; i < end; ++i) {
    std::copy_n(x.data() + idx[i] * per, per, data.data() + (i - begin) * per);
  }
  return Tensor(std::move(s), std::move(data));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- config

void SpVaeConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("spvae config: " + what); };
  if (!std::isfinite(curvature)) fail("curvature must be finite");
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (gyro_width < 1) fail("gyro_width must be >= 1");
  if (image_size < 1) fail("image_size must be >= 1");
  for (std::size_t c : channels)
    if (c < 1) fail("channel counts must be >= 1");
  if (channels.size() >= 16 || image_size % (std::size_t{1} << channels.size()) != 0) {
    fail("image_size must be divisible by 2^(number of conv layers)");
  }
  if (!(leaky_slope >= 0.0) || !std::isfinite(leaky_slope)) fail("leaky_slope must be >= 0");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must lie in [0, 1)");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) fail("sigma0 must be > 0");
  if (!(beta0 > 0.0) || !std::isfinite(beta0)) fail("beta0 must be > 0");
  if (!(nu > 0.0) || !std::isfinite(nu)) fail("nu must be > 0");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail("kappa must be > 0");
  if (!(gaussian_variance > 0.0)) fail("gaussian_variance must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (n_mc_train < 1 || n_mc_eval < 1) fail("n_mc must be >= 1");
}

json SpVaeConfig::to_json() const {
  return {{"curvature", curvature},
          {"latent_dim", latent_dim},
          {"hidden_dim", hidden_dim},
          {"gyro_width", gyro_width},
          {"channels", channels},
          {"image_size", image_size},
          {"batchnorm", batchnorm},
          {"leaky_slope", leaky_slope},
          {"bn_momentum", bn_momentum},
          {"sigma0", sigma0},
          {"beta0", beta0},
          {"nu", nu},
          {"kappa", kappa},
          {"likelihood", likelihood == Likelihood::kBernoulli ? "bernoulli" : "gaussian"},
          {"gaussian_variance", gaussian_variance},
          {"batch_size", batch_size},
          {"lr", lr},
          {"max_epochs", max_epochs},
          {"warmup_epochs", warmup_epochs},
          {"lookahead_epochs", lookahead_epochs},
          {"n_mc_train", n_mc_train},
          {"n_mc_eval", n_mc_eval},
          {"seed", seed}};
}

SpVaeConfig SpVaeConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("spvae config must be a JSON object");
  SpVaeConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("spvae config: unknown key '" + key + "'");
  }
  try {
    c.curvature = j.value("curvature", c.curvature);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.gyro_width = j.value("gyro_width", c.gyro_width);
    c.channels = j.value("channels", c.channels);
    c.image_size = j.value("image_size", c.image_size);
    c.batchnorm = j.value("batchnorm", c.batchnorm);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.sigma0 = j.value("sigma0", c.sigma0);
    c.beta0 = j.value("beta0", c.beta0);
    c.nu = j.value("nu", c.nu);
    c.kappa = j.value("kappa", c.kappa);
    const std::string lik = j.value("likelihood", std::string("bernoulli"));
    if (lik == "bernoulli") {
      c.likelihood = Likelihood::kBernoulli;
    } else if (lik == "gaussian") {
      c.likelihood = Likelihood::kGaussian;
    } else {
      throw ConfigError("spvae config: likelihood must be 'bernoulli' or 'gaussian'");
    }
    c.gaussian_variance = j.value("gaussian_variance", c.gaussian_variance);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.lookahead_epochs = j.value("lookahead_epochs", c.lookahead_epochs);
    c.n_mc_train = j.value("n_mc_train", c.n_mc_train);
    c.n_mc_eval = j.value("n_mc_eval", c.n_mc_eval);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spvae config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- beta

double beta_update(BetaState& state, double c_hat) {
  const double target = state.kappa * state.kappa;
  if (!state.active && c_hat <= target) state.active = true;
  if (state.active) {
    state.beta = std::clamp(state.beta * std::exp(state.nu * (c_hat - target)), kBetaMin, kBetaMax);
  }
  return state.beta;
}

// ---------------------------------------------------------------- model

SpVaeModel::SpVaeModel(const SpVaeConfig& config)
    : config_(config),
      encoder_(nn::Shape{1, config.image_size, config.image_size}),
      decoder_(nn::Shape{config.gyro_width}) {
  config_.validate();
  build();
}

SpVaeModel::SpVaeModel(const SpVaeConfig& config, SeededRng& rng) : SpVaeModel(config) {
  init_layers(encoder_, rng);
  init_layers(decoder_, rng);
  const double k = config_.curvature;
  const std::size_t m = config_.gyro_width;
  const std::size_t d = config_.latent_dim;
  const double bound = 0.5 * std::sqrt(6.0 / static_cast<double>(d));
  for (std::size_t j = 0; j < m; ++j) {
    const Vec p = gc::expmap0(k, 1e-2 * rng.normal_vector(static_cast<Eigen::Index>(d)));
    for (std::size_t t = 0; t < d; ++t) offsets_.value[j * d + t] = p[static_cast<Eigen::Index>(t)];
    for (std::size_t t = 0; t < d; ++t) orientations_.value[j * d + t] = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

void SpVaeModel::build() {
  const auto& c = config_;
  const std::size_t S = c.image_size;
  const std::size_t L = c.channels.size();
  const std::size_t d = c.latent_dim;
  const std::size_t m = c.gyro_width;

  std::size_t in = 1;
  for (std::size_t l = 0; l < L; ++l) {
    encoder_.emplace<nn::Conv2d>(in, c.channels[l], 3, 2, "enc.conv" + std::to_string(l));
    if (c.batchnorm) encoder_.emplace<nn::BatchNorm>(c.channels[l], c.bn_momentum, 1e-5, "enc.bn" + std::to_string(l));
    encoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
    in = c.channels[l];
  }
  encoder_.emplace<nn::Flatten>();
  encoder_.emplace<nn::Dense>(nn::numel(encoder_.output_shape()), c.hidden_dim, "enc.fc");
  if (c.batchnorm && L > 0) encoder_.emplace<nn::BatchNorm>(c.hidden_dim, c.bn_momentum, 1e-5, "enc.bn_fc");
  encoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
  encoder_.emplace<nn::Dense>(c.hidden_dim, 2 * d, "enc.head");

  decoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
  if (L > 0) {
    const std::size_t s0 = S >> L;
    const std::size_t top = c.channels.back();
    decoder_.emplace<nn::Dense>(m, top * s0 * s0, "dec.fc");
    if (c.batchnorm) decoder_.emplace<nn::BatchNorm>(top * s0 * s0, c.bn_momentum, 1e-5, "dec.bn_fc");
    decoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
    decoder_.emplace<nn::Reshape>(nn::Shape{top, s0, s0});
    for (std::size_t l = L - 1; l >= 1; --l) {
      decoder_.emplace<nn::ConvTranspose2d>(c.channels[l], c.channels[l - 1], 3, 2, "dec.deconv" + std::to_string(l));
      if (c.batchnorm) {
        decoder_.emplace<nn::BatchNorm>(c.channels[l - 1], c.bn_momentum, 1e-5, "dec.bn" + std::to_string(l));
      }
      decoder_.emplace<nn::LeakyRelu>(c.leaky_slope);
    }
    decoder_.emplace<nn::ConvTranspose2d>(c.channels[0], 1, 3, 2, "dec.deconv0");
  } else {
    decoder_.emplace<nn::Dense>(m, S * S, "dec.fc");
    decoder_.emplace<nn::Reshape>(nn::Shape{1, S, S});
  }
  decoder_.emplace<nn::Sigmoid>();

  offsets_ = nn::Parameter("gyro.offsets", Tensor({m, d}));
  offsets_.manifold_curvature = c.curvature;
  offsets_.decay = false;
  orientations_ = nn::Parameter("gyro.orientations", Tensor({m, d}));

  beta_ = BetaState{c.beta0, false, c.nu, c.kappa};
}

gyroplane::GyroplaneLayer SpVaeModel::gyroplane() const {
  return gyroplane::GyroplaneLayer(geometry::Curvature(config_.curvature), offsets_.value.matrix(),
                                   orientations_.value.matrix());
}

dist::LatentPrior SpVaeModel::prior() const {
  return dist::LatentPrior(geometry::Curvature(config_.curvature), static_cast<Eigen::Index>(config_.latent_dim),
                           config_.sigma0);
}

std::vector<nn::Parameter*> SpVaeModel::parameters() {
  std::vector<nn::Parameter*> out = encoder_.parameters();
  out.push_back(&offsets_);
  out.push_back(&orientations_);
  for (nn::Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

void SpVaeModel::set_training(bool on) {
  encoder_.set_training(on);
  decoder_.set_training(on);
}

json SpVaeModel::architecture() const {
  return {{"encoder", encoder_.spec()},
          {"decoder", decoder_.spec()},
          {"gyroplane", {{"width", config_.gyro_width}, {"dim", config_.latent_dim}, {"curvature", config_.curvature}}}};
}

SpVaeModel::Posterior SpVaeModel::posterior(const Tensor& x, nn::GradientTape* tape) {
  const Tensor head = encoder_.forward(x, tape);
  const double k = config_.curvature;
  const auto n = static_cast<Eigen::Index>(head.dim(0));
  const auto d = static_cast<Eigen::Index>(config_.latent_dim);
  const auto H = head.matrix();
  Posterior p;
  p.pre = H.leftCols(d);
  p.s = H.rightCols(d);
  p.e = p.pre;
  if (k != 0.0) {
    const double rmax = k > 0.0 ? kChartFraction * std::numbers::pi / (2.0 * std::sqrt(k))
                                : kMaxTangentNorm / std::sqrt(-k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = p.pre.row(i).norm();
      if (r > rmax) {
        p.e.row(i) *= rmax / r;
        ++clamp_events_;
      }
    }
  }
  p.mu.resize(n, d);
  p.sigma.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.mu.row(i) = gc::project(k, gc::expmap0(k, p.e.row(i).transpose())).transpose();
    for (Eigen::Index t = 0; t < d; ++t) p.sigma(i, t) = softplus(p.s(i, t)) + kSigmaFloor;
  }
  return p;
}

Tensor SpVaeModel::gyro_features(const Eigen::MatrixXd& z) const {
  const std::size_t n = static_cast<std::size_t>(z.rows());
  const std::size_t m = config_.gyro_width;
  const std::size_t d = config_.latent_dim;
  const double k = config_.curvature;
  Tensor h({n, m});
  parallel_for(n, [&](std::size_t i) {
    const Vec zi = z.row(static_cast<Eigen::Index>(i)).transpose();
    for (std::size_t j = 0; j < m; ++j) {
      const Vec p = Eigen::Map<const Vec>(offsets_.value.data() + j * d, static_cast<Eigen::Index>(d));
      const Vec a = Eigen::Map<const Vec>(orientations_.value.data() + j * d, static_cast<Eigen::Index>(d));
      h[i * m + j] = gyroplane::coords::feature(k, zi, p, a);
    }
  });
  return h;
}

Tensor SpVaeModel::decode_features(const Tensor& h, nn::GradientTape* tape) { return decoder_.forward(h, tape); }

// ---------------------------------------------------------------- operations

std::vector<dist::WrappedNormal> encode(SpVaeModel& model, const Tensor& x) {
  model.set_training(false);
  const auto p = model.posterior(x, nullptr);
  const geometry::Curvature k(model.curvature());
  std::vector<dist::WrappedNormal> out;
  out.reserve(static_cast<std::size_t>(p.mu.rows()));
  for (Eigen::Index i = 0; i < p.mu.rows(); ++i) {
    out.emplace_back(ManifoldPoint(k, p.mu.row(i).transpose()), p.sigma.row(i).transpose());
  }
  return out;
}

Eigen::MatrixXd posterior_means(SpVaeModel& model, const Tensor& x) {
  model.set_training(false);
  return model.posterior(x, nullptr).mu;
}

Tensor decode(SpVaeModel& model, std::span<const ManifoldPoint> z) {
  if (z.empty()) throw EmptyInputError("decode: no latent points");
  const auto d = static_cast<Eigen::Index>(model.config().latent_dim);
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(z.size()), d);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i].dim() != d || z[i].curvature().value() != model.curvature()) {
      throw ShapeError("decode: latent point does not live in the model's space");
    }
    Z.row(static_cast<Eigen::Index>(i)) = z[i].coords().transpose();
  }
  model.set_training(false);
  return model.decode_features(model.gyro_features(Z), nullptr);
}

Tensor decode(SpVaeModel& model, const ManifoldPoint& z) { return decode(model, std::span<const ManifoldPoint>(&z, 1)); }

ElboReport elbo(SpVaeModel& model, const Tensor& x, std::size_t n_mc, SeededRng& rng) {
  if (n_mc < 1) throw DomainError("elbo: n_mc must be >= 1");
  const auto& c = model.config();
  const double k = c.curvature;
  model.set_training(false);
  const auto post = model.posterior(x, nullptr);
  const auto n = post.mu.rows();
  const auto d = post.mu.cols();

  std::vector<double> recon_draws(n_mc, 0.0);
  std::size_t redraws = 0;
  for (std::size_t r = 0; r < n_mc; ++r) {
    Eigen::MatrixXd Z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec mu = post.mu.row(i).transpose();
      const Vec sigma = post.sigma.row(i).transpose();
      const Vec eps = draw_noise(k, sigma, rng, redraws);
      Z.row(i) = dist::coords::reparam(k, mu, sigma, eps).transpose();
    }
    const Tensor x_hat = model.decode_features(model.gyro_features(Z), nullptr);
    const auto per = nll_per_sample(x_hat, x, c);
    double s = 0.0;
    for (double v : per) s += v;
    recon_draws[r] = s / static_cast<double>(n);
  }

  const dist::LatentPrior prior = model.prior();
  const geometry::Curvature kk(k);
  double kl = 0.0, kl_var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const dist::WrappedNormal q(ManifoldPoint(kk, post.mu.row(i).transpose()), post.sigma.row(i).transpose());
    const dist::KlEstimate e = dist::kl_mc(q, prior, n_mc, rng);
    kl += e.estimate;
    kl_var += e.std_error * e.std_error;
  }

  ElboReport rep;
  double mean = 0.0;
  for (double v : recon_draws) mean += v;
  mean /= static_cast<double>(n_mc);
  double var = 0.0;
  for (double v : recon_draws) var += (v - mean) * (v - mean);
  rep.recon = mean;
  rep.recon_se = n_mc > 1 ? std::sqrt(var / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc)) : 0.0;
  rep.kl = kl / static_cast<double>(n);
  rep.kl_se = std::sqrt(kl_var) / static_cast<double>(n);
  rep.beta = model.beta_state().beta;
  rep.total = rep.recon + rep.beta * rep.kl;
  rep.total_se = std::sqrt(rep.recon_se * rep.recon_se + rep.beta * rep.beta * rep.kl_se * rep.kl_se);
  return rep;
}

StepStats forward_backward(SpVaeModel& model, const Tensor& x, SeededRng& rng) {
  const auto& c = model.config();
  const double k = c.curvature;
  const double beta = model.beta_state().beta;
  const std::size_t draws = c.n_mc_train;
  model.set_training(true);

  nn::GradientTape enc_tape;
  const auto post = model.posterior(x, &enc_tape);
  const auto n = post.mu.rows();
  const auto d = post.mu.cols();
  const auto nd = static_cast<std::size_t>(n);

  StepStats st;
  // Draw-major stacking: row r * n + i holds draw r of sample i.
  Eigen::MatrixXd Z(n * static_cast<Eigen::Index>(draws), d);
  std::vector<Vec> eps(nd * draws);
  Eigen::MatrixXd g_mu = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd g_sigma = Eigen::MatrixXd::Zero(n, d);
  const double kl_weight = beta / static_cast<double>(nd * draws);
  double kl_sum = 0.0;
  for (std::size_t r = 0; r < draws; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec mu = post.mu.row(i).transpose();
      const Vec sigma = post.sigma.row(i).transpose();
      Vec e = draw_noise(k, sigma, rng, st.redraws);
      const dist::coords::KlSample ks = dist::coords::kl_sample(k, mu, sigma, c.sigma0, e);
      kl_sum += ks.value;
      g_mu.row(i) += kl_weight * ks.g_mu.transpose();
      g_sigma.row(i) += kl_weight * ks.g_sigma.transpose();
      Z.row(static_cast<Eigen::Index>(r) * n + i) = ks.z.transpose();
      eps[r * nd + static_cast<std::size_t>(i)] = std::move(e);
    }
  }

  nn::GradientTape dec_tape;
  const Tensor h = model.gyro_features(Z);
  const Tensor x_rep = repeat_batch(x, draws);
  const Tensor x_hat = model.decode_features(h, &dec_tape);
  const nn::LossValue loss = likelihood_loss(x_hat, x_rep, c);
  if (!std::isfinite(loss.value)) throw NumericError("spvae: non-finite reconstruction loss");
  double se = 0.0;
  for (std::size_t j = 0; j < x_hat.size(); ++j) se += (x_hat[j] - x_rep[j]) * (x_hat[j] - x_rep[j]);

  const Tensor g_h = dec_tape.backward(loss.grad);

  // Gyroplane layer, by hand.
  nn::Parameter& P = model.offsets();
  nn::Parameter& A = model.orientations();
  P.zero_grad();
  A.zero_grad();
  const std::size_t m = c.gyro_width;
  const std::size_t dd = c.latent_dim;
  const std::size_t rows = nd * draws;
  std::vector<Vec> g_z(rows, Vec::Zero(d));
  for (std::size_t row = 0; row < rows; ++row) {
    const Vec zi = Z.row(static_cast<Eigen::Index>(row)).transpose();
    for (std::size_t j = 0; j < m; ++j) {
      const double up = g_h[row * m + j];
      if (up == 0.0) continue;
      const Vec p = Eigen::Map<const Vec>(P.value.data() + j * dd, d);
      const Vec a = Eigen::Map<const Vec>(A.value.data() + j * dd, d);
      const auto fg = gyroplane::coords::feature_vjp(k, zi, p, a, up);
      g_z[row] += fg.gz;
      Eigen::Map<Vec>(P.grad.data() + j * dd, d) += fg.gp;
      Eigen::Map<Vec>(A.grad.data() + j * dd, d) += fg.ga;
    }
  }

  // Reparameterization, softplus and exp_0, by hand.
  Tensor g_head({nd, 2 * dd});
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec mu = post.mu.row(i).transpose();
    const Vec sigma = post.sigma.row(i).transpose();
    Vec gm = g_mu.row(i).transpose();
    Vec gs = g_sigma.row(i).transpose();
    for (std::size_t r = 0; r < draws; ++r) {
      const std::size_t row = r * nd + static_cast<std::size_t>(i);
      const auto rg = dist::coords::reparam_vjp(k, mu, sigma, eps[row], g_z[row]);
      gm += rg.g_mu;
      gs += rg.g_sigma;
    }
    const Vec e = post.e.row(i).transpose();
    Vec ge = gc::exp_map_vjp(k, Vec::Zero(d), e, gm).gy;
    const Vec pre = post.pre.row(i).transpose();
    if ((pre - e).squaredNorm() > 0.0) {
      // e = rmax * pre / |pre|
      const double r = pre.norm();
      const Vec u = pre / r;
      ge = (e.norm() / r) * (ge - u.dot(ge) * u);
    }
    for (Eigen::Index t = 0; t < d; ++t) {
      g_head[static_cast<std::size_t>(i) * 2 * dd + static_cast<std::size_t>(t)] = ge[t];
      g_head[static_cast<std::size_t>(i) * 2 * dd + dd + static_cast<std::size_t>(t)] = gs[t] * sigmoid(post.s(i, t));
    }
  }
  enc_tape.backward(g_head);

  st.recon = loss.value;
  st.kl = kl_sum / static_cast<double>(rows);
  st.total = st.recon + beta * st.kl;
  st.pixel_se = se / static_cast<double>(x_hat.size());
  if (!std::isfinite(st.total)) throw NumericError("spvae: non-finite loss");
  return st;
}

namespace {

struct Snapshot {
  std::vector<Tensor> values;
  BetaState beta;
};

Snapshot take(SpVaeModel& model) {
  Snapshot s;
  for (nn::Parameter* p : model.parameters()) s.values.push_back(p->value);
  s.beta = model.beta_state();
  return s;
}

void restore(SpVaeModel& model, const Snapshot& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
  model.beta_state() = s.beta;
}

}  // namespace

FitResult fit(SpVaeModel& model, const Tensor& train, const Tensor& valid, SeededRng& rng) {
  const auto& c = model.config();
  if (train.rank() == 0 || train.dim(0) == 0) throw EmptyInputError("fit: empty training set");
  const std::size_t n = train.dim(0);
  nn::RiemannianAdam opt(model.parameters(), nn::AdamConfig{c.lr, 0.9, 0.999, 1e-8});
  const SeededRng val_base = rng.fork(0x7661);

  FitResult res;
  res.best_val = std::numeric_limits<double>::infinity();
  std::optional<Snapshot> best;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= c.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double recon = 0.0, kl = 0.0, total = 0.0, pixel = 0.0;
    const double beta_used = model.beta_state().beta;
    try {
      for (std::size_t b = 0; b < n; b += c.batch_size) {
        const std::size_t e = std::min(n, b + c.batch_size);
        const Tensor batch = gather(train, order, b, e);
        const StepStats st = forward_backward(model, batch, rng);
        opt.step();
        const double w = static_cast<double>(e - b);
        recon += w * st.recon;
        kl += w * st.kl;
        total += w * st.total;
        pixel += w * st.pixel_se;
      }
    } catch (const NumericError& err) {
      res.aborted = true;
      res.abort_reason = err.what();
      break;
    }
    const double nn_ = static_cast<double>(n);
    HistoryRow row{epoch, recon / nn_, kl / nn_, beta_used, total / nn_, total / nn_};
    if (valid.rank() > 0 && valid.dim(0) > 0) {
      SeededRng vr = val_base;
      row.val_total = elbo(model, valid, 1, vr).total;
    }
    res.history.push_back(row);
    beta_update(model.beta_state(), pixel / nn_);

    if (std::isfinite(row.val_total) && row.val_total < res.best_val) {
      res.best_val = row.val_total;
      res.best_epoch = epoch;
      best = take(model);
    }
    if (epoch >= c.warmup_epochs && epoch - res.best_epoch >= c.lookahead_epochs) {
      res.stopped_early = true;
      break;
    }
  }
  if (best) restore(model, *best);
  return res;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string out = "epoch,recon,kl,beta,total,val_total\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + fmt(r.recon) + "," + fmt(r.kl) + "," + fmt(r.beta) + "," + fmt(r.total) +
           "," + fmt(r.val_total) + "\n";
  }
  return out;
}

Reconstruction reconstruct(SpVaeModel& model, const Tensor& x) {
  model.set_training(false);
  const auto post = model.posterior(x, nullptr);
  Reconstruction r;
  r.x_hat = model.decode_features(model.gyro_features(post.mu), nullptr);
  r.error = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) r.error[i] = (x[i] - r.x_hat[i]) * (x[i] - r.x_hat[i]);
  return r;
}

}  // namespace gyrolatent::spvae

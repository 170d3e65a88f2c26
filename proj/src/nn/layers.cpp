#include "gyrolatent/nn/layers.hpp"

#include <cmath>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/parallel.hpp"

namespace gyrolatent::nn {

namespace {

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void require_rank(const Shape& s, std::size_t r, const std::string& who) {
  if (s.size() != r) throw ShapeError(who + ": expected rank " + std::to_string(r) + ", got " + shape_string(s));
}

// Patch matrix of a batch: rows (c, ki, kj), columns (n, oh, ow).
struct Geometry {
  std::size_t n, c, h, w, k, stride, pad, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t cols() const { return n * oh * ow; }
};

void im2col(const Geometry& g, const double* img, RowMatrix& cols) {
  cols.resize(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.cols()));
  const std::size_t hw_out = g.oh * g.ow;
  parallel_for(g.n, [&](std::size_t n) {
    {
      const double* src = img + n * g.c * g.h * g.w;
      for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ki = 0; ki < g.k; ++ki) {
          for (std::size_t kj = 0; kj < g.k; ++kj) {
            const std::size_t row = (c * g.k + ki) * g.k + kj;
            double* dst = cols.data() + row * g.cols() + n * hw_out;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
              for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) &&
                                    ix < static_cast<long>(g.w);
                dst[oy * g.ow + ox] =
                    inside ? src[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : 0.0;
              }
            }
          }
        }
      }
    }
  });
}

// Adjoint of im2col: scatters patch columns back into a zeroed image batch.
void col2im(const Geometry& g, const RowMatrix& cols, double* img) {
  const std::size_t hw_out = g.oh * g.ow;
  parallel_for(g.n, [&](std::size_t n) {
    {
      double* dst = img + n * g.c * g.h * g.w;
      for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ki = 0; ki < g.k; ++ki) {
          for (std::size_t kj = 0; kj < g.k; ++kj) {
            const std::size_t row = (c * g.k + ki) * g.k + kj;
            const double* src = cols.data() + row * g.cols() + n * hw_out;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
              if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
              for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                dst[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                    src[oy * g.ow + ox];
              }
            }
          }
        }
      }
    }
  });
}

// [C, N*HW] <-> [N, C, HW]
void channel_major_to_batch(const RowMatrix& m, std::size_t n, std::size_t hw, double* out) {
  const std::size_t c = static_cast<std::size_t>(m.rows());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(m.data() + ch * n * hw + i * hw, hw, out + (i * c + ch) * hw);
}

RowMatrix batch_to_channel_major(const double* in, std::size_t n, std::size_t c, std::size_t hw) {
  RowMatrix m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n * hw));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(in + (i * c + ch) * hw, hw, m.data() + ch * n * hw + i * hw);
  return m;
}

void uniform_fill(Tensor& t, double bound, dist::SeededRng& rng) {
  for (double& v : t.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out, std::string name, bool bias)
    : in_(in), out_(out), has_bias_(bias), weight_(name + ".weight", Tensor({out, in})), bias_(name + ".bias", Tensor({out})) {
  if (in == 0 || out == 0) throw ShapeError("Dense: zero width");
  bias_.decay = false;
}

void Dense::init(dist::SeededRng& rng, double fan_gain) {
  uniform_fill(weight_.value, std::sqrt(fan_gain / static_cast<double>(in_)), rng);
  bias_.value.fill(0.0);
}

std::vector<Parameter*> Dense::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

Shape Dense::output_shape(const Shape& input) const {
  if (input != Shape{in_}) throw ShapeError("dense expects " + shape_string({in_}) + ", got " + shape_string(input));
  return {out_};
}

Tensor Dense::forward(const Tensor& x, GradientTape* tape) {
  const std::size_t n = x.dim(0);
  Tensor y({n, out_});
  auto W = weight_.value.matrix();
  y.matrix().noalias() = x.matrix() * W.transpose();
  y.matrix().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.value.data(), static_cast<Eigen::Index>(out_));
  if (tape) {
    tape->record(
        "dense",
        [this, x](const Tensor& gy) {
          weight_.grad.matrix().noalias() += gy.matrix().transpose() * x.matrix();
          if (has_bias_) {
            Eigen::Map<Eigen::RowVectorXd>(bias_.grad.data(), static_cast<Eigen::Index>(out_)) +=
                gy.matrix().colwise().sum();
          }
          Tensor gx(x.shape());
          gx.matrix().noalias() = gy.matrix() * weight_.value.matrix();
          return gx;
        },
        parameters());
  }
  return y;
}

json Dense::spec() const {
  return {{"kind", kind()}, {"in", in_}, {"out", out_}, {"bias", has_bias_},
          {"name", weight_.name.substr(0, weight_.name.size() - 7)}};
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::string name,
               bool bias)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(kernel / 2),
      has_bias_(bias),
      weight_(name + ".weight", Tensor({out_ch, in_ch, kernel, kernel})),
      bias_(name + ".bias", Tensor({out_ch})) {
  if (kernel % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (stride == 0 || in_ch == 0 || out_ch == 0) throw ShapeError("conv2d: zero stride or channel count");
  bias_.decay = false;
}

void Conv2d::init(dist::SeededRng& rng) {
  uniform_fill(weight_.value, std::sqrt(6.0 / static_cast<double>(in_ch_ * kernel_ * kernel_)), rng);
  bias_.value.fill(0.0);
}

std::vector<Parameter*> Conv2d::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

Shape Conv2d::output_shape(const Shape& input) const {
  require_rank(input, 3, "conv2d");
  if (input[0] != in_ch_) throw ShapeError("conv2d expects " + std::to_string(in_ch_) + " channels, got " + shape_string(input));
  return {out_ch_, conv_out(input[1], kernel_, stride_, pad_), conv_out(input[2], kernel_, stride_, pad_)};
}

Tensor Conv2d::forward(const Tensor& x, GradientTape* tape) {
  require_rank(x.shape(), 4, "conv2d");
  const Shape os = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  Geometry g{x.dim(0), in_ch_, x.dim(2), x.dim(3), kernel_, stride_, pad_, os[1], os[2]};
  auto cols = std::make_shared<RowMatrix>();
  im2col(g, x.data(), *cols);
  ConstMatrixMap W(weight_.value.data(), static_cast<Eigen::Index>(out_ch_), static_cast<Eigen::Index>(g.patch()));
  RowMatrix out = W * *cols;
  const Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), static_cast<Eigen::Index>(out_ch_));
  out.colwise() += b;
  Tensor y({g.n, out_ch_, g.oh, g.ow});
  channel_major_to_batch(out, g.n, g.oh * g.ow, y.data());
  if (tape) {
    tape->record(
        "conv2d",
        [this, g, cols](const Tensor& gy) {
          const RowMatrix go = batch_to_channel_major(gy.data(), g.n, out_ch_, g.oh * g.ow);
          MatrixMap gW(weight_.grad.data(), static_cast<Eigen::Index>(out_ch_), static_cast<Eigen::Index>(g.patch()));
          gW.noalias() += go * cols->transpose();
          if (has_bias_) {
            Eigen::Map<Eigen::VectorXd>(bias_.grad.data(), static_cast<Eigen::Index>(out_ch_)) += go.rowwise().sum();
          }
          ConstMatrixMap Wv(weight_.value.data(), static_cast<Eigen::Index>(out_ch_), static_cast<Eigen::Index>(g.patch()));
          const RowMatrix gcols = Wv.transpose() * go;
          Tensor gx({g.n, g.c, g.h, g.w});
          col2im(g, gcols, gx.data());
          return gx;
        },
        parameters());
  }
  return y;
}

json Conv2d::spec() const {
  return {{"kind", kind()}, {"in", in_ch_}, {"out", out_ch_}, {"kernel", kernel_}, {"stride", stride_},
          {"bias", has_bias_},
          {"name", weight_.name.substr(0, weight_.name.size() - 7)}};
}

// ---------------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                                 std::string name)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(kernel / 2),
      weight_(name + ".weight", Tensor({in_ch, out_ch, kernel, kernel})),
      bias_(name + ".bias", Tensor({out_ch})) {
  if (kernel % 2 == 0) throw ShapeError("conv_transpose2d: kernel size must be odd");
  if (stride == 0 || in_ch == 0 || out_ch == 0) throw ShapeError("conv_transpose2d: zero stride or channel count");
  bias_.decay = false;
}

void ConvTranspose2d::init(dist::SeededRng& rng) {
  // fan-in of the equivalent gathering convolution
  const double fan_in = static_cast<double>(in_ch_ * kernel_ * kernel_) / static_cast<double>(stride_ * stride_);
  uniform_fill(weight_.value, std::sqrt(6.0 / fan_in), rng);
  bias_.value.fill(0.0);
}

Shape ConvTranspose2d::output_shape(const Shape& input) const {
  require_rank(input, 3, "conv_transpose2d");
  if (input[0] != in_ch_) {
    throw ShapeError("conv_transpose2d expects " + std::to_string(in_ch_) + " channels, got " + shape_string(input));
  }
  const std::size_t op = stride_ - 1;
  auto grow = [&](std::size_t s) { return (s - 1) * stride_ + kernel_ + op - 2 * pad_; };
  return {out_ch_, grow(input[1]), grow(input[2])};
}

Tensor ConvTranspose2d::forward(const Tensor& x, GradientTape* tape) {
  require_rank(x.shape(), 4, "conv_transpose2d");
  const Shape os = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  // The equivalent convolution runs from the output (os) back to the input size.
  Geometry g{x.dim(0), out_ch_, os[1], os[2], kernel_, stride_, pad_, x.dim(2), x.dim(3)};
  const std::size_t patch = g.patch();
  const RowMatrix xin = batch_to_channel_major(x.data(), g.n, in_ch_, g.oh * g.ow);
  ConstMatrixMap W(weight_.value.data(), static_cast<Eigen::Index>(in_ch_), static_cast<Eigen::Index>(patch));
  const RowMatrix cols = W.transpose() * xin;
  Tensor y({g.n, out_ch_, os[1], os[2]});
  col2im(g, cols, y.data());
  const std::size_t hw = os[1] * os[2];
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < out_ch_; ++c) {
      double* p = y.data() + (n * out_ch_ + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] += bias_.value[c];
    }
  if (tape) {
    auto xin_ptr = std::make_shared<RowMatrix>(std::move(xin));
    tape->record(
        "conv_transpose2d",
        [this, g, xin_ptr, patch](const Tensor& gy) {
          RowMatrix gcols;
          im2col(g, gy.data(), gcols);
          MatrixMap gW(weight_.grad.data(), static_cast<Eigen::Index>(in_ch_), static_cast<Eigen::Index>(patch));
          gW.noalias() += *xin_ptr * gcols.transpose();
          const std::size_t hw_out = g.h * g.w;
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t c = 0; c < out_ch_; ++c) {
              const double* p = gy.data() + (n * out_ch_ + c) * hw_out;
              double s = 0.0;
              for (std::size_t i = 0; i < hw_out; ++i) s += p[i];
              bias_.grad[c] += s;
            }
          ConstMatrixMap Wv(weight_.value.data(), static_cast<Eigen::Index>(in_ch_), static_cast<Eigen::Index>(patch));
          const RowMatrix gxin = Wv * gcols;
          Tensor gx({g.n, in_ch_, g.oh, g.ow});
          channel_major_to_batch(gxin, g.n, g.oh * g.ow, gx.data());
          return gx;
        },
        {&weight_, &bias_});
  }
  return y;
}

json ConvTranspose2d::spec() const {
  return {{"kind", kind()}, {"in", in_ch_}, {"out", out_ch_}, {"kernel", kernel_}, {"stride", stride_},
          {"name", weight_.name.substr(0, weight_.name.size() - 7)}};
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double momentum, double eps, std::string name)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".gamma", Tensor({channels}, 1.0)),
      beta_(name + ".beta", Tensor({channels})),
      running_mean_(name + ".running_mean", Tensor({channels})),
      running_var_(name + ".running_var", Tensor({channels}, 1.0)) {
  gamma_.decay = beta_.decay = false;
  running_mean_.trainable = running_var_.trainable = false;
  running_mean_.decay = running_var_.decay = false;
}

Shape BatchNorm::output_shape(const Shape& input) const {
  if (input.empty() || input[0] != channels_) {
    throw ShapeError("batchnorm expects " + std::to_string(channels_) + " channels, got " + shape_string(input));
  }
  return input;
}

Tensor BatchNorm::forward(const Tensor& x, GradientTape* tape) {
  const std::size_t n = x.dim(0);
  const std::size_t c = channels_;
  const std::size_t inner = x.size() / (n * c);
  const double m = static_cast<double>(n * inner);
  auto at = [&](std::size_t i, std::size_t ch) { return (i * c + ch) * inner; };

  std::vector<double> mean(c), invstd(c);
  if (training_) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) s += x[at(i, ch) + j];
      const double mu = s / m;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) v += (x[at(i, ch) + j] - mu) * (x[at(i, ch) + j] - mu);
      const double var = v / m;
      mean[ch] = mu;
      invstd[ch] = 1.0 / std::sqrt(var + eps_);
      const double unbiased = m > 1.0 ? v / (m - 1.0) : var;
      running_mean_.value[ch] = momentum_ * running_mean_.value[ch] + (1.0 - momentum_) * mu;
      running_var_.value[ch] = momentum_ * running_var_.value[ch] + (1.0 - momentum_) * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean_.value[ch];
      invstd[ch] = 1.0 / std::sqrt(running_var_.value[ch] + eps_);
    }
  }

  Tensor xhat(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t idx = at(i, ch) + j;
        xhat[idx] = (x[idx] - mean[ch]) * invstd[ch];
        y[idx] = gamma_.value[ch] * xhat[idx] + beta_.value[ch];
      }

  if (tape) {
    const bool batch_stats = training_;
    tape->record(
        "batchnorm",
        [this, xhat, invstd, n, c, inner, m, batch_stats](const Tensor& gy) {
          auto at2 = [&](std::size_t i, std::size_t ch) { return (i * c + ch) * inner; };
          Tensor gx(gy.shape());
          for (std::size_t ch = 0; ch < c; ++ch) {
            double sg = 0.0, sgx = 0.0;
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < inner; ++j) {
                const std::size_t idx = at2(i, ch) + j;
                sg += gy[idx];
                sgx += gy[idx] * xhat[idx];
              }
            gamma_.grad[ch] += sgx;
            beta_.grad[ch] += sg;
            const double scale = gamma_.value[ch] * invstd[ch];
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < inner; ++j) {
                const std::size_t idx = at2(i, ch) + j;
                gx[idx] = batch_stats ? scale * (gy[idx] - sg / m - xhat[idx] * sgx / m) : scale * gy[idx];
              }
          }
          return gx;
        },
        {&gamma_, &beta_});
  }
  return y;
}

json BatchNorm::spec() const {
  return {{"kind", kind()}, {"channels", channels_}, {"momentum", momentum_}, {"eps", eps_},
          {"name", gamma_.name.substr(0, gamma_.name.size() - 6)}};
}

// ---------------------------------------------------------------- elementwise

Tensor LeakyRelu::forward(const Tensor& x, GradientTape* tape) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope_ * x[i];
  if (tape) {
    tape->record("leaky_relu", [x, s = slope_](const Tensor& gy) {
      Tensor gx(gy.shape());
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = x[i] > 0.0 ? gy[i] : s * gy[i];
      return gx;
    });
  }
  return y;
}

Tensor Sigmoid::forward(const Tensor& x, GradientTape* tape) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  if (tape) {
    tape->record("sigmoid", [y](const Tensor& gy) {
      Tensor gx(gy.shape());
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * y[i] * (1.0 - y[i]);
      return gx;
    });
  }
  return y;
}

Tensor Flatten::forward(const Tensor& x, GradientTape* tape) {
  const Shape in = x.shape();
  Tensor y = x.reshaped({in[0], x.size() / in[0]});
  if (tape) tape->record("flatten", [in](const Tensor& gy) { return gy.reshaped(in); });
  return y;
}

Shape Reshape::output_shape(const Shape& input) const {
  if (numel(input) != numel(target_)) {
    throw ShapeError("reshape " + shape_string(input) + " -> " + shape_string(target_));
  }
  return target_;
}

Tensor Reshape::forward(const Tensor& x, GradientTape* tape) {
  const Shape in = x.shape();
  Shape out = target_;
  out.insert(out.begin(), in[0]);
  Tensor y = x.reshaped(out);
  if (tape) tape->record("reshape", [in](const Tensor& gy) { return gy.reshaped(in); });
  return y;
}

// ---------------------------------------------------------------- Sequential

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
  const Shape& in = shapes_.empty() ? input_shape_ : shapes_.back();
  try {
    shapes_.push_back(layer->output_shape(in));
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(layers_.size()) + " (" + layer->kind() + "): " + e.what());
  }
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Shape Sequential::output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }

Tensor Sequential::forward(const Tensor& x, GradientTape* tape) {
  Shape sample(x.shape().begin() + (x.rank() ? 1 : 0), x.shape().end());
  if (x.rank() == 0 || sample != input_shape_) {
    throw ShapeError("layer 0 (" + (layers_.empty() ? std::string("identity") : layers_[0]->kind()) +
                     "): expected per-sample shape " + shape_string(input_shape_) + ", got " +
                     shape_string(x.shape()));
  }
  if (x.dim(0) == 0) throw EmptyInputError("Sequential::forward: empty batch");
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      h = layers_[i]->forward(h, tape);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + layers_[i]->kind() + "): " + e.what());
    }
  }
  return h;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Sequential::set_training(bool on) {
  for (auto& l : layers_) l->set_training(on);
}

json Sequential::spec() const {
  json layers = json::array();
  for (const auto& l : layers_) layers.push_back(l->spec());
  return {{"input_shape", input_shape_}, {"layers", layers}};
}

Sequential Sequential::from_spec(const json& j) {
  Sequential s(j.at("input_shape").get<Shape>());
  for (const json& l : j.at("layers")) {
    const std::string kind = l.at("kind").get<std::string>();
    if (kind == "dense") {
      s.emplace<Dense>(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(), l.at("name").get<std::string>(),
                      l.value("bias", true));
    } else if (kind == "conv2d") {
      s.emplace<Conv2d>(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                        l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>(),
                        l.at("name").get<std::string>(), l.value("bias", true));
    } else if (kind == "conv_transpose2d") {
      s.emplace<ConvTranspose2d>(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                 l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>(),
                                 l.at("name").get<std::string>());
    } else if (kind == "batchnorm") {
      s.emplace<BatchNorm>(l.at("channels").get<std::size_t>(), l.at("momentum").get<double>(),
                           l.at("eps").get<double>(), l.at("name").get<std::string>());
    } else if (kind == "leaky_relu") {
      s.emplace<LeakyRelu>(l.at("slope").get<double>());
    } else if (kind == "sigmoid") {
      s.emplace<Sigmoid>();
    } else if (kind == "flatten") {
      s.emplace<Flatten>();
    } else if (kind == "reshape") {
      s.emplace<Reshape>(l.at("shape").get<Shape>());
    } else {
      throw ShapeError("unknown layer kind '" + kind + "'");
    }
  }
  return s;
}

}  // namespace gyrolatent::nn

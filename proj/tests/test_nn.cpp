#include <gtest/gtest.h>

#include <cmath>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/geometry.hpp"
#include "gyrolatent/nn/layers.hpp"
#include "gyrolatent/nn/loss.hpp"
#include "gyrolatent/nn/optim.hpp"
#include "gyrolatent/nn/serialize.hpp"
#include "layer_check.hpp"
#include "support.hpp"

using namespace gyrolatent;
using namespace gyrolatent::nn;

using gyrolatent::testing::layer_grad_error;
using gyrolatent::testing::random_tensor;
using gyrolatent::testing::dot;

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  EXPECT_EQ(t.slice(1).shape(), (Shape{3}));
  t[0] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Tape, SecondBackwardRaises) {
  std::mt19937_64 gen(1);
  Dense d(3, 2);
  dist::SeededRng rng(1);
  d.init(rng);
  GradientTape tape;
  const Tensor y = d.forward(random_tensor({4, 3}, gen), &tape);
  tape.backward(Tensor(y.shape(), 1.0));
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(Tensor(y.shape(), 1.0)), StateError);
}

TEST(Tape, BackwardZeroesStaleGradients) {
  std::mt19937_64 gen(2);
  Dense d(3, 2);
  dist::SeededRng rng(2);
  d.init(rng);
  const Tensor x = random_tensor({4, 3}, gen);
  Tensor g1, g2;
  for (Tensor* g : {&g1, &g2}) {
    GradientTape tape;
    d.forward(x, &tape);
    tape.backward(Tensor({4, 2}, 1.0));
    *g = d.weight().grad;
  }
  EXPECT_EQ(g1, g2);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(3);
  dist::SeededRng rng(3);
  for (int t = 0; t < 10; ++t) {
    Dense d(5, 4, "d", t % 2 == 0);
    d.init(rng);
    EXPECT_LT(layer_grad_error(d, random_tensor({3, 5}, gen), gen), 1e-5);
  }
}

TEST(Conv2d, ImpulseResponseIsTheFlippedKernel) {
  Conv2d conv(1, 1, 3, 1, "c", false);
  for (std::size_t i = 0; i < 9; ++i) conv.weight().value[i] = static_cast<double>(i + 1);
  Tensor x({1, 1, 5, 5});
  x[2 * 5 + 2] = 1.0;
  const Tensor y = conv.forward(x, nullptr);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
  for (int u = 0; u < 3; ++u) {
    for (int v = 0; v < 3; ++v) {
      EXPECT_EQ(y[static_cast<std::size_t>((3 - u) * 5 + (3 - v))], conv.weight().value[static_cast<std::size_t>(u * 3 + v)]);
    }
  }
  EXPECT_EQ(y[0], 0.0);
}

TEST(Conv2d, StrideHalvesSpatialSize) {
  Conv2d conv(2, 3, 5, 2);
  EXPECT_EQ(conv.output_shape({2, 32, 32}), (Shape{3, 16, 16}));
  EXPECT_THROW(conv.output_shape({3, 32, 32}), ShapeError);
  EXPECT_THROW(Conv2d(1, 1, 4, 1), ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(4);
  dist::SeededRng rng(4);
  for (int t = 0; t < 10; ++t) {
    Conv2d conv(2, 3, t % 2 ? 3 : 5, t % 3 == 0 ? 2 : 1);
    conv.init(rng);
    EXPECT_LT(layer_grad_error(conv, random_tensor({2, 2, 6, 6}, gen), gen), 1e-5);
  }
}

TEST(ConvTranspose2d, IsTheAdjointOfConv) {
  std::mt19937_64 gen(5);
  dist::SeededRng rng(5);
  for (std::size_t stride : {1u, 2u}) {
    Conv2d conv(2, 3, 3, stride, "c", false);
    conv.init(rng);
    ConvTranspose2d deconv(3, 2, 3, stride);
    deconv.weight().value = conv.weight().value.reshaped(deconv.weight().value.shape());
    const Tensor x = random_tensor({2, 2, 8, 8}, gen);
    const Tensor cx = conv.forward(x, nullptr);
    const Tensor y = random_tensor(cx.shape(), gen);
    const Tensor ty = deconv.forward(y, nullptr);
    ASSERT_EQ(ty.shape(), x.shape());
    EXPECT_NEAR(dot(cx, y), dot(x, ty), 1e-10 * std::abs(dot(cx, y)) + 1e-12);
  }
}

TEST(ConvTranspose2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(6);
  dist::SeededRng rng(6);
  for (int t = 0; t < 10; ++t) {
    ConvTranspose2d deconv(3, 2, t % 2 ? 3 : 5, t % 3 == 0 ? 1 : 2);
    deconv.init(rng);
    EXPECT_LT(layer_grad_error(deconv, random_tensor({2, 3, 4, 4}, gen), gen), 1e-5);
  }
}

TEST(BatchNorm, TrainingGradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 10; ++t) {
    BatchNorm bn(3);
    for (std::size_t c = 0; c < 3; ++c) {
      bn.parameters()[0]->value[c] = 0.5 + 0.3 * static_cast<double>(c);
      bn.parameters()[1]->value[c] = 0.1 * static_cast<double>(c);
    }
    const Shape s = t % 2 ? Shape{4, 3} : Shape{4, 3, 2, 2};
    EXPECT_LT(layer_grad_error(bn, random_tensor(s, gen), gen), 1e-5);
  }
}

TEST(BatchNorm, EvaluationUsesRunningStatistics) {
  std::mt19937_64 gen(8);
  BatchNorm bn(2, 0.5);
  const Tensor x = random_tensor({6, 2}, gen, 3.0);
  bn.forward(x, nullptr);
  auto params = bn.parameters();
  const Tensor rm = params[2]->value, rv = params[3]->value;
  // one update from (0, 1) with momentum 0.5 and the unbiased batch variance
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 6; ++i) mean += x[i * 2 + c] / 6.0;
    for (std::size_t i = 0; i < 6; ++i) var += (x[i * 2 + c] - mean) * (x[i * 2 + c] - mean) / 5.0;
    EXPECT_NEAR(rm[c], 0.5 * mean, 1e-14);
    EXPECT_NEAR(rv[c], 0.5 + 0.5 * var, 1e-14);
  }
  bn.set_training(false);
  const Tensor y = bn.forward(x, nullptr);
  EXPECT_NEAR(y[3], (x[3] - rm[1]) / std::sqrt(rv[1] + 1e-5), 1e-14);
  EXPECT_EQ(params[2]->value, rm);
  EXPECT_LT(layer_grad_error(bn, x, gen), 1e-5);
}

TEST(Activations, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(9);
  for (int t = 0; t < 10; ++t) {
    LeakyRelu lr(0.01 + 0.1 * t);
    Sigmoid sg;
    Flatten fl;
    Reshape rs({2, 6});
    const Tensor x = random_tensor({3, 3, 4}, gen);
    EXPECT_LT(layer_grad_error(lr, x, gen), 1e-5);
    EXPECT_LT(layer_grad_error(sg, x, gen), 1e-5);
    EXPECT_LT(layer_grad_error(fl, x, gen), 1e-5);
    EXPECT_LT(layer_grad_error(rs, x, gen), 1e-5);
  }
}

TEST(Sequential, ReportsTheFailingLayer) {
  Sequential net({1, 8, 8});
  net.emplace<Conv2d>(1, 4, 3, 2);
  net.emplace<Flatten>();
  try {
    net.emplace<Dense>(100, 2);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(net.forward(Tensor({2, 1, 6, 6}), nullptr), ShapeError);
  EXPECT_THROW(net.forward(Tensor({0, 1, 8, 8}), nullptr), EmptyInputError);
}

TEST(Sequential, SpecRoundTrip) {
  Sequential net({1, 8, 8});
  net.emplace<Conv2d>(1, 4, 3, 2, "c", false);
  net.emplace<BatchNorm>(4);
  net.emplace<LeakyRelu>(0.2);
  net.emplace<Flatten>();
  net.emplace<Dense>(64, 3);
  net.emplace<Sigmoid>();
  const Sequential back = Sequential::from_spec(net.spec());
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(back.output_shape(), (Shape{3}));
}

TEST(Loss, BernoulliValuesAndGradient) {
  const Tensor p({1, 2}, std::vector<double>{0.8, 0.3});
  const Tensor t({1, 2}, std::vector<double>{1.0, 0.0});
  const LossValue l = bernoulli_nll(p, t);
  EXPECT_NEAR(l.value, -std::log(0.8) - std::log(0.7), 1e-15);
  EXPECT_NEAR(l.grad[0], -1.0 / 0.8, 1e-12);
  EXPECT_NEAR(l.grad[1], 1.0 / 0.7, 1e-12);
  EXPECT_THROW(bernoulli_nll(p, Tensor({1, 2}, std::vector<double>{1.2, 0.0})), DomainError);
  EXPECT_TRUE(std::isfinite(bernoulli_nll(Tensor({1, 1}, 0.0), Tensor({1, 1}, 1.0)).value));
}

TEST(Loss, GaussianIsHalfScaledSquaredError) {
  const Tensor a({2, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor b({2, 2}, std::vector<double>{1, 1, 1, 1});
  const LossValue l = gaussian_nll(a, b, 0.5);
  EXPECT_NEAR(l.value, 0.5 * (0 + 1 + 4 + 9) / 0.5 / 2, 1e-14);
  EXPECT_THROW(gaussian_nll(a, Tensor({2, 3}), 1.0), ShapeError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor({3}, std::vector<double>{1, -2, 3}));
  p.grad = Tensor({3}, std::vector<double>{0.5, -4.0, 1e-3});
  Adam opt({&p}, AdamConfig{0.1});
  opt.step();
  EXPECT_NEAR(p.value[0], 0.9, 1e-6);
  EXPECT_NEAR(p.value[1], -1.9, 1e-6);
  EXPECT_NEAR(p.value[2], 2.9, 1e-4);
}

TEST(Adam, NonFiniteGradientSkipsTheStep) {
  Parameter p("p", Tensor({2}, 1.0));
  p.grad = Tensor({2}, std::vector<double>{1.0, std::nan("")});
  Adam opt({&p});
  EXPECT_THROW(opt.step(), NumericError);
  EXPECT_EQ(opt.skipped_steps(), 1u);
  EXPECT_EQ(p.value, Tensor({2}, 1.0));
}

TEST(Adam, MinimizesAQuadratic) {
  Parameter p("p", Tensor({2}, std::vector<double>{3, -1}));
  Adam opt({&p}, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    p.grad = Tensor({2}, std::vector<double>{2 * (p.value[0] - 1), 2 * (p.value[1] + 2)});
    opt.step();
  }
  EXPECT_NEAR(p.value[0], 1.0, 1e-3);
  EXPECT_NEAR(p.value[1], -2.0, 1e-3);
}

TEST(RiemannianAdam, FlatCurvatureEqualsAdamWithScaledEpsilon) {
  std::mt19937_64 gen(10);
  Parameter a("a", random_tensor({4, 2}, gen)), b("b", a.value);
  a.manifold_curvature = 0.0;
  AdamConfig ca{0.01, 0.9, 0.999, 1e-3};
  AdamConfig cb = ca;
  cb.eps = 4 * ca.eps;
  RiemannianAdam ra({&a}, ca);
  Adam eb({&b}, cb);
  for (int s = 0; s < 50; ++s) {
    const Tensor g = random_tensor({4, 2}, gen);
    a.grad = g;
    b.grad = g;
    ra.step();
    eb.step();
  }
  for (std::size_t i = 0; i < a.value.size(); ++i) EXPECT_NEAR(a.value[i], b.value[i], 1e-12);
}

TEST(RiemannianAdam, ConvergesToATargetInTheBall) {
  namespace gc = geometry::coords;
  for (double k : {-1.0, 1.0}) {
    const geometry::Vec target = (geometry::Vec(2) << 0.6, -0.3).finished();
    Parameter p("p", Tensor({1, 2}, std::vector<double>{-0.5, 0.4}));
    p.manifold_curvature = k;
    RiemannianAdam opt({&p}, AdamConfig{0.01});
    for (int s = 0; s < 3000; ++s) {
      const geometry::Vec x = (geometry::Vec(2) << p.value[0], p.value[1]).finished();
      const double d = gc::distance(k, x, target);
      const geometry::Vec g = gc::distance_vjp(k, x, target, 2 * d).gx;
      p.grad = Tensor({1, 2}, std::vector<double>{g[0], g[1]});
      opt.step();
      if (k < 0) {
        ASSERT_LT(x.norm(), 1.0);
      }
    }
    const geometry::Vec x = (geometry::Vec(2) << p.value[0], p.value[1]).finished();
    EXPECT_LT(gc::distance(k, x, target), 1e-2) << "k=" << k;
  }
}

TEST(RiemannianAdam, StaysInsideTheBallUnderHugeSteps) {
  Parameter p("p", Tensor({1, 2}, std::vector<double>{0.9, 0.0}));
  p.manifold_curvature = -1.0;
  RiemannianAdam opt({&p}, AdamConfig{50.0});
  for (int s = 0; s < 20; ++s) {
    p.grad = Tensor({1, 2}, std::vector<double>{-1.0, 0.0});
    opt.step();
    ASSERT_LT(std::hypot(p.value[0], p.value[1]), 1.0);
  }
}

TEST(Serialize, RoundTripIsExact) {
  std::mt19937_64 gen(11);
  Parameter a("a", random_tensor({2, 3}, gen)), b("b", random_tensor({4}, gen));
  b.manifold_curvature = -1.0;
  b.trainable = false;
  const auto manifest = parameter_manifest({&a, &b});
  const std::string blob = encode_parameters({&a, &b});
  EXPECT_EQ(blob.size(), 10 * sizeof(double));
  EXPECT_EQ(manifest[1]["offset"], 6);
  EXPECT_EQ(manifest[1]["curvature"], -1.0);
  EXPECT_TRUE(manifest[0]["curvature"].is_null());
  Parameter a2("a", Tensor({2, 3})), b2("b", Tensor({4}));
  decode_parameters(blob, manifest, {&a2, &b2});
  EXPECT_EQ(a2.value, a.value);
  EXPECT_EQ(b2.value, b.value);

  Parameter wrong("a", Tensor({3, 2}));
  EXPECT_THROW(decode_parameters(blob, manifest, {&wrong, &b2}), IngestError);
  EXPECT_THROW(decode_parameters(blob.substr(8), manifest, {&a2, &b2}), IngestError);
}

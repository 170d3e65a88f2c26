#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/harness/image_set.hpp"
#include "gyrolatent/harness/interpolate.hpp"
#include "gyrolatent/harness/metrics.hpp"
#include "gyrolatent/harness/png_io.hpp"
#include "gyrolatent/harness/scoring.hpp"
#include "gyrolatent/harness/synthetic.hpp"

using namespace gyrolatent;
using namespace gyrolatent::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gyrolatent_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor mask_from(std::size_t h, std::size_t w, const std::string& rows) {
  Tensor t({h, w});
  for (std::size_t i = 0; i < h * w; ++i) t[i] = rows[i] == '#' ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST(Png, GrayRoundTripAndIngestErrors) {
  const fs::path dir = scratch("png");
  GrayImage g{5, 3, {}};
  for (std::size_t i = 0; i < 15; ++i) g.pixels.push_back(static_cast<std::uint8_t>(i * 17));
  write_png_gray(dir / "a.png", g);
  const GrayImage back = read_png_gray(dir / "a.png");
  EXPECT_EQ(back.width, 5u);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.pixels, g.pixels);
  const Tensor t = to_tensor(back);
  EXPECT_EQ(t.shape(), (nn::Shape{3, 5}));
  EXPECT_EQ(to_gray(t).pixels, g.pixels);

  write_png_rgb(dir / "c.png", 1, 1, {255, 0, 0});
  EXPECT_EQ(read_png_gray(dir / "c.png").pixels[0], 76);  // round(0.299 * 255)

  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png_gray(dir / "bad.png"), IngestError);
  EXPECT_THROW(read_png_gray(dir / "missing.png"), IngestError);
}

TEST(Synthetic, DeterministicWithPlantedDefects) {
  SyntheticSpec s;
  s.n_normal = 6;
  s.n_anomalous = 5;
  s.size = 32;
  s.textures = {"stripes", "grid", "blobs"};
  s.defect = "mixed";
  dist::SeededRng r1(3), r2(3);
  const ImageSet a = gen_synthetic(s, r1), b = gen_synthetic(s, r2);
  ASSERT_EQ(a.size(), 11u);
  a.validate();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.images[i].values().size(), b.images[i].values().size());
    EXPECT_TRUE(std::equal(a.images[i].values().begin(), a.images[i].values().end(), b.images[i].values().begin()));
    for (double v : a.images[i].values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(a.indices(Label::kNormal).size(), 6u);
  for (std::size_t i : a.indices(Label::kAnomalous)) {
    double area = 0;
    for (double v : a.masks[i]->values()) area += v;
    EXPECT_GE(area, s.min_defect_area * 1024);
    EXPECT_LE(area, s.max_defect_area * 1024);
  }
}

TEST(Synthetic, SpecValidation) {
  EXPECT_THROW(SyntheticSpec::from_json({{"texture", "plaid"}}), ConfigError);
  EXPECT_THROW(SyntheticSpec::from_json({{"n_normal", 0}, {"n_anomalous", 0}}), ConfigError);
  EXPECT_THROW(SyntheticSpec::from_json({{"min_defect_area", 0.2}, {"max_defect_area", 0.1}}), ConfigError);
  EXPECT_THROW(SyntheticSpec::from_json({{"colour", 1}}), ConfigError);
  const SyntheticSpec s = SyntheticSpec::from_json({{"texture", "grid"}});
  EXPECT_EQ(s.textures, std::vector<std::string>{"grid"});
  EXPECT_EQ(SyntheticSpec::from_json(s.to_json()).to_json(), s.to_json());
}

TEST(Dataset, WriteLoadRoundTrip) {
  SyntheticSpec s;
  s.n_normal = 3;
  s.n_anomalous = 2;
  s.size = 16;
  dist::SeededRng rng(1);
  const ImageSet a = gen_synthetic(s, rng);
  const fs::path dir = scratch("dataset");
  write_dataset(dir, a);
  const ImageSet b = load_dataset(dir);
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b.ids[i], a.ids[i]);
    EXPECT_EQ(b.labels[i], a.labels[i]);
    EXPECT_EQ(b.masks[i].has_value(), a.masks[i].has_value());
    for (std::size_t p = 0; p < a.images[i].size(); ++p) EXPECT_NEAR(b.images[i][p], a.images[i][p], 0.5 / 255);
  }
  EXPECT_THROW(load_dataset(dir / "nope"), IngestError);
}

TEST(Dataset, TilesDropResidualBorders) {
  const fs::path dir = scratch("tiles");
  write_png_gray(dir / "big.png", GrayImage{70, 40, std::vector<std::uint8_t>(2800, 9)});
  const LoadedImages li = load_image_dir(dir, 32);
  ASSERT_EQ(li.grids.size(), 1u);
  EXPECT_EQ(li.grids[0].rows, 1u);
  EXPECT_EQ(li.grids[0].cols, 2u);
  EXPECT_EQ(li.set.size(), 2u);
  EXPECT_EQ(li.set.labels[0], Label::kUnknown);
  EXPECT_THROW(load_image_dir(scratch("empty"), 32), EmptyInputError);
}

TEST(Dataset, SubsampleKeepsNormalsAndOrder) {
  SyntheticSpec s;
  s.n_normal = 20;
  s.n_anomalous = 10;
  s.size = 16;
  dist::SeededRng rng(1);
  const ImageSet a = gen_synthetic(s, rng);
  dist::SeededRng r(4);
  const ImageSet b = subsample_anomalies(a, 0.1, r);
  EXPECT_EQ(b.indices(Label::kNormal).size(), 20u);
  EXPECT_EQ(b.indices(Label::kAnomalous).size(), 2u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(b.ids[i], a.ids[i]);
  EXPECT_TRUE(std::is_sorted(b.ids.begin() + 20, b.ids.end()));  // single-digit anomaly ids
  std::string warning;
  dist::SeededRng r2(4);
  const ImageSet c = subsample_anomalies(a, 1.0, r2, &warning);
  EXPECT_EQ(c.indices(Label::kAnomalous).size(), 10u);
  EXPECT_FALSE(warning.empty());
}

TEST(Scoring, ThresholdIsPopulationStatistics) {
  const std::vector<Tensor> e{Tensor({1, 2}, {1.0, 2.0}), Tensor({1, 2}, {3.0, 4.0})};
  const ThresholdStats t = recon_threshold(e, 2.0);
  EXPECT_DOUBLE_EQ(t.mu, 2.5);
  EXPECT_DOUBLE_EQ(t.sigma, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(t.tau, 2.5 + 2.0 * std::sqrt(1.25));
  EXPECT_EQ(t.pixels, 4u);
  EXPECT_THROW(recon_threshold(std::vector<Tensor>{}), EmptyInputError);
  const Tensor m = localize(Tensor({1, 3}, {0.1, 0.5, 0.9}), 0.5);
  EXPECT_EQ(m[0] + m[1] + m[2], 1.0);
  EXPECT_EQ(m[2], 1.0);  // strictly greater
  EXPECT_THROW(localize(m, -1.0), DomainError);
}

TEST(Scoring, SmallRegionsUseFourConnectivity) {
  const Tensor m = mask_from(4, 5,
                             "##..#"
                             "#...."
                             "...#."
                             "..#..");
  // Components: 3 pixels top-left, 1 top-right, and two diagonal singletons.
  const Tensor r2 = remove_small_regions(m, 2);
  double sum = 0;
  for (double v : r2.values()) sum += v;
  EXPECT_EQ(sum, 3.0);
  EXPECT_EQ(r2[0], 1.0);
  EXPECT_EQ(r2[13], 0.0);
  EXPECT_EQ(remove_small_regions(m, 1).values().size(), m.size());
  const Tensor r4 = remove_small_regions(m, 4);
  for (double v : r4.values()) EXPECT_EQ(v, 0.0);
}

TEST(Metrics, Conventions) {
  const Prf none = prf({});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(none.iou, 1.0);
  const Prf p = prf({3, 1, 2, 10});
  EXPECT_DOUBLE_EQ(p.precision, 0.75);
  EXPECT_DOUBLE_EQ(p.recall, 0.6);
  EXPECT_DOUBLE_EQ(p.iou, 0.5);
  EXPECT_DOUBLE_EQ(p.f1, 2 * 0.75 * 0.6 / 1.35);
  const std::vector<Tensor> a{mask_from(1, 4, "##..")}, b{mask_from(1, 4, ".##.")};
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 1.0 / 3.0);
}

TEST(Metrics, ImageFlaggedIffFilteredMaskNonEmpty) {
  ImageSet truth;
  truth.push("n", Tensor({2, 2}), Tensor({2, 2}), Label::kNormal);
  truth.push("a", Tensor({2, 2}), mask_from(2, 2, "##.."), Label::kAnomalous);
  truth.push("u", Tensor({2, 2}), std::nullopt, Label::kUnknown);
  const std::vector<Tensor> errs{Tensor({2, 2}, {0, 0, 0, 1}), Tensor({2, 2}, {1, 1, 1, 0}),
                                 Tensor({2, 2}, {1, 0, 0, 0})};
  ThresholdStats t;
  t.tau = 0.5;
  const AnomalyReport r = eval_metrics(errs, truth, t);
  EXPECT_EQ(r.image_counts.tp, 1u);
  EXPECT_EQ(r.image_counts.fp, 1u);
  EXPECT_EQ(r.pixel_counts.tp, 2u);
  EXPECT_EQ(r.pixel_counts.fp, 1u);
  EXPECT_DOUBLE_EQ(r.pixel.iou, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.flag_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.image_scores[1], 0.75);
  const AnomalyReport filtered = eval_metrics(errs, truth, t, EvalOptions{2});
  EXPECT_FALSE(filtered.image_flags[0]);
  EXPECT_TRUE(filtered.image_flags[1]);
  EXPECT_EQ(filtered.image_counts.tn, 1u);
  EXPECT_EQ(r.summary()["image_level"]["tp"], 1);
}

TEST(Metrics, RocAuc) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::unique_ptr<bool[]> pos(new bool[4]{false, false, true, true});
  EXPECT_DOUBLE_EQ(roc_auc(s, std::span<const bool>(pos.get(), 4)), 0.75);
  const std::vector<double> tie{0.5, 0.5};
  const std::unique_ptr<bool[]> tp(new bool[2]{false, true});
  EXPECT_DOUBLE_EQ(roc_auc(tie, std::span<const bool>(tp.get(), 2)), 0.5);
  const std::unique_ptr<bool[]> one(new bool[2]{true, true});
  EXPECT_THROW(roc_auc(tie, std::span<const bool>(one.get(), 2)), DegenerateError);
}

TEST(Interpolation, EndpointsAndEquidistantSteps) {
  spvae::SpVaeConfig c;
  c.curvature = -1;
  c.latent_dim = 3;
  c.hidden_dim = 8;
  c.gyro_width = 4;
  c.image_size = 8;
  c.channels = {2};
  dist::SeededRng init(2);
  spvae::SpVaeModel model(c, init);
  SyntheticSpec s;
  s.n_normal = 2;
  s.n_anomalous = 0;
  s.size = 8;
  s.min_defect_area = 0.05;
  dist::SeededRng rng(1);
  const ImageSet set = gen_synthetic(s, rng);
  // the path encodes each image on its own
  const auto qa = spvae::encode(model, set.batch({0})), qb = spvae::encode(model, set.batch({1}));
  for (InterpMode mode : {InterpMode::kGeodesic, InterpMode::kLinear}) {
    const InterpolationPath p = interpolate_pair(model, set.images[0], set.images[1], 5, mode);
    ASSERT_EQ(p.latents.size(), 5u);
    EXPECT_EQ(p.images.shape(), (nn::Shape{5, 1, 8, 8}));
    EXPECT_EQ(p.latents.front(), qa[0].mu().coords());
    EXPECT_EQ(p.latents.back(), qb[0].mu().coords());
    const Tensor ra = spvae::reconstruct(model, set.batch({0})).x_hat, first = p.images.slice(0);
    for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(first[i], ra[i]);
    if (mode == InterpMode::kGeodesic) {
      const double step = geometry::coords::distance(-1, p.latents[0], p.latents[1]);
      for (std::size_t i = 1; i + 1 < 5; ++i) {
        EXPECT_NEAR(geometry::coords::distance(-1, p.latents[i], p.latents[i + 1]), step, 1e-9);
      }
    }
  }
  EXPECT_THROW(interpolate_pair(model, set.images[0], set.images[1], 1, InterpMode::kLinear), DomainError);
  EXPECT_THROW(interp_mode_from_string("spline"), ConfigError);
}

TEST(Grid, OmitsNodesOutsideTheBall) {
  svdd::SvddConfig c;
  c.curvature = -1;
  c.latent_dim = 2;
  c.channels = {2};
  c.hidden_dim = 4;
  c.image_size = 8;
  dist::SeededRng init(1);
  svdd::SvddModel model(c, init);
  EXPECT_THROW(score_grid(model, GridBounds{}, 5), StateError);
  model.set_center(geometry::ManifoldPoint(geometry::Curvature(-1), geometry::Vec::Zero(2)));
  const auto g = score_grid(model, GridBounds{}, 5);
  EXPECT_EQ(g.size(), 9u);  // 5x5 lattice on [-1, 1]^2, open unit disc
  for (const GridPoint& p : g) {
    EXPECT_NEAR(p.score, 2 * std::atanh(std::hypot(p.x, p.y)), 1e-12);
  }
  EXPECT_EQ(grid_csv(g).substr(0, 8), "x,y,scor");
}

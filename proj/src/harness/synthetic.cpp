#include "gyrolatent/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::harness {

using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxDefectTries = 200;

bool known_texture(const std::string& t) { return t == "stripes" || t == "grid" || t == "blobs"; }

double uniform(dist::SeededRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Tensor texture(const std::string& kind, std::size_t S, double contrast, dist::SeededRng& rng) {
  Tensor t({S, S});
  const double level = uniform(rng, 0.45, 0.55);
  const double c = contrast * uniform(rng, 0.75, 1.25);
  const double s = static_cast<double>(S);
  if (kind == "stripes") {
    const double f = uniform(rng, 2.5, 3.5);
    const double theta = uniform(rng, -0.35, 0.35);
    const double phase = uniform(rng, 0.0, kTwoPi);
    const double cx = std::cos(theta), cy = std::sin(theta);
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x)
        t[y * S + x] = level + c * std::sin(kTwoPi * f * (cx * x + cy * y) / s + phase);
  } else if (kind == "grid") {
    const double f = uniform(rng, 2.5, 3.5);
    const double px = uniform(rng, 0.0, kTwoPi);
    const double py = uniform(rng, 0.0, kTwoPi);
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x)
        t[y * S + x] = level + 0.5 * c * (std::sin(kTwoPi * f * x / s + px) + std::sin(kTwoPi * f * y / s + py));
  } else {
    const int count = 3 + static_cast<int>(rng.index(3));
    t.fill(level);
    for (int b = 0; b < count; ++b) {
      const double bx = uniform(rng, 0.0, s), by = uniform(rng, 0.0, s);
      const double r = uniform(rng, s / 8.0, s / 5.0);
      const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * 1.5 * c;
      for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          t[y * S + x] += amp * std::exp(-0.5 * d2 / (r * r));
        }
    }
  }
  for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

// Binary defect mask with the requested area (in pixels) as a target.
Tensor defect_mask(const std::string& kind, std::size_t S, double area, dist::SeededRng& rng) {
  Tensor m({S, S});
  const double s = static_cast<double>(S);
  if (kind == "scratch") {
    const double width = uniform(rng, 1.5, 2.5);
    const double length = std::min(area / width, 0.9 * s);
    const double ang = uniform(rng, 0.0, std::numbers::pi);
    const double cx = uniform(rng, 0.3 * s, 0.7 * s), cy = uniform(rng, 0.3 * s, 0.7 * s);
    const double dx = std::cos(ang), dy = std::sin(ang);
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        const double rx = x + 0.5 - cx, ry = y + 0.5 - cy;
        const double along = rx * dx + ry * dy;
        const double across = -rx * dy + ry * dx;
        if (std::abs(along) <= 0.5 * length && std::abs(across) <= 0.5 * width) m[y * S + x] = 1.0;
      }
  } else {
    const double aspect = kind == "hole" ? 1.0 : uniform(rng, 0.6, 1.6);
    const double a = std::sqrt(area * aspect / std::numbers::pi);
    const double b = area / (std::numbers::pi * a);
    const double ang = uniform(rng, 0.0, std::numbers::pi);
    const double margin = std::max(a, b);
    const double cx = uniform(rng, std::min(margin, 0.5 * s), std::max(s - margin, 0.5 * s));
    const double cy = uniform(rng, std::min(margin, 0.5 * s), std::max(s - margin, 0.5 * s));
    const double ca = std::cos(ang), sa = std::sin(ang);
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        const double rx = x + 0.5 - cx, ry = y + 0.5 - cy;
        const double u = (rx * ca + ry * sa) / a;
        const double v = (-rx * sa + ry * ca) / b;
        if (u * u + v * v <= 1.0) m[y * S + x] = 1.0;
      }
  }
  return m;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synthetic spec: " + what); };
  if (size < 8) fail("size must be >= 8");
  if (n_normal + n_anomalous == 0) fail("no images requested");
  if (textures.empty()) fail("at least one texture is required");
  for (const auto& t : textures)
    if (!known_texture(t)) fail("unknown texture '" + t + "'");
  if (!anomaly_texture.empty() && !known_texture(anomaly_texture)) fail("unknown anomaly_texture '" + anomaly_texture + "'");
  if (defect != "scratch" && defect != "hole" && defect != "blot" && defect != "mixed" && defect != "none") {
    fail("unknown defect '" + defect + "'");
  }
  if (defect == "none" && anomaly_texture.empty() && n_anomalous > 0) {
    fail("anomalies need a defect or an anomaly_texture");
  }
  if (!(defect_intensity > 0.0 && defect_intensity <= 1.0)) fail("defect_intensity must lie in (0, 1]");
  if (!(min_defect_area > 0.0 && min_defect_area <= max_defect_area && max_defect_area < 1.0)) {
    fail("need 0 < min_defect_area <= max_defect_area < 1");
  }
  if (!(contrast >= 0.0 && contrast <= 0.5)) fail("contrast must lie in [0, 0.5]");
}

json SyntheticSpec::to_json() const {
  return {{"n_normal", n_normal},
          {"n_anomalous", n_anomalous},
          {"size", size},
          {"texture", textures},
          {"anomaly_texture", anomaly_texture.empty() ? json(nullptr) : json(anomaly_texture)},
          {"defect", defect},
          {"defect_intensity", defect_intensity},
          {"min_defect_area", min_defect_area},
          {"max_defect_area", max_defect_area},
          {"contrast", contrast},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  SyntheticSpec s;
  const json defaults = s.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("synthetic spec: unknown key '" + key + "'");
  }
  try {
    s.n_normal = j.value("n_normal", s.n_normal);
    s.n_anomalous = j.value("n_anomalous", s.n_anomalous);
    s.size = j.value("size", s.size);
    if (j.contains("texture")) {
      const json& t = j.at("texture");
      s.textures = t.is_string() ? std::vector<std::string>{t.get<std::string>()} : t.get<std::vector<std::string>>();
    }
    if (j.contains("anomaly_texture") && !j.at("anomaly_texture").is_null()) {
      s.anomaly_texture = j.at("anomaly_texture").get<std::string>();
    }
    s.defect = j.value("defect", s.defect);
    s.defect_intensity = j.value("defect_intensity", s.defect_intensity);
    s.min_defect_area = j.value("min_defect_area", s.min_defect_area);
    s.max_defect_area = j.value("max_defect_area", s.max_defect_area);
    s.contrast = j.value("contrast", s.contrast);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

ImageSet gen_synthetic(const SyntheticSpec& spec, dist::SeededRng& rng) {
  spec.validate();
  const std::size_t S = spec.size;
  const double pixels = static_cast<double>(S * S);
  ImageSet set;
  set.provenance = {{"source", "synthetic"}, {"spec", spec.to_json()}, {"seed", rng.seed()}};
  for (std::size_t i = 0; i < spec.n_normal; ++i) {
    const std::string& kind = spec.textures[rng.index(spec.textures.size())];
    set.push("normal_" + std::to_string(i), texture(kind, S, spec.contrast, rng), Tensor({S, S}), Label::kNormal);
  }
  static const char* kKinds[] = {"scratch", "hole", "blot"};
  for (std::size_t i = 0; i < spec.n_anomalous; ++i) {
    const bool foreign = !spec.anomaly_texture.empty();
    const std::string kind = foreign ? spec.anomaly_texture : spec.textures[rng.index(spec.textures.size())];
    Tensor img = texture(kind, S, spec.contrast, rng);
    Tensor mask({S, S}, foreign ? 1.0 : 0.0);
    if (spec.defect != "none") {
      const std::string dk = spec.defect == "mixed" ? kKinds[rng.index(3)] : spec.defect;
      Tensor dm;
      bool ok = false;
      for (int attempt = 0; attempt < kMaxDefectTries && !ok; ++attempt) {
        const double target = uniform(rng, spec.min_defect_area, spec.max_defect_area) * pixels;
        dm = defect_mask(dk, S, target, rng);
        double area = 0.0;
        for (double v : dm.values()) area += v;
        ok = area >= spec.min_defect_area * pixels && area <= spec.max_defect_area * pixels;
      }
      if (!ok) throw ConfigError("synthetic spec: defect area bounds are not attainable at this image size");
      const double tone = dk == "hole" ? 0.02 : (rng.uniform() < 0.5 ? 0.05 : 0.95);
      for (std::size_t p = 0; p < img.size(); ++p) {
        if (dm[p] > 0.5) {
          img[p] = (1.0 - spec.defect_intensity) * img[p] + spec.defect_intensity * tone;
          mask[p] = 1.0;
        }
      }
    }
    set.push("anomalous_" + std::to_string(i), std::move(img), std::move(mask), Label::kAnomalous);
  }
  return set;
}

}  // namespace gyrolatent::harness

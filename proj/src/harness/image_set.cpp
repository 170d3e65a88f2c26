#include "gyrolatent/harness/image_set.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/harness/png_io.hpp"

namespace gyrolatent::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {
bool mask_nonempty(const Tensor& m) {
  return std::any_of(m.values().begin(), m.values().end(), [](double v) { return v > 0.5; });
}
}  // namespace

std::string to_string(Label l) {
  switch (l) {
    case Label::kNormal: return "normal";
    case Label::kAnomalous: return "anomalous";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

Label label_from_string(const std::string& s) {
  if (s == "normal") return Label::kNormal;
  if (s == "anomalous") return Label::kAnomalous;
  if (s == "unknown") return Label::kUnknown;
  throw IngestError("unknown label '" + s + "'");
}

void ImageSet::push(std::string id, Tensor image, std::optional<Tensor> mask, Label label) {
  ids.push_back(std::move(id));
  images.push_back(std::move(image));
  masks.push_back(std::move(mask));
  labels.push_back(label);
}

void ImageSet::validate() const {
  if (ids.size() != images.size() || masks.size() != images.size() || labels.size() != images.size()) {
    throw ShapeError("ImageSet: field lengths disagree");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rank() != 2) throw ShapeError("ImageSet: image " + ids[i] + " is not [H, W]");
    if (masks[i]) {
      if (masks[i]->shape() != images[i].shape()) throw ShapeError("ImageSet: mask shape differs for " + ids[i]);
      if (labels[i] != Label::kUnknown && (labels[i] == Label::kAnomalous) != mask_nonempty(*masks[i])) {
        throw IngestError("ImageSet: label of " + ids[i] + " contradicts its mask");
      }
    }
  }
}

std::vector<std::size_t> ImageSet::indices(Label l) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == l) out.push_back(i);
  return out;
}

ImageSet ImageSet::subset(const std::vector<std::size_t>& idx) const {
  ImageSet s;
  s.provenance = provenance;
  for (std::size_t i : idx) s.push(ids.at(i), images.at(i), masks.at(i), labels.at(i));
  return s;
}

Tensor ImageSet::batch(const std::vector<std::size_t>& idx) const {
  if (idx.empty()) return Tensor();
  const nn::Shape shape = images.at(idx.front()).shape();
  std::vector<double> data;
  data.reserve(idx.size() * images[idx.front()].size());
  for (std::size_t i : idx) {
    if (images.at(i).shape() != shape) throw ShapeError("ImageSet::batch: images differ in shape");
    data.insert(data.end(), images[i].values().begin(), images[i].values().end());
  }
  return Tensor({idx.size(), 1, shape[0], shape[1]}, std::move(data));
}

Tensor ImageSet::batch() const {
  std::vector<std::size_t> all(images.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch(all);
}

LoadedImages load_image_dir(const fs::path& dir, std::size_t tile) {
  if (tile == 0) throw ConfigError("load_image_dir: tile size must be >= 1");
  if (!fs::is_directory(dir)) throw IngestError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw EmptyInputError("no PNG files in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  LoadedImages out;
  out.set.provenance = {{"source", "directory"}, {"path", dir.string()}, {"tile", tile}};
  for (const fs::path& f : files) {
    const GrayImage img = read_png_gray(f);
    PatchGrid grid;
    grid.source = f.filename().string();
    grid.tile = tile;
    grid.rows = img.height / tile;
    grid.cols = img.width / tile;
    for (std::size_t r = 0; r < grid.rows; ++r) {
      for (std::size_t c = 0; c < grid.cols; ++c) {
        Tensor t({tile, tile});
        for (std::size_t y = 0; y < tile; ++y)
          for (std::size_t x = 0; x < tile; ++x)
            t[y * tile + x] = img.pixels[(r * tile + y) * img.width + c * tile + x] / 255.0;
        grid.corners.emplace_back(r * tile, c * tile);
        out.set.push(grid.source + "@" + std::to_string(r) + "," + std::to_string(c), std::move(t), std::nullopt,
                     Label::kUnknown);
      }
    }
    out.grids.push_back(std::move(grid));
  }
  return out;
}

ImageSet load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestError("dataset directory not found: " + dir.string());
  const fs::path index = dir / "index.json";
  if (!fs::exists(index)) {
    fs::path first;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png" && (first.empty() || e.path().filename() < first.filename())) first = e.path();
    if (first.empty()) throw EmptyInputError("no PNG files in " + dir.string());
    const GrayImage g = read_png_gray(first);
    return load_image_dir(dir, std::min(g.width, g.height)).set;
  }
  json j;
  try {
    std::ifstream in(index);
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestError("cannot parse " + index.string() + ": " + e.what());
  }
  ImageSet set;
  set.provenance = j.value("provenance", json::object());
  try {
    for (const json& e : j.at("images")) {
      const std::string file = e.at("file").get<std::string>();
      Tensor img = to_tensor(read_png_gray(dir / file));
      std::optional<Tensor> mask;
      if (e.contains("mask") && !e.at("mask").is_null()) {
        Tensor m = to_tensor(read_png_gray(dir / e.at("mask").get<std::string>()));
        for (double& v : m.values()) v = v > 0.5 ? 1.0 : 0.0;
        mask = std::move(m);
      }
      const Label label = label_from_string(e.value("label", "unknown"));
      if (!mask && label == Label::kNormal) mask = Tensor(img.shape());
      set.push(e.value("id", file), std::move(img), std::move(mask), label);
    }
  } catch (const json::exception& e) {
    throw IngestError("malformed " + index.string() + ": " + e.what());
  }
  if (set.size() == 0) throw EmptyInputError("dataset index lists no images: " + index.string());
  set.validate();
  return set;
}

std::vector<std::string> write_dataset(const fs::path& dir, const ImageSet& set) {
  set.validate();
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json entries = json::array();
  std::vector<std::string> written;
  for (std::size_t i = 0; i < set.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    const std::string file = std::string("images/") + name;
    write_png_gray(dir / file, to_gray(set.images[i]));
    written.push_back(file);
    json e = {{"id", set.ids[i]}, {"file", file}, {"label", to_string(set.labels[i])}, {"mask", nullptr}};
    if (set.masks[i] && set.labels[i] == Label::kAnomalous) {
      const std::string mfile = std::string("masks/") + name;
      write_png_gray(dir / mfile, to_gray(*set.masks[i]));
      written.push_back(mfile);
      e["mask"] = mfile;
    }
    entries.push_back(std::move(e));
  }
  const json index = {{"provenance", set.provenance}, {"images", entries}};
  std::ofstream out(dir / "index.json");
  if (!out) throw IoError("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << "\n";
  written.push_back("index.json");
  return written;
}

std::vector<std::size_t> permutation(std::size_t n, dist::SeededRng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

ImageSet subsample_anomalies(const ImageSet& set, double ratio, dist::SeededRng& rng, std::string* warning) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ConfigError("subsample_anomalies: ratio must be > 0");
  const auto normals = set.indices(Label::kNormal);
  auto anomalies = set.indices(Label::kAnomalous);
  const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(normals.size())));
  std::vector<std::size_t> keep_anom;
  if (wanted >= anomalies.size()) {
    keep_anom = anomalies;
    if (wanted > anomalies.size() && warning) {
      *warning = "requested " + std::to_string(wanted) + " anomalies but only " + std::to_string(anomalies.size()) +
                 " exist; keeping all";
    }
  } else {
    const auto perm = permutation(anomalies.size(), rng);
    for (std::size_t i = 0; i < wanted; ++i) keep_anom.push_back(anomalies[perm[i]]);
  }
  std::vector<bool> keep(set.size(), false);
  for (std::size_t i = 0; i < set.size(); ++i) keep[i] = set.labels[i] != Label::kAnomalous;
  for (std::size_t i : keep_anom) keep[i] = true;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (keep[i]) idx.push_back(i);
  ImageSet out = set.subset(idx);
  out.provenance["anomaly_ratio"] = ratio;
  return out;
}

}  // namespace gyrolatent::harness

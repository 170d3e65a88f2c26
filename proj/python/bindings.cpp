#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gyrolatent/cli/checkpoint.hpp"
#include "gyrolatent/cli/commands.hpp"
#include "gyrolatent/distributions.hpp"
#include "gyrolatent/errors.hpp"
#include "gyrolatent/geometry.hpp"
#include "gyrolatent/gyroplane.hpp"
#include "gyrolatent/harness/metrics.hpp"
#include "gyrolatent/harness/synthetic.hpp"
#include "gyrolatent/svdd.hpp"

namespace py = pybind11;
using namespace gyrolatent;
using geometry::Curvature;
using geometry::ManifoldPoint;
using geometry::Vec;
using json = nlohmann::json;

namespace {

ManifoldPoint point(double k, const Vec& x) { return ManifoldPoint(Curvature(k), x); }

using Images = py::array_t<double, py::array::c_style | py::array::forcecast>;

nn::Tensor to_batch(const Images& a) {
  if (a.ndim() != 3) throw ShapeError("expected an array of shape (N, H, W)");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto h = static_cast<std::size_t>(a.shape(1));
  const auto w = static_cast<std::size_t>(a.shape(2));
  std::vector<double> data(a.data(), a.data() + n * h * w);
  return nn::Tensor({n, 1, h, w}, std::move(data));
}

py::array_t<double> to_array(const nn::Tensor& t) {
  const std::size_t n = t.dim(0), h = t.dim(2), w = t.dim(3);
  py::array_t<double> out({n, h, w});
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::array_t<double> stack_images(const std::vector<nn::Tensor>& images) {
  if (images.empty()) return py::array_t<double>(std::vector<py::ssize_t>{0, 0, 0});
  const std::size_t h = images[0].dim(0), w = images[0].dim(1);
  py::array_t<double> out({images.size(), h, w});
  double* dst = out.mutable_data();
  for (const nn::Tensor& im : images) dst = std::copy(im.data(), im.data() + im.size(), dst);
  return out;
}

class VaeHandle {
 public:
  explicit VaeHandle(const std::string& dir) : model_(cli::load_spvae(dir)) {}
  double curvature() const { return model_.curvature(); }
  std::size_t latent_dim() const { return model_.config().latent_dim; }
  Eigen::MatrixXd encode(const Images& x) { return spvae::posterior_means(model_, to_batch(x)); }
  py::tuple reconstruct(const Images& x) {
    const spvae::Reconstruction r = spvae::reconstruct(model_, to_batch(x));
    return py::make_tuple(to_array(r.x_hat), to_array(r.error));
  }
  py::array_t<double> decode(const Eigen::MatrixXd& z) {
    std::vector<ManifoldPoint> pts;
    for (Eigen::Index i = 0; i < z.rows(); ++i) pts.push_back(point(model_.curvature(), z.row(i).transpose()));
    return to_array(spvae::decode(model_, pts));
  }

 private:
  spvae::SpVaeModel model_;
};

class SvddHandle {
 public:
  explicit SvddHandle(const std::string& dir) : model_(cli::load_svdd(dir)) {}
  double curvature() const { return model_.curvature(); }
  std::optional<double> radius() const { return model_.radius(); }
  Vec center() const { return model_.center().coords(); }
  std::vector<double> score(const Images& x) { return svdd::score(model_, to_batch(x)); }
  Eigen::MatrixXd embed(const Images& x) { return model_.embed(to_batch(x)); }

 private:
  svdd::SvddModel model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Constant-curvature latent geometry, models and evaluation harness";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
  py::register_exception<RegimeError>(m, "RegimeError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<IngestError>(m, "IngestError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("mobius_add", [](double k, const Vec& x, const Vec& y) {
    return geometry::mobius_add(point(k, x), point(k, y)).coords();
  }, py::arg("k"), py::arg("x"), py::arg("y"));
  m.def("mobius_scalar", [](double k, double t, const Vec& x) {
    return geometry::mobius_scalar(t, point(k, x)).coords();
  }, py::arg("k"), py::arg("t"), py::arg("x"));
  m.def("distance", [](double k, const Vec& x, const Vec& y) {
    return geometry::gyro_distance(point(k, x), point(k, y));
  }, py::arg("k"), py::arg("x"), py::arg("y"));
  m.def("exp_map", [](double k, const Vec& x, const Vec& v) {
    return geometry::exp_map(point(k, x), v).coords();
  }, py::arg("k"), py::arg("x"), py::arg("v"));
  m.def("log_map", [](double k, const Vec& x, const Vec& y) {
    return geometry::log_map(point(k, x), point(k, y)).v();
  }, py::arg("k"), py::arg("x"), py::arg("y"));
  m.def("expmap0", [](double k, const Vec& v) {
    return geometry::exp_map(ManifoldPoint::origin(Curvature(k), v.size()), v).coords();
  }, py::arg("k"), py::arg("v"));
  m.def("logmap0", [](double k, const Vec& y) {
    return geometry::log_map(ManifoldPoint::origin(Curvature(k), y.size()), point(k, y)).v();
  }, py::arg("k"), py::arg("y"));
  m.def("conformal_factor", [](double k, const Vec& x) { return geometry::conformal_factor(point(k, x)); },
        py::arg("k"), py::arg("x"));
  m.def("karcher_mean", [](double k, const Eigen::MatrixXd& pts) {
    std::vector<ManifoldPoint> v;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) v.push_back(point(k, pts.row(i).transpose()));
    return geometry::karcher_mean(v).coords();
  }, py::arg("k"), py::arg("points"));

  m.def("hyperplane_distance", [](double k, const Vec& z, const Vec& p, const Vec& a) {
    return gyroplane::hyperplane_distance(point(k, z), gyroplane::GyroHyperplane(point(k, p), a));
  }, py::arg("k"), py::arg("z"), py::arg("p"), py::arg("a"));
  m.def("gyroplane_feature", [](double k, const Vec& z, const Vec& p, const Vec& a) {
    return gyroplane::gyroplane_feature(point(k, z), gyroplane::GyroHyperplane(point(k, p), a));
  }, py::arg("k"), py::arg("z"), py::arg("p"), py::arg("a"));

  m.def("wn_sample", [](double k, const Vec& mu, const Vec& sigma, std::size_t n, std::uint64_t seed) {
    const dist::WrappedNormal q(point(k, mu), sigma);
    dist::SeededRng rng(seed);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), mu.size());
    for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = dist::wn_sample(q, rng).z.coords();
    return out;
  }, py::arg("k"), py::arg("mu"), py::arg("sigma"), py::arg("n"), py::arg("seed"));
  m.def("wn_log_prob", [](double k, const Vec& mu, const Vec& sigma, const Vec& z) {
    return dist::wn_log_prob(dist::WrappedNormal(point(k, mu), sigma), point(k, z));
  }, py::arg("k"), py::arg("mu"), py::arg("sigma"), py::arg("z"));
  m.def("kl_mc", [](double k, const Vec& mu, const Vec& sigma, double sigma0, std::size_t n, std::uint64_t seed) {
    const dist::WrappedNormal q(point(k, mu), sigma);
    const dist::LatentPrior prior(Curvature(k), mu.size(), sigma0);
    dist::SeededRng rng(seed);
    const dist::KlEstimate e = dist::kl_mc(q, prior, n, rng);
    return py::make_tuple(e.estimate, e.std_error);
  }, py::arg("k"), py::arg("mu"), py::arg("sigma"), py::arg("sigma0"), py::arg("n"), py::arg("seed"));

  m.def("generate_synthetic", [](const std::string& spec_json) {
    const harness::SyntheticSpec spec = harness::SyntheticSpec::from_json(json::parse(spec_json));
    dist::SeededRng rng(spec.seed);
    const harness::ImageSet set = harness::gen_synthetic(spec, rng);
    std::vector<nn::Tensor> masks;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < set.size(); ++i) {
      masks.push_back(set.masks[i] ? *set.masks[i] : nn::Tensor(set.images[i].shape()));
      labels.push_back(harness::to_string(set.labels[i]));
    }
    return py::make_tuple(stack_images(set.images), stack_images(masks), labels, set.ids);
  }, py::arg("spec_json"));

  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<bool>& positive) {
    const auto flags = std::make_unique<bool[]>(positive.size());
    std::copy(positive.begin(), positive.end(), flags.get());
    return harness::roc_auc(scores, std::span<const bool>(flags.get(), positive.size()));
  }, py::arg("scores"), py::arg("positive"));
  m.def("nearest_rank", [](const std::vector<double>& scores, double q) { return svdd::nearest_rank(scores, q); },
        py::arg("scores"), py::arg("percentile"));

  m.def("run_json", [](const std::string& config_json) {
    const cli::RunConfig c = cli::RunConfig::from_json(json::parse(config_json));
    cli::RunSummary s;
    {
      py::gil_scoped_release release;
      s = cli::run_task(c);
    }
    return py::make_tuple(s.exit_code, s.metrics.dump());
  }, py::arg("config_json"));

  py::class_<VaeHandle>(m, "VaeModel")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("curvature", &VaeHandle::curvature)
      .def_property_readonly("latent_dim", &VaeHandle::latent_dim)
      .def("encode", &VaeHandle::encode, py::arg("images"))
      .def("reconstruct", &VaeHandle::reconstruct, py::arg("images"))
      .def("decode", &VaeHandle::decode, py::arg("latents"));

  py::class_<SvddHandle>(m, "SvddModel")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("curvature", &SvddHandle::curvature)
      .def_property_readonly("radius", &SvddHandle::radius)
      .def_property_readonly("center", &SvddHandle::center)
      .def("score", &SvddHandle::score, py::arg("images"))
      .def("embed", &SvddHandle::embed, py::arg("images"));
}

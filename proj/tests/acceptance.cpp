// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Arguments select a subset, e.g. `3 7`.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gyrolatent/cli/checkpoint.hpp"
#include "gyrolatent/cli/commands.hpp"
#include "gyrolatent/cli/config.hpp"
#include "gyrolatent/distributions.hpp"
#include "gyrolatent/errors.hpp"
#include "gyrolatent/geometry.hpp"
#include "gyrolatent/gyroplane.hpp"
#include "gyrolatent/harness/interpolate.hpp"
#include "gyrolatent/harness/synthetic.hpp"
#include "gyrolatent/nn/layers.hpp"
#include "gyrolatent/spvae.hpp"
#include "gyrolatent/svdd.hpp"
#include "layer_check.hpp"
#include "support.hpp"

using namespace gyrolatent;
using geometry::Curvature;
using geometry::ManifoldPoint;
using geometry::Vec;
using gyrolatent::testing::random_normal;
using gyrolatent::testing::random_point;
using gyrolatent::testing::rel_err;
using nlohmann::json;
namespace fs = std::filesystem;
namespace gc = geometry::coords;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kRegimes[] = {-1.0, -0.1, 0.1, 1.0};

fs::path work_dir() {
  static const fs::path dir = [] {
    const char* env = std::getenv("GYRO_ACCEPT_DIR");
    const fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "gyrolatent_acceptance";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// For k > 0 points are drawn up to twice the equator radius, so pairs include
// points beyond the hemisphere of the origin.
Vec sample_point(std::mt19937_64& gen, double k, Eigen::Index d) {
  return random_point(gen, k, d, k > 0 ? 2.0 : 0.9);
}

double scaled_gap(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

// ---------------------------------------------------------------- 1

Outcome gyrogroup_identities() {
  std::mt19937_64 gen(101);
  double worst = 0.0;
  std::size_t checks = 0;
  for (double k : kRegimes) {
    const Curvature kc(k);
    for (Eigen::Index d : {2, 6}) {
      const ManifoldPoint zero = ManifoldPoint::origin(kc, d);
      for (int i = 0; i < 10000; ++i) {
        const ManifoldPoint x(kc, sample_point(gen, k, d)), y(kc, sample_point(gen, k, d));
        const ManifoldPoint nx = geometry::mobius_neg(x);
        const double gaps[] = {
            scaled_gap(geometry::mobius_add(zero, x).coords(), x.coords()),
            scaled_gap(geometry::mobius_add(x, zero).coords(), x.coords()),
            geometry::mobius_add(nx, x).coords().norm(),
            geometry::mobius_add(x, nx).coords().norm(),
            scaled_gap(geometry::mobius_add(nx, geometry::mobius_add(x, y)).coords(), y.coords()),
        };
        for (double g : gaps) worst = std::max(worst, g);
        checks += 5;
      }
    }
  }
  return {worst <= 1e-12, fmt("%zu identities, max deviation %.2e (tol 1e-12)", checks, worst)};
}

// ---------------------------------------------------------------- 2

// Geodesic distance on the sphere or hyperboloid of radius R from the
// ambient chord length.
double ambient_distance(double k, const geometry::AmbientPoint& a, const geometry::AmbientPoint& b) {
  const double R = 1.0 / std::sqrt(std::abs(k));
  const double dxi = a.xi() - b.xi();
  const double dx2 = (a.x() - b.x()).squaredNorm();
  if (k > 0) {
    const double chord = std::sqrt(dxi * dxi + dx2);
    return 2.0 * R * std::asin(std::min(1.0, chord / (2.0 * R)));
  }
  const double chord = std::sqrt(std::max(0.0, dx2 - dxi * dxi));
  return 2.0 * R * std::asinh(chord / (2.0 * R));
}

Outcome isometry() {
  std::mt19937_64 gen(202);
  double worst = 0.0;
  for (double k : kRegimes) {
    const Curvature kc(k);
    for (int i = 0; i < 10000; ++i) {
      const Eigen::Index d = i % 2 ? 2 : 5;
      const ManifoldPoint x(kc, sample_point(gen, k, d)), y(kc, sample_point(gen, k, d));
      const double g = geometry::gyro_distance(x, y);
      const double a = ambient_distance(k, geometry::stereo_lift(x), geometry::stereo_lift(y));
      worst = std::max(worst, std::abs(g - a) / std::max(1.0, a));
    }
  }
  return {worst <= 1e-8, fmt("4 x 1e4 pairs, max deviation %.2e (tol 1e-8)", worst)};
}

// ---------------------------------------------------------------- 3

Outcome distance_forms() {
  std::mt19937_64 gen(303);
  double worst = 0.0;
  for (double k : kRegimes) {
    const Curvature kc(k);
    for (int i = 0; i < 10000; ++i) {
      const Eigen::Index d = i % 2 ? 2 : 4;
      const ManifoldPoint x(kc, sample_point(gen, k, d)), y(kc, sample_point(gen, k, d));
      const double g = geometry::gyro_distance(x, y), a = geometry::arc_distance(x, y);
      worst = std::max(worst, std::abs(g - a) / std::max(1.0, g));
    }
  }
  return {worst <= 1e-9, fmt("4 x 1e4 pairs, max deviation %.2e (tol 1e-9)", worst)};
}

// ---------------------------------------------------------------- 4

// Distance from z to the gyroline p (+) s a_perp: dense scan of the whole
// line, then golden-section refinement inside the best bracket.
double brute_force_hyperplane_distance(double k, const Vec& z, const Vec& p, const Vec& a) {
  const Vec perp = (Vec(2) << -a[1], a[0]).finished().normalized();
  auto s_of = [&](double u) {
    if (k < 0) return std::tanh(12.0 * u) / std::sqrt(-k);
    if (k > 0) return std::tan(u * std::numbers::pi / 2) / std::sqrt(k);
    return std::tan(u * std::numbers::pi / 2);
  };
  auto dist = [&](double u) {
    const Vec w = gc::mobius_add(k, p, s_of(u) * perp);
    if (!w.allFinite()) return std::numeric_limits<double>::infinity();
    return gc::distance(k, z, w);
  };
  const int n = 20000;
  int best_i = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    const double v = dist(-1.0 + 2.0 * i / n);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  double lo = -1.0 + 2.0 * (best_i - 1) / n, hi = -1.0 + 2.0 * (best_i + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    if (dist(m1) < dist(m2)) hi = m2;
    else lo = m1;
  }
  return std::min(best, dist(0.5 * (lo + hi)));
}

Outcome hyperplane_oracle() {
  std::mt19937_64 gen(404);
  double worst = 0.0;
  int configs = 0;
  for (double k : {-1.0, -0.1, 0.0, 0.1, 1.0}) {
    const Curvature kc(k);
    for (int t = 0; t < 100; ++t) {
      const Vec z = k > 0 ? random_point(gen, k, 2, 1.5) : random_point(gen, k, 2, 0.9);
      const Vec p = random_point(gen, k, 2, 0.6);
      const Vec a = random_normal(gen, 2);
      const double closed =
          gyroplane::hyperplane_distance(ManifoldPoint(kc, z), gyroplane::GyroHyperplane(ManifoldPoint(kc, p), a));
      worst = std::max(worst, std::abs(closed - brute_force_hyperplane_distance(k, z, p, a)));
      ++configs;
    }
  }
  return {worst <= 1e-4, fmt("%d configurations over 5 regimes, max |closed - brute force| %.2e (tol 1e-4)", configs, worst)};
}

// ---------------------------------------------------------------- 5

struct GradGroup {
  std::string name;
  int cases = 0;
  double worst = 0.0;
  double tol = 1e-5;
  void add(double e) {
    ++cases;
    worst = std::max(worst, e);
  }
};

double vec_grad_err(const std::function<double(const Vec&)>& f, const Vec& x, const Vec& g, double h = 1e-6) {
  return gyrolatent::testing::max_grad_err(f, x, g, h);
}

Outcome gradient_suite() {
  std::mt19937_64 gen(505);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double ks[] = {-1.0, -0.1, 0.0, 0.1, 1.0};
  std::vector<GradGroup> groups;

  // gyroplane layer
  GradGroup gp{"gyroplane_backward"};
  for (int t = 0; t < 120; ++t) {
    const double k = ks[t % 5];
    const Eigen::Index d = 2 + t % 4, m = 3;
    const Curvature kc(k);
    Eigen::MatrixXd P(m, d), A(m, d);
    for (Eigen::Index j = 0; j < m; ++j) {
      P.row(j) = random_point(gen, k, d, 0.6).transpose();
      A.row(j) = random_normal(gen, d).transpose();
    }
    const Vec z = random_point(gen, k, d, 0.8), up = random_normal(gen, m);
    const gyroplane::GyroplaneLayer layer(kc, P, A);
    const gyroplane::GyroplaneGrads g = gyroplane::gyroplane_backward(ManifoldPoint(kc, z), layer, up);
    auto value = [&](const Vec& zz, const Eigen::MatrixXd& PP, const Eigen::MatrixXd& AA) {
      return up.dot(gyroplane::gyroplane_forward(ManifoldPoint(kc, zz), gyroplane::GyroplaneLayer(kc, PP, AA)));
    };
    double e = vec_grad_err([&](const Vec& zz) { return value(zz, P, A); }, z, g.grad_z);
    for (Eigen::Index j = 0; j < m; ++j) {
      e = std::max(e, vec_grad_err(
                          [&](const Vec& pj) {
                            Eigen::MatrixXd PP = P;
                            PP.row(j) = pj.transpose();
                            return value(z, PP, A);
                          },
                          P.row(j).transpose(), g.grad_p.row(j).transpose()));
      e = std::max(e, vec_grad_err(
                          [&](const Vec& aj) {
                            Eigen::MatrixXd AA = A;
                            AA.row(j) = aj.transpose();
                            return value(z, P, AA);
                          },
                          A.row(j).transpose(), g.grad_a.row(j).transpose()));
    }
    gp.add(e);
  }
  groups.push_back(gp);

  // geometry kernels behind the layers
  GradGroup geo{"geometry vjp"};
  for (int t = 0; t < 120; ++t) {
    const double k = ks[t % 5];
    const Eigen::Index d = 2 + t % 3;
    const Vec x = random_point(gen, k, d, 0.7), y = random_point(gen, k, d, 0.7), w = random_normal(gen, d);
    const gc::PairGrad ma = gc::mobius_add_vjp(k, x, y, w);
    double e = vec_grad_err([&](const Vec& xx) { return w.dot(gc::mobius_add(k, xx, y)); }, x, ma.gx);
    e = std::max(e, vec_grad_err([&](const Vec& yy) { return w.dot(gc::mobius_add(k, x, yy)); }, y, ma.gy));
    const gc::PairGrad dg = gc::distance_vjp(k, x, y, 1.0);
    e = std::max(e, vec_grad_err([&](const Vec& xx) { return gc::distance(k, xx, y); }, x, dg.gx));
    e = std::max(e, vec_grad_err([&](const Vec& yy) { return gc::distance(k, x, yy); }, y, dg.gy));
    const Vec v = 0.3 * random_normal(gen, d);
    const gc::PairGrad eg = gc::exp_map_vjp(k, x, v, w);
    e = std::max(e, vec_grad_err([&](const Vec& xx) { return w.dot(gc::exp_map(k, xx, v)); }, x, eg.gx));
    e = std::max(e, vec_grad_err([&](const Vec& vv) { return w.dot(gc::exp_map(k, x, vv)); }, v, eg.gy));
    geo.add(e);
  }
  groups.push_back(geo);

  // wrapped-normal sampling path
  GradGroup wn{"wrapped-normal reparameterization", 0, 0.0, 1e-4};
  for (int t = 0; t < 150; ++t) {
    const double k = ks[t % 5];
    const Eigen::Index d = 2 + t % 4;
    const Vec mu = random_point(gen, k, d, 0.6);
    Vec sigma(d);
    for (Eigen::Index i = 0; i < d; ++i) sigma[i] = 0.1 + 0.5 * unif(gen);
    const Vec eps = random_normal(gen, d), g = random_normal(gen, d);
    const dist::coords::ReparamGrad rg = dist::coords::reparam_vjp(k, mu, sigma, eps, g);
    double e = vec_grad_err([&](const Vec& m) { return g.dot(dist::coords::reparam(k, m, sigma, eps)); }, mu, rg.g_mu);
    e = std::max(e, vec_grad_err([&](const Vec& s) { return g.dot(dist::coords::reparam(k, mu, s, eps)); }, sigma,
                                 rg.g_sigma));
    const dist::coords::KlSample ks_ = dist::coords::kl_sample(k, mu, sigma, 1.0, eps);
    e = std::max(e, vec_grad_err([&](const Vec& m) { return dist::coords::kl_sample(k, m, sigma, 1.0, eps).value; },
                                 mu, ks_.g_mu));
    e = std::max(e, vec_grad_err([&](const Vec& s) { return dist::coords::kl_sample(k, mu, s, 1.0, eps).value; },
                                 sigma, ks_.g_sigma));
    wn.add(e);
  }
  groups.push_back(wn);

  // nn-core layers
  using gyrolatent::testing::layer_grad_error;
  using gyrolatent::testing::random_tensor;
  dist::SeededRng rng(505);
  GradGroup dense{"Dense"}, conv{"Conv2d"}, deconv{"ConvTranspose2d"}, bn_train{"BatchNorm (train)"},
      bn_eval{"BatchNorm (eval)"}, leaky{"LeakyRelu"}, sig{"Sigmoid"}, flat{"Flatten"}, reshape{"Reshape"};
  for (int t = 0; t < 100; ++t) {
    const std::size_t in = 2 + t % 4, out = 1 + t % 5;
    nn::Dense dl(in, out, "d", t % 3 != 0);
    dl.init(rng);
    dense.add(layer_grad_error(dl, random_tensor({2 + static_cast<std::size_t>(t % 3), in}, gen), gen));

    const std::size_t kernel = t % 2 ? 3 : 5, stride = t % 3 == 0 ? 1 : 2;
    nn::Conv2d cl(1 + t % 2, 1 + t % 3, kernel, stride);
    cl.init(rng);
    conv.add(layer_grad_error(cl, random_tensor({2, 1 + static_cast<std::size_t>(t % 2), 6, 6}, gen), gen));

    nn::ConvTranspose2d tl(1 + t % 3, 1 + t % 2, kernel, stride);
    tl.init(rng);
    deconv.add(layer_grad_error(tl, random_tensor({2, 1 + static_cast<std::size_t>(t % 3), 4, 4}, gen), gen));

    const std::size_t ch = 1 + t % 3;
    const nn::Shape bs = t % 2 ? nn::Shape{5, ch} : nn::Shape{3, ch, 2, 2};
    nn::BatchNorm bn(ch);
    for (std::size_t c = 0; c < ch; ++c) {
      bn.parameters()[0]->value[c] = 0.5 + unif(gen);
      bn.parameters()[1]->value[c] = unif(gen) - 0.5;
    }
    bn_train.add(layer_grad_error(bn, random_tensor(bs, gen), gen));
    bn.set_training(false);
    bn_eval.add(layer_grad_error(bn, random_tensor(bs, gen), gen));

    const nn::Tensor x = random_tensor({2, 3, 4}, gen);
    nn::LeakyRelu lr(0.01 + 0.3 * unif(gen));
    leaky.add(layer_grad_error(lr, x, gen));
    nn::Sigmoid sg;
    sig.add(layer_grad_error(sg, x, gen));
    nn::Flatten fl;
    flat.add(layer_grad_error(fl, x, gen));
    nn::Reshape rs({4, 3});
    reshape.add(layer_grad_error(rs, x, gen));
  }
  for (const GradGroup* g : {&dense, &conv, &deconv, &bn_train, &bn_eval, &leaky, &sig, &flat, &reshape}) {
    groups.push_back(*g);
  }

  bool pass = true;
  std::string detail;
  for (const GradGroup& g : groups) {
    const bool ok = g.cases >= 100 && g.worst <= g.tol;
    pass = pass && ok;
    detail += fmt("\n    %-34s %4d cases  max rel %.2e (tol %.0e)%s", g.name.c_str(), g.cases, g.worst, g.tol,
                  ok ? "" : "  <-- FAIL");
  }
  return {pass, fmt("%zu groups", groups.size()) + detail};
}

// ---------------------------------------------------------------- 6

// Integral of the d = 2 density against the Riemannian volume element, in
// polar coordinates about the origin: rho = R tanh(u) for k < 0 and
// rho = R tan(phi) for k > 0, Simpson in the radius, trapezoid in the angle.
double wn_mass(double k, const Vec& mu, double sigma) {
  const Curvature kc(k);
  const dist::WrappedNormal q(ManifoldPoint(kc, mu), Vec::Constant(2, sigma));
  const double R = 1.0 / std::sqrt(std::abs(k));
  const int nr = 3000, nt = 384;
  const double top = k < 0 ? 8.0 : std::numbers::pi / 2;
  const double h = top / nr;
  double total = 0.0;
  for (int i = 1; i < nr; ++i) {  // both end values vanish
    const double u = i * h;
    const double rho = k < 0 ? R * std::tanh(u) : R * std::tan(u);
    const double drho = k < 0 ? R / (std::cosh(u) * std::cosh(u)) : R / (std::cos(u) * std::cos(u));
    const double lambda = 2.0 / (1.0 + k * rho * rho);
    double ring = 0.0;
    for (int j = 0; j < nt; ++j) {
      const double th = 2.0 * std::numbers::pi * j / nt;
      const Vec z = (Vec(2) << rho * std::cos(th), rho * std::sin(th)).finished();
      try {
        ring += std::exp(dist::wn_log_prob(q, ManifoldPoint(kc, z)));
      } catch (const Error&) {
        // the cut locus of mu carries no mass
      }
    }
    ring *= 2.0 * std::numbers::pi / nt;
    total += (i % 2 ? 4.0 : 2.0) * ring * lambda * lambda * rho * drho;
  }
  return total * h / 3.0;
}

Outcome wn_normalization() {
  bool pass = true;
  double worst = 0.0;
  for (double k : {-1.0, -0.5, 0.5, 1.0}) {
    const double R = 1.0 / std::sqrt(std::abs(k));
    const Vec mu = (Vec(2) << 0.3 * R, -0.2 * R).finished();
    for (double sigma : {0.3, 0.7}) {
      const double m = wn_mass(k, mu, sigma);
      worst = std::max(worst, std::abs(m - 1.0));
      pass = pass && std::abs(m - 1.0) <= 1e-2;
    }
  }
  std::string detail = fmt("8 (k, sigma) cases, max |mass - 1| %.2e (tol 1e-2)", worst);

  // KL(q || q) two ways: the per-draw log-ratio of log q through the noise in
  // closed form against log q through the log map, and the library estimator
  // against a prior identical to q. Roundoff of 1e-12 is allowed on top of
  // the 3 SE band since both means are exactly 0.
  double worst_mean = 0.0, worst_se = 0.0, worst_lib = 0.0;
  std::mt19937_64 gen(606);
  for (double k : {-1.0, -0.5, 0.5, 1.0}) {
    const Curvature kc(k);
    const double R = 1.0 / std::sqrt(std::abs(k));
    const Vec mu = (Vec(2) << 0.3 * R, -0.2 * R).finished();
    for (double sigma : {0.3, 0.7}) {
      const dist::WrappedNormal q(ManifoldPoint(kc, mu), Vec::Constant(2, sigma));
      dist::SeededRng rng(static_cast<std::uint64_t>(gen()));
      double mean = 0.0, m2 = 0.0;
      const int n = 10000;
      for (int i = 0; i < n; ++i) {
        const dist::WnDraw draw = dist::wn_sample(q, rng);
        const double v = dist::coords::log_q_reparam(k, q.sigma(), draw.eps) - dist::wn_log_prob(q, draw.z);
        const double delta = v - mean;
        mean += delta / (i + 1);
        m2 += delta * (v - mean);
      }
      const double se = std::sqrt(m2 / (n - 1) / n);
      if (std::abs(mean) > 3.0 * se + 1e-12) pass = false;
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_se = std::max(worst_se, se);

      const dist::LatentPrior prior(kc, 2, sigma);
      const dist::KlEstimate e = dist::kl_mc(prior.as_wrapped_normal(), prior, n, rng);
      if (std::abs(e.estimate) > 3.0 * e.std_error + 1e-12) pass = false;
      worst_lib = std::max(worst_lib, std::abs(e.estimate));
    }
  }
  detail += fmt("; KL(q||q) at n=1e4: |mean| <= %.1e with SE <= %.1e, library estimator |KL| <= %.1e", worst_mean,
                worst_se, worst_lib);
  return {pass, detail};
}

// ---------------------------------------------------------------- 7

double frechet(double k, const std::vector<Vec>& pts, const Vec& z) {
  double s = 0.0;
  for (const Vec& p : pts) {
    const double d = gc::distance(k, z, p);
    s += d * d;
  }
  return s;
}

Vec grid_search_mean(double k, const std::vector<Vec>& pts) {
  Vec lo = pts[0], hi = pts[0];
  for (const Vec& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec centre = 0.5 * (lo + hi);
  double half = 0.75 * (hi - lo).maxCoeff() + 1e-3;
  Vec best = centre;
  for (int level = 0; level < 6; ++level) {
    const int n = 101;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Vec z = centre + half * (Vec(2) << -1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1)).finished();
        if (k < 0 && std::sqrt(-k) * z.norm() >= 1.0) continue;
        const double v = frechet(k, pts, z);
        if (v < best_v) {
          best_v = v;
          best = z;
        }
      }
    }
    centre = best;
    half *= 4.0 / (n - 1);
  }
  return best;
}

Outcome karcher_oracle() {
  std::mt19937_64 gen(707);
  double worst2 = 0.0, worst3 = 0.0;
  for (double k : {-1.0, -0.1, 0.0, 0.1, 1.0}) {
    const Curvature kc(k);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index d = 2 + t % 3;
      const ManifoldPoint x(kc, random_point(gen, k, d, 0.8)), y(kc, random_point(gen, k, d, 0.8));
      const std::vector<ManifoldPoint> pair{x, y};
      const ManifoldPoint m = geometry::karcher_mean(pair);
      worst2 = std::max(worst2, geometry::gyro_distance(m, geometry::geodesic(x, y, 0.5)));
    }
    for (int t = 0; t < 10; ++t) {
      std::vector<Vec> raw;
      std::vector<ManifoldPoint> pts;
      for (int i = 0; i < 3; ++i) {
        raw.push_back(random_point(gen, k, 2, 0.8));
        pts.emplace_back(kc, raw.back());
      }
      const ManifoldPoint m = geometry::karcher_mean(pts);
      const Vec g = grid_search_mean(k, raw);
      worst3 = std::max(worst3, gc::distance(k, m.coords(), g));
    }
  }
  return {worst2 <= 1e-8 && worst3 <= 2e-3,
          fmt("two-point vs midpoint max %.2e (tol 1e-8); three-point vs grid search max %.2e (tol 2e-3)", worst2,
              worst3)};
}

// ---------------------------------------------------------------- 8

double leaky(double v, double slope) { return v > 0 ? v : slope * v; }

// Independent Euclidean beta-VAE with the weights of a flat micro model:
// dense encoder, Gaussian posterior N(mu, sigma^2 / 4) in coordinates, affine
// decoder features 2 <a_j, z - p_j>, Bernoulli likelihood, analytic KL.
struct ReferenceElbo {
  double recon, recon_se, kl, total, total_se;
};

ReferenceElbo reference_elbo(spvae::SpVaeModel& model, const nn::Tensor& x, int draws, std::uint64_t seed) {
  const spvae::SpVaeConfig& c = model.config();
  std::map<std::string, const nn::Tensor*> w;
  for (nn::Parameter* p : model.parameters()) w[p->name] = &p->value;
  auto mat = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Eigen::MatrixXd m(rows, cols);
    const nn::Tensor& t = *w.at(name);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) m(i, j) = t[i * cols + j];
    return m;
  };
  auto vec = [&](const std::string& name) {
    const nn::Tensor& t = *w.at(name);
    Vec v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = t[i];
    return v;
  };
  const std::size_t n = x.dim(0), S2 = c.image_size * c.image_size, h = c.hidden_dim, d = c.latent_dim,
                    m = c.gyro_width;
  const Eigen::MatrixXd W1 = mat("enc.fc.weight", h, S2), W2 = mat("enc.head.weight", 2 * d, h),
                        P = mat("gyro.offsets", m, d), A = mat("gyro.orientations", m, d),
                        W3 = mat("dec.fc.weight", S2, m);
  const Vec b1 = vec("enc.fc.bias"), b2 = vec("enc.head.bias"), b3 = vec("dec.fc.bias");
  const double slope = c.leaky_slope, s0 = c.sigma0;

  std::vector<Vec> mu(n), sigma(n), xs(n);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = Vec(S2);
    for (std::size_t j = 0; j < S2; ++j) xs[i][j] = x[i * S2 + j];
    Vec a1 = W1 * xs[i] + b1;
    for (Eigen::Index j = 0; j < a1.size(); ++j) a1[j] = leaky(a1[j], slope);
    const Vec head = W2 * a1 + b2;
    mu[i] = head.head(d);
    sigma[i] = Vec(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double s = head[d + j];
      sigma[i][j] = (s > 30 ? s : std::log1p(std::exp(s))) + 1e-6;
      kl += std::log(s0 / sigma[i][j]) + (sigma[i][j] * sigma[i][j] + 4.0 * mu[i][j] * mu[i][j]) / (2.0 * s0 * s0) -
            0.5;
    }
  }
  kl /= static_cast<double>(n);

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double mean = 0.0, m2 = 0.0;
  for (int r = 0; r < draws; ++r) {
    double batch = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Vec z(d);
      for (std::size_t j = 0; j < d; ++j) z[j] = mu[i][j] + 0.5 * sigma[i][j] * normal(gen);
      Vec f(m);
      for (std::size_t j = 0; j < m; ++j) f[j] = leaky(2.0 * A.row(j).dot(z - P.row(j).transpose()), slope);
      const Vec logits = W3 * f + b3;
      for (std::size_t j = 0; j < S2; ++j) {
        const double p = std::clamp(1.0 / (1.0 + std::exp(-logits[j])), 1e-7, 1.0 - 1e-7);
        batch -= xs[i][j] * std::log(p) + (1.0 - xs[i][j]) * std::log1p(-p);
      }
    }
    batch /= static_cast<double>(n);
    const double delta = batch - mean;
    mean += delta / (r + 1);
    m2 += delta * (batch - mean);
  }
  const double beta = model.beta_state().beta;
  const double se = std::sqrt(m2 / (draws - 1) / draws);
  return {mean, se, kl, mean + beta * kl, se};
}

Outcome flat_equivalence() {
  harness::SyntheticSpec s;
  s.n_normal = 64;
  s.n_anomalous = 0;
  s.size = 8;
  s.textures = {"stripes", "grid"};
  s.seed = 8;
  dist::SeededRng data_rng(8);
  const harness::ImageSet set = harness::gen_synthetic(s, data_rng);

  spvae::SpVaeConfig c;
  c.curvature = 0.0;
  c.latent_dim = 3;
  c.hidden_dim = 24;
  c.gyro_width = 12;
  c.image_size = 8;
  c.channels = {};
  c.batchnorm = false;
  c.batch_size = 16;
  c.lr = 3e-3;
  c.max_epochs = 5;
  c.warmup_epochs = 5;
  c.lookahead_epochs = 5;
  dist::SeededRng init(81), train_rng(82);
  spvae::SpVaeModel model(c, init);
  spvae::fit(model, set.batch(), nn::Tensor({0, 1, 8, 8}), train_rng);
  model.beta_state().beta = 1.0;

  const nn::Tensor x = set.batch(std::vector<std::size_t>{0, 5, 10, 15, 20, 25, 30, 35});
  dist::SeededRng rng(83);
  const spvae::ElboReport lib = spvae::elbo(model, x, 4000, rng);
  const ReferenceElbo ref = reference_elbo(model, x, 4000, 84);
  const double se = std::sqrt(lib.total_se * lib.total_se + ref.total_se * ref.total_se);
  const double gap = std::abs(lib.total - ref.total);
  const double kl_se = lib.kl_se;
  const double kl_gap = std::abs(lib.kl - ref.kl);

  svdd::SvddConfig sc;
  sc.curvature = 0.0;
  sc.latent_dim = 2;
  sc.channels = {4};
  sc.hidden_dim = 8;
  sc.image_size = 8;
  dist::SeededRng sinit(85);
  svdd::SvddModel sv(sc, sinit);
  const nn::Tensor all = set.batch();
  const Eigen::MatrixXd emb = sv.embed(all);
  Vec mean = Vec::Zero(emb.cols());
  for (Eigen::Index i = 0; i < emb.rows(); ++i) mean += emb.row(i).transpose();
  mean /= static_cast<double>(emb.rows());
  const bool exact = svdd::init_center(sv, all).coords() == mean;

  const bool pass = gap <= 3.0 * se && kl_gap <= 3.0 * kl_se && exact;
  return {pass, fmt("ELBO %.4f vs reference %.4f, gap %.2f SE (tol 3); KL %.4f vs analytic %.4f, gap %.2f SE; "
                    "SVDD center %s the arithmetic mean",
                    lib.total, ref.total, gap / se, lib.kl, ref.kl, kl_gap / kl_se, exact ? "equals" : "differs from")};
}

// ---------------------------------------------------------------- 9, 11

json benchmark_config(std::uint64_t seed) {
  return {{"seed", seed},
          {"curvature", -1.0},
          {"latent_dim", 6},
          {"dataset", {{"synthetic", {{"n_normal", 2000}, {"n_anomalous", 200}, {"size", 32}, {"seed", 7}}}}},
          {"spvae", {{"max_epochs", 10}, {"warmup_epochs", 10}, {"lookahead_epochs", 10}}}};
}

cli::RunSummary run(json j, const std::string& task, const fs::path& out) {
  j["task"] = task;
  j["output_dir"] = out.string();
  fs::remove_all(out);
  cli::RunConfig c = cli::RunConfig::from_json(j);
  c.validate();
  return cli::run_task(c);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path benchmark_checkpoint(std::uint64_t seed, double* train_seconds = nullptr) {
  const fs::path dir = work_dir() / ("bench_train_" + std::to_string(seed));
  const auto t0 = std::chrono::steady_clock::now();
  const cli::RunSummary r = run(benchmark_config(seed), "train-vae", dir);
  if (train_seconds) *train_seconds = seconds_since(t0);
  if (r.exit_code != cli::kExitOk) throw NumericError("benchmark training aborted: " + r.metrics.dump());
  return dir / "checkpoint";
}

Outcome anomaly_benchmark() {
  double recall = 0.0, iou = 0.0, slowest = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double secs = 0.0;
    const fs::path ck = benchmark_checkpoint(seed, &secs);
    slowest = std::max(slowest, secs);
    json j = benchmark_config(seed);
    j["checkpoint"] = ck.string();
    const cli::RunSummary r = run(j, "score", work_dir() / ("bench_score_" + std::to_string(seed)));
    const double rc = r.metrics.at("image_level").at("recall"), io = r.metrics.at("pixel_level").at("iou");
    recall += rc / 5.0;
    iou += io / 5.0;
    per_seed += fmt(" %.3f/%.3f", rc, io);
  }
  return {recall >= 0.9 && iou >= 0.30 && slowest < 600.0,
          fmt("mean recall %.3f (min 0.9), mean IoU %.3f (min 0.30), slowest training %.0f s (max 600); "
              "recall/IoU per seed:%s",
              recall, iou, slowest, per_seed.c_str())};
}

Outcome interpolation_contract() {
  const fs::path ck = work_dir() / "bench_train_1" / "checkpoint";
  if (!fs::exists(ck / "manifest.json")) benchmark_checkpoint(1);
  spvae::SpVaeModel model = cli::load_spvae(ck.string());
  harness::SyntheticSpec s = harness::SyntheticSpec::from_json(benchmark_config(1)["dataset"]["synthetic"]);
  dist::SeededRng rng(s.seed);
  const harness::ImageSet set = harness::gen_synthetic(s, rng);
  const double k = model.curvature();

  double spread = 0.0, gap_min = std::numeric_limits<double>::infinity();
  bool endpoints = true;
  const std::size_t pairs[][2] = {{0, 1}, {3, 2000}, {2005, 17}, {42, 2100}};
  for (const auto& pr : pairs) {
    const nn::Tensor& a = set.images[pr[0]];
    const nn::Tensor& b = set.images[pr[1]];
    const harness::InterpolationPath geo = harness::interpolate_pair(model, a, b, 10, harness::InterpMode::kGeodesic);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i + 1 < geo.latents.size(); ++i) {
      const double d = gc::distance(k, geo.latents[i], geo.latents[i + 1]);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    spread = std::max(spread, hi - lo);

    const nn::Tensor ra = spvae::reconstruct(model, set.batch({pr[0]})).x_hat;
    const nn::Tensor rb = spvae::reconstruct(model, set.batch({pr[1]})).x_hat;
    const nn::Tensor first = geo.images.slice(0), last = geo.images.slice(9);
    for (std::size_t p = 0; p < ra.size(); ++p) {
      endpoints = endpoints && first[p] == ra[p] && last[p] == rb[p];
    }

    const harness::InterpolationPath g11 = harness::interpolate_pair(model, a, b, 11, harness::InterpMode::kGeodesic);
    const harness::InterpolationPath l11 = harness::interpolate_pair(model, a, b, 11, harness::InterpMode::kLinear);
    gap_min = std::min(gap_min, gc::distance(k, g11.latents[5], l11.latents[5]));
  }
  return {spread <= 1e-6 && endpoints && gap_min > 0.0,
          fmt("4 pairs, n=10: max step spread %.2e (tol 1e-6); endpoints %s reconstructions; "
              "smallest linear-vs-geodesic midpoint gap %.3e (must be > 0)",
              spread, endpoints ? "reproduce" : "differ from", gap_min)};
}

// ---------------------------------------------------------------- 10

Outcome svdd_separation() {
  const json j = {{"seed", 1},
                  {"curvature", -1.0},
                  {"latent_dim", 2},
                  {"dataset",
                   {{"synthetic",
                     {{"n_normal", 1000},
                      {"n_anomalous", 100},
                      {"size", 32},
                      {"seed", 10},
                      {"texture", {"stripes", "grid"}},
                      {"anomaly_texture", "blobs"},
                      {"defect", "none"}}}}},
                  {"svdd", {{"pretrain_epochs", 20}, {"finetune_epochs", 20}}},
                  {"grid", {{"emit", false}}}};
  const auto t0 = std::chrono::steady_clock::now();
  const cli::RunSummary r = run(j, "svdd", work_dir() / "svdd_separation");
  const double secs = seconds_since(t0);
  const double auc = r.metrics.at("test_auc");
  return {auc >= 0.9 && secs < 300.0, fmt("ROC-AUC %.4f (min 0.9), %.0f s (max 300)", auc, secs)};
}

// ---------------------------------------------------------------- 12

std::string first_difference(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const fs::path& root : {a, b}) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), root).string());
    }
  }
  for (const std::string& n : names) {
    if (n == "config.resolved.json") continue;  // records the output directory itself
    if (!fs::exists(a / n) || !fs::exists(b / n)) return n + " (missing)";
    if (cli::read_file((a / n).string()) != cli::read_file((b / n).string())) return n;
  }
  return "";
}

Outcome determinism() {
  const json j = {{"seed", 5},
                  {"curvature", -1.0},
                  {"latent_dim", 2},
                  {"dataset", {{"synthetic", {{"n_normal", 300}, {"n_anomalous", 30}, {"size", 32}, {"seed", 12}}}}},
                  {"spvae", {{"max_epochs", 3}, {"batch_size", 32}}},
                  {"svdd", {{"pretrain_epochs", 2}, {"finetune_epochs", 2}, {"batch_size", 32}}},
                  {"grid", {{"resolution", 21}}}};
  std::string detail;
  bool pass = true;
  std::size_t files = 0;
  for (const std::string task : {"train-vae", "svdd"}) {
    const fs::path a = work_dir() / ("det_" + task + "_a"), b = work_dir() / ("det_" + task + "_b");
    run(j, task, a);
    run(j, task, b);
    const std::string diff = first_difference(a, b);
    for (const auto& e : fs::recursive_directory_iterator(a)) files += e.is_regular_file();
    if (!diff.empty()) {
      pass = false;
      detail += task + " differs in " + diff + "; ";
    }
    if (!fs::exists(a / "checkpoint" / "params.bin") || !fs::exists(a / "metrics.json")) {
      pass = false;
      detail += task + " wrote no checkpoint or report; ";
    }
  }
  if (pass) detail = fmt("train-vae and svdd reruns byte-identical across %zu files", files);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gyrogroup identities", gyrogroup_identities},
      {"isometry with the ambient model", isometry},
      {"arc-cosine vs gyro distance", distance_forms},
      {"hyperplane distance vs brute force", hyperplane_oracle},
      {"gradient suite", gradient_suite},
      {"wrapped-normal normalization", wn_normalization},
      {"Karcher mean oracle", karcher_oracle},
      {"flat equivalence", flat_equivalence},
      {"synthetic anomaly benchmark", anomaly_benchmark},
      {"SVDD separation", svdd_separation},
      {"interpolation contract", interpolation_contract},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d  %s  %-36s (%.1f s)  %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
  return failed == 0 ? 0 : 1;
}

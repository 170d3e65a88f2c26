#include "gyrolatent/distributions.hpp"

#include <cmath>
#include <numbers>

namespace gyrolatent::dist {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool in_chart(double k, const Vec& v0) {
  return k <= 0.0 || std::sqrt(k) * v0.norm() < std::numbers::pi;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double SeededRng::normal() {
  ++draws_;
  return normal_(engine_);
}

double SeededRng::uniform() {
  ++draws_;
  return uniform_(engine_);
}

std::uint64_t SeededRng::next_u64() {
  ++draws_;
  return engine_();
}

std::size_t SeededRng::index(std::size_t n) {
  if (n == 0) throw EmptyInputError("SeededRng::index: empty range");
  ++draws_;
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

Vec SeededRng::normal_vector(Eigen::Index d) {
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
  return v;
}

SeededRng SeededRng::fork(std::uint64_t stream) const {
  return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 1)));
}

WrappedNormal::WrappedNormal(ManifoldPoint mu, Vec sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
  if (sigma_.size() != mu_.dim()) throw ShapeError("WrappedNormal: sigma dimension mismatch");
  if (!sigma_.allFinite() || !(sigma_.minCoeff() > 0.0)) {
    throw DomainError("WrappedNormal: sigma must be finite and strictly positive");
  }
}

LatentPrior::LatentPrior(Curvature k_, Eigen::Index dim_, double sigma0_)
    : k(k_), dim(dim_), sigma0(sigma0_) {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw DomainError("LatentPrior: sigma0 must be > 0");
  if (dim < 1) throw ShapeError("LatentPrior: dimension must be >= 1");
}

WrappedNormal LatentPrior::as_wrapped_normal() const {
  return WrappedNormal(ManifoldPoint::origin(k, dim), Vec::Constant(dim, sigma0));
}

namespace coords {

double log_sinc(double k, double r) {
  if (k == 0.0) return 0.0;
  const double t = k * r * r;
  if (std::abs(t) < 1e-6) return -t / 6.0 - t * t / 180.0;
  return std::log(geometry::coords::sin_c(k, r) / r);
}

double log_sinc_grad(double k, double r) {
  if (k == 0.0) return 0.0;
  const double t = k * r * r;
  if (std::abs(t) < 1e-4) return -k * r / 3.0 - k * k * r * r * r / 45.0;
  const double s = std::sqrt(std::abs(k));
  const double cos_term = k > 0 ? std::cos(s * r) : std::cosh(s * r);
  return cos_term / geometry::coords::sin_c(k, r) - 1.0 / r;
}

Vec reparam(double k, const Vec& mu, const Vec& sigma, const Vec& eps) {
  const Vec v0 = sigma.cwiseProduct(eps);
  if (!in_chart(k, v0)) throw DomainError("wrapped normal draw outside the chart of mu");
  const double lambda = geometry::coords::conformal(k, mu);
  return geometry::coords::exp_map(k, mu, v0 / lambda);
}

ReparamGrad reparam_vjp(double k, const Vec& mu, const Vec& sigma, const Vec& eps, const Vec& g_z) {
  const Vec v0 = sigma.cwiseProduct(eps);
  const double lambda = geometry::coords::conformal(k, mu);
  const Vec u = v0 / lambda;
  geometry::coords::PairGrad e = geometry::coords::exp_map_vjp(k, mu, u, g_z);
  ReparamGrad r;
  // u = v0 * (1 + k|mu|^2) / 2
  r.g_mu = std::move(e.gx) + (e.gy.dot(v0) * k) * mu;
  r.g_sigma = (e.gy / lambda).cwiseProduct(eps);
  return r;
}

double log_q_reparam(double k, const Vec& sigma, const Vec& eps) {
  const double d = static_cast<double>(sigma.size());
  const double r = sigma.cwiseProduct(eps).norm();
  return -0.5 * eps.squaredNorm() - sigma.array().log().sum() - d * kHalfLog2Pi -
         (d - 1.0) * log_sinc(k, r);
}

double prior_log_prob(double k, double sigma0, const Vec& z) {
  const double d = static_cast<double>(z.size());
  const double rho = 2.0 * geometry::coords::atan_c(k, z.norm());
  return -0.5 * rho * rho / (sigma0 * sigma0) - d * std::log(sigma0) - d * kHalfLog2Pi -
         (d - 1.0) * log_sinc(k, rho);
}

Vec prior_log_prob_grad(double k, double sigma0, const Vec& z) {
  const double d = static_cast<double>(z.size());
  const double n = z.norm();
  if (n < geometry::coords::kZeroNorm) return Vec::Zero(z.size());
  const double rho = 2.0 * geometry::coords::atan_c(k, n);
  const double dlogp_drho = -rho / (sigma0 * sigma0) - (d - 1.0) * log_sinc_grad(k, rho);
  const double drho_dn = 2.0 / (1.0 + k * n * n);
  return (dlogp_drho * drho_dn / n) * z;
}

KlSample kl_sample(double k, const Vec& mu, const Vec& sigma, double sigma0, const Vec& eps) {
  KlSample s;
  s.z = reparam(k, mu, sigma, eps);
  s.value = log_q_reparam(k, sigma, eps) - prior_log_prob(k, sigma0, s.z);

  // d log q / d sigma in closed form; log q does not depend on mu.
  const double d = static_cast<double>(sigma.size());
  const Vec v0 = sigma.cwiseProduct(eps);
  const double r = v0.norm();
  Vec g_sigma = -sigma.cwiseInverse();
  if (r > geometry::coords::kZeroNorm) {
    const double lg = log_sinc_grad(k, r);
    g_sigma -= ((d - 1.0) * lg / r) * v0.cwiseProduct(eps);
  }

  const Vec g_z = -prior_log_prob_grad(k, sigma0, s.z);
  ReparamGrad rg = reparam_vjp(k, mu, sigma, eps, g_z);
  s.g_mu = std::move(rg.g_mu);
  s.g_sigma = g_sigma + rg.g_sigma;
  return s;
}

}  // namespace coords

WnDraw wn_sample(const WrappedNormal& q, SeededRng& rng) {
  const double k = q.curvature().value();
  for (int attempt = 0; attempt <= coords::kMaxRedraws; ++attempt) {
    Vec eps = rng.normal_vector(q.dim());
    Vec v0 = q.sigma().cwiseProduct(eps);
    if (!in_chart(k, v0)) continue;
    ManifoldPoint z(q.curvature(), coords::reparam(k, q.mu().coords(), q.sigma(), eps));
    return WnDraw{std::move(z), std::move(eps), std::move(v0), attempt};
  }
  throw NumericError("wn_sample: too many draws outside the chart");
}

ManifoldPoint wn_reparam(const WrappedNormal& q, const Vec& eps) {
  if (eps.size() != q.dim()) throw ShapeError("wn_reparam: noise dimension mismatch");
  return ManifoldPoint(q.curvature(),
                       coords::reparam(q.curvature().value(), q.mu().coords(), q.sigma(), eps));
}

double wn_log_prob(const WrappedNormal& q, const ManifoldPoint& z) {
  if (!(z.curvature() == q.curvature()) || z.dim() != q.dim()) {
    throw ShapeError("wn_log_prob: z does not live in the space of q");
  }
  const double k = q.curvature().value();
  Vec u;
  try {
    u = geometry::coords::log_map(k, q.mu().coords(), z.coords());
  } catch (const SingularityError&) {
    throw DomainError("wn_log_prob: z outside the chart of mu");
  }
  const Vec v0 = geometry::coords::conformal(k, q.mu().coords()) * u;
  const double d = static_cast<double>(q.dim());
  const Vec white = v0.cwiseQuotient(q.sigma());
  return -0.5 * white.squaredNorm() - q.sigma().array().log().sum() - d * kHalfLog2Pi -
         (d - 1.0) * coords::log_sinc(k, v0.norm());
}

double prior_log_prob(const LatentPrior& prior, const ManifoldPoint& z) {
  return wn_log_prob(prior.as_wrapped_normal(), z);
}

KlEstimate kl_mc(const WrappedNormal& q, const LatentPrior& prior, std::size_t n, SeededRng& rng) {
  if (n < 1) throw DomainError("kl_mc: need at least one draw");
  const WrappedNormal p = prior.as_wrapped_normal();
  // Welford running mean and variance.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const WnDraw draw = wn_sample(q, rng);
    const double v = wn_log_prob(q, draw.z) - wn_log_prob(p, draw.z);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double nn = static_cast<double>(n);
  const double se = n > 1 ? std::sqrt(m2 / (nn - 1.0) / nn) : 0.0;
  return KlEstimate{mean, se};
}

}  // namespace gyrolatent::dist

#include "gyrolatent/nn/optim.hpp"

#include <cmath>

#include "gyrolatent/errors.hpp"
#include "gyrolatent/geometry.hpp"

namespace gyrolatent::nn {

namespace gc = geometry::coords;

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : config_(config) {
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    params_.push_back(p);
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  for (const Parameter* p : params_) {
    if (p->grad.shape() != p->value.shape()) throw ShapeError("Adam: gradient shape mismatch for " + p->name);
    if (!p->grad.all_finite()) {
      ++skipped_;
      throw NumericError("Adam: non-finite gradient for " + p->name + "; step skipped");
    }
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) update(i, bias1, bias2);
}

void Adam::update(std::size_t i, double bias1, double bias2) { euclidean_update(i, bias1, bias2); }

void Adam::euclidean_update(std::size_t i, double bias1, double bias2) {
  Parameter& p = *params_[i];
  Tensor& m = m_[i];
  Tensor& v = v_[i];
  const auto& c = config_;
  for (std::size_t j = 0; j < p.value.size(); ++j) {
    const double g = p.grad[j];
    m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
    v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
    p.value[j] -= c.lr * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + c.eps);
  }
}

RiemannianAdam::RiemannianAdam(std::vector<Parameter*> params, AdamConfig config)
    : Adam(std::move(params), config) {}

void RiemannianAdam::update(std::size_t i, double bias1, double bias2) {
  Parameter& p = *params_[i];
  if (!p.manifold_curvature) {
    euclidean_update(i, bias1, bias2);
    return;
  }
  const double k = *p.manifold_curvature;
  const std::size_t rows = p.value.rank() > 1 ? p.value.dim(0) : 1;
  const std::size_t d = p.value.size() / rows;
  const auto& c = config_;
  Tensor& m = m_[i];
  Tensor& v = v_[i];

  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * d;
    Eigen::Map<Eigen::VectorXd> x(p.value.data() + off, static_cast<Eigen::Index>(d));
    Eigen::Map<Eigen::VectorXd> mr(m.data() + off, static_cast<Eigen::Index>(d));
    Eigen::Map<Eigen::VectorXd> vr(v.data() + off, static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> g(p.grad.data() + off, static_cast<Eigen::Index>(d));

    const geometry::Vec xp = x;
    const double lambda = gc::conformal(k, xp);
    const geometry::Vec rg = g / (lambda * lambda);
    mr = c.beta1 * mr + (1.0 - c.beta1) * rg;
    vr = c.beta2 * vr + (1.0 - c.beta2) * rg.cwiseAbs2();
    geometry::Vec step =
        -c.lr * ((mr / bias1).array() / ((vr / bias2).array().sqrt() + c.eps)).matrix();

    geometry::Vec next;
    bool moved = false;
    for (int h = 0; h <= kMaxStepHalvings; ++h) {
      try {
        next = gc::exp_map(k, xp, step);
        if (next.allFinite()) {
          moved = true;
          break;
        }
      } catch (const DomainError&) {
      } catch (const SingularityError&) {
      }
      step *= 0.5;
      ++halvings_;
    }
    if (!moved) throw NumericError("RiemannianAdam: step for " + p.name + " leaves the chart after halving");
    if (k < 0.0 && !(next.squaredNorm() < -1.0 / k)) {
      throw NumericError("RiemannianAdam: iterate of " + p.name + " left the ball");
    }
    mr *= lambda / gc::conformal(k, next);
    x = next;
  }
}

}  // namespace gyrolatent::nn

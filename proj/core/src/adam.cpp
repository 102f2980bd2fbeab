#include "dgflow/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "dgflow/errors.hpp"

namespace dgflow {

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  if (!(cfg_.eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
}

void Adam::step(std::vector<Tensor*> params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(Tensor::zeros(p->shape()));
      v_.push_back(Tensor::zeros(p->shape()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter count changed");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (p.shape() != grads[i].shape() || p.shape() != m_[i].shape())
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(i));
    const std::size_t n = p.numel();
    std::vector<double> m(m_[i].values()), v(v_[i].values()), x(p.values());
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grads[i][j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      x[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
    m_[i] = Tensor(m_[i].shape(), std::move(m));
    v_[i] = Tensor(v_[i].shape(), std::move(v));
    p = Tensor(p.shape(), std::move(x)).with_precision(p.precision());
  }
}

}  // namespace dgflow

#pragma once

#include <cstddef>
#include <vector>

#include "dgflow/tensor.hpp"

namespace dgflow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected moments. Updates are computed in double and the
// parameters rounded to their own precision.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {});

  const AdamConfig& config() const noexcept { return cfg_; }
  std::size_t steps() const noexcept { return t_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

  // params[i] -= lr * mhat / (sqrt(vhat) + eps). Shapes must match the first call.
  void step(std::vector<Tensor*> params, const std::vector<Tensor>& grads);

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace dgflow

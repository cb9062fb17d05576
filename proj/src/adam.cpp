#include "stvqa/adam.hpp"

#include <cmath>

namespace stvqa {

Adam::Adam(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

AdamSlot& Adam::slot(const std::string& name, const std::vector<int>& shape) {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    AdamSlot s;
    s.m = Tensor(shape);
    s.v = Tensor(shape);
    it = slots_.emplace(name, std::move(s)).first;
  } else {
    if (it->second.m.shape() != shape) {
      throw ShapeError("adam: stored state for '" + name + "' has shape " +
                       shape_str(it->second.m.shape()) + ", parameter has " + shape_str(shape));
    }
  }
  return it->second;
}

void Adam::update(const std::string& name, Tensor& param, const Tensor& grad, double lr) {
  if (!param.same_shape(grad)) {
    throw ShapeError("adam: gradient shape " + shape_str(grad.shape()) +
                     " does not match parameter '" + name + "' " + shape_str(param.shape()));
  }
  if (step_ < 1) throw std::runtime_error("adam: update before begin_step");
  AdamSlot& s = slot(name, param.shape());
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (int i = 0; i < param.numel(); ++i) {
    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grad[i];
    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace stvqa

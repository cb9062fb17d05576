#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "stvqa/tensor.hpp"

namespace stvqa {

// First/second-moment buffers for one parameter block.
struct AdamSlot {
  Tensor m;
  Tensor v;
};

// Adam with a shared step counter and per-call learning rate, so parameter
// groups (embedding table vs everything else) can move at different speeds.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.99, double eps = 1e-8);

  // Call once per optimizer step, before the updates of that step.
  void begin_step() { ++step_; }

  // In-place bias-corrected update of one named block.
  void update(const std::string& name, Tensor& param, const Tensor& grad, double lr);

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t s) { step_ = s; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

  const std::map<std::string, AdamSlot>& slots() const { return slots_; }
  // Fetches the block's buffers, creating zeroed ones on first touch.
  AdamSlot& slot(const std::string& name, const std::vector<int>& shape);

 private:
  double beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
  std::map<std::string, AdamSlot> slots_;
};

}  // namespace stvqa

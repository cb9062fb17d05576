#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stvqa/config.hpp"
#include "stvqa/tensor.hpp"

namespace stvqa {

struct GradBlockReport {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
  bool pass = false;
};

struct FdBlock {
  std::string name;
  Tensor* param;    // perturbed in place, restored afterwards
  Tensor analytic;  // gradient to verify, same shape
};

// Central finite differences of loss_fn against the analytic gradients.
// Relative error per coordinate: |a - fd| / max(1, |a|, |fd|).
std::vector<GradBlockReport> finite_difference_check(const std::function<double()>& loss_fn,
                                                     std::vector<FdBlock>& blocks, double step,
                                                     double tol);

// Builds a tiny random instance (2 groups, 4 candidates, K=4 regions) from
// the seed, takes analytic gradients of the full training loss and verifies
// every trainable block by finite differences.
std::vector<GradBlockReport> gradcheck_model(const RunConfig& cfg, std::uint64_t seed,
                                             double step = 1e-5, double tol = 1e-4);

bool gradcheck_all_pass(const std::vector<GradBlockReport>& reports);

}  // namespace stvqa

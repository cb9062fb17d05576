#pragma once

#include <string>

#include "stvqa/autodiff.hpp"
#include "stvqa/tensor.hpp"

namespace stvqa {

// Precomputed per-region features for one image, laid out row-major over
// the grid (region k sits at (k / cols, k % cols)).
struct FeatureGrid {
  Tensor regions;  // K x D_raw
  int grid_rows = 0;
  int grid_cols = 0;
  std::string image_id;

  int k() const { return regions.dim(0); }
  int raw_dim() const { return regions.dim(1); }
  void validate() const;
};

// row k = relu(w_img^T c_k + b_img); w_img is [D_raw x d_img].
Var transform_regions(Tape& tape, const FeatureGrid& grid, Var w_img, Var b_img);

}  // namespace stvqa

#include "stvqa/vision.hpp"

namespace stvqa {

void FeatureGrid::validate() const {
  if (!regions.defined() || regions.ndim() != 2 || regions.dim(0) < 1) {
    throw DataError("feature grid '" + image_id + "' has no regions");
  }
  if (grid_rows * grid_cols != regions.dim(0)) {
    throw DataError("feature grid '" + image_id + "': " + std::to_string(grid_rows) + "x" +
                    std::to_string(grid_cols) + " layout does not cover " +
                    std::to_string(regions.dim(0)) + " regions");
  }
  regions.assert_finite(("feature grid '" + image_id + "'").c_str());
}

Var transform_regions(Tape& tape, const FeatureGrid& grid, Var w_img, Var b_img) {
  grid.validate();
  if (grid.raw_dim() != w_img.val().dim(0)) {
    throw ShapeError("transform_regions: raw width " + std::to_string(grid.raw_dim()) +
                     " vs projection input " + std::to_string(w_img.val().dim(0)));
  }
  Var raw = tape.leaf(grid.regions);
  return vrelu(add_bias(matmul(raw, w_img), b_img));
}

}  // namespace stvqa

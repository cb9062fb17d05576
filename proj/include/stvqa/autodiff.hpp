#pragma once

#include <functional>
#include <vector>

#include "stvqa/tensor.hpp"

namespace stvqa {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool defined() const { return tape != nullptr; }
  const Tensor& val() const;
  // gradient buffer; meaningful after Tape::backward
  const Tensor& grad() const;
  const std::vector<int>& shape() const;
};

// Recorded-operation tape for reverse-mode differentiation. Single-threaded
// during a forward/backward pass; build one per evaluation.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad)>;

  Var leaf(Tensor value, bool requires_grad = false);

  // Generic record primitive all ops are built on. `inputs` are node ids;
  // the output requires grad iff any input does. `fn` receives the output
  // gradient and must accumulate (+=) into the inputs' grad buffers.
  Var record(Tensor value, const std::vector<int>& inputs, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
  // a total derivative into every requires-grad ancestor. The loss must be
  // scalar; calling backward twice on one tape is an error.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& grad_buffer(int id);
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  bool backward_done() const { return backward_done_; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, zero-filled
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- recorded operations -------------------------------------------------

Var matmul(Var a, Var b);                    // [m×k]·[k×n] -> [m×n]
Var dot_rows(Var a, Var b);                  // [m×d],[k×d] -> [m×k], out[i][j] = <a_i, b_j>
Var linear(Var x, Var w, Var b);             // x[in], w[in×out], b[out] -> [out]
Var weighted_row_sum(Var rows, Var w);       // rows[k×d], w[k] -> [d]
Var hadamard(Var a, Var b);                  // elementwise product, same shapes
Var add(Var a, Var b);                       // elementwise sum, same shapes
Var add_bias(Var m, Var bias);               // m[r×c] + bias[c] broadcast over rows

Var vtanh(Var a);
Var vrelu(Var a);
Var vsigmoid(Var a);
Var vlog(Var a);                             // entries must be > 0
Var vscale(Var a, double c);
Var vmax(Var a, Var b);                      // elementwise max; ties keep a's entry
Var scale_by(Var x, Var s);                  // x scaled by a scalar variable

// Softmax along `axis` of a 1-D or 2-D tensor, max-subtracted for
// stability. axis 0 normalizes down columns, axis 1 along rows.
Var softmax_over_axis(Var m, int axis);
// Maximum along `axis` of a 2-D tensor (1-D collapses to a scalar).
// Gradient routes to the argmax entry; ties break toward the lowest index.
Var maxpool_over_axis(Var m, int axis);

Var conv1d_same(Var seq, Var filt, Var bias);  // seq[M×din], filt[L×din×dout], bias[dout]

Var mean_over_axis(Var m, int axis);
Var sum_over_axis(Var m, int axis);
Var sum_all(Var a);

// Gathers table rows; gradient scatter-adds back into the table.
Var embed_rows(Var table, const std::vector<int>& ids);
// Row i of x scaled by w[cats[i]]; differentiable in both x and w.
Var scale_rows_by_category(Var x, Var w, const std::vector<int>& cats);
// Stacks same-length vectors into a matrix, one per row.
Var stack_rows(const std::vector<Var>& rows);

// x / sum(x). Throws DegenerateAttentionError when |sum| < 1e-8.
Var normalize_sum(Var x);

// Batch-norm over features (columns) of x[B×h], training form: normalize by
// batch statistics (biased variance), then scale/shift. Requires B >= 2.
// Batch mean and biased variance are written out for running-stat updates.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps,
                     Tensor* batch_mean, Tensor* batch_var);
// Inference form: per-feature affine map using stored running statistics.
Var batch_norm_eval(Var x, Var gamma, Var beta,
                    const Tensor& running_mean, const Tensor& running_var, double eps);

// Mean two-sided cross-entropy over candidates; p clamped to
// [1e-12, 1-1e-12] before the logs.
Var binary_cross_entropy(Var p, const std::vector<double>& targets);
// Hinge on the hardest negative: max over neg_rows of
// max(margin + p[neg] - p[pos_row], 0). Requires at least one negative.
Var margin_hinge(Var p, int pos_row, const std::vector<int>& neg_rows, double margin);

}  // namespace stvqa

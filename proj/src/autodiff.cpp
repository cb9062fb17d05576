#include "stvqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stvqa/kernels.hpp"

namespace stvqa {

const Tensor& Var::val() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad_buffer(id); }
const std::vector<int>& Var::shape() const { return tape->value(id).shape(); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  value.assert_finite("tape leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, const std::vector<int>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (int id : inputs) {
    if (nodes_[static_cast<size_t>(id)].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad.defined()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::runtime_error("loss recorded on a different tape");
  if (backward_done_) throw std::runtime_error("backward already called on this tape");
  if (loss.val().numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.val().shape()));
  }
  loss.val().assert_finite("loss");
  backward_done_ = true;
  grad_buffer(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.backward || !n.grad.defined()) continue;
    n.backward(n.grad);
  }
}

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::runtime_error("operands live on different tapes");
}

void require_ndim(Var a, int nd, const char* op) {
  if (a.val().ndim() != nd) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(nd) +
                     "-d tensor, got " + shape_str(a.shape()));
  }
}

void require_same_shape(Var a, Var b, const char* op) {
  if (!a.val().same_shape(b.val())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  require_ndim(a, 2, "matmul");
  require_ndim(b, 2, "matmul");
  const int m = a.val().dim(0), k = a.val().dim(1), n = b.val().dim(1);
  if (b.val().dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  Tensor y({m, n});
  kernels::matmul_nn(a.val().ptr(), b.val().ptr(), y.ptr(), m, k, n);
  Tape* t = a.tape;
  const int aid = a.id, bid = b.id;
  return t->record(std::move(y), {aid, bid}, [t, aid, bid, m, k, n](const Tensor& g) {
    if (t->requires_grad(aid)) {
      kernels::matmul_nt(g.ptr(), t->value(bid).ptr(), t->grad_buffer(aid).ptr(), m, n, k, true);
    }
    if (t->requires_grad(bid)) {
      kernels::matmul_tn(t->value(aid).ptr(), g.ptr(), t->grad_buffer(bid).ptr(), m, k, n, true);
    }
  });
}

Var dot_rows(Var a, Var b) {
  require_same_tape(a, b);
  require_ndim(a, 2, "dot_rows");
  require_ndim(b, 2, "dot_rows");
  const int m = a.val().dim(0), d = a.val().dim(1), k = b.val().dim(0);
  if (b.val().dim(1) != d) {
    throw ShapeError("dot_rows: feature widths disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  Tensor y({m, k});
  kernels::matmul_nt(a.val().ptr(), b.val().ptr(), y.ptr(), m, d, k);
  Tape* t = a.tape;
  const int aid = a.id, bid = b.id;
  return t->record(std::move(y), {aid, bid}, [t, aid, bid, m, d, k](const Tensor& g) {
    if (t->requires_grad(aid)) {
      kernels::matmul_nn(g.ptr(), t->value(bid).ptr(), t->grad_buffer(aid).ptr(), m, k, d, true);
    }
    if (t->requires_grad(bid)) {
      kernels::matmul_tn(g.ptr(), t->value(aid).ptr(), t->grad_buffer(bid).ptr(), m, k, d, true);
    }
  });
}

Var linear(Var x, Var w, Var b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  require_ndim(x, 1, "linear");
  require_ndim(w, 2, "linear");
  require_ndim(b, 1, "linear");
  const int in = x.val().dim(0), out = w.val().dim(1);
  if (w.val().dim(0) != in || b.val().dim(0) != out) {
    throw ShapeError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()) + " b" + shape_str(b.shape()));
  }
  Tensor y({out});
  kernels::matmul_nn(x.val().ptr(), w.val().ptr(), y.ptr(), 1, in, out);
  for (int o = 0; o < out; ++o) y[o] += b.val()[o];
  Tape* t = x.tape;
  const int xid = x.id, wid = w.id, bid = b.id;
  return t->record(std::move(y), {xid, wid, bid}, [t, xid, wid, bid, in, out](const Tensor& g) {
    if (t->requires_grad(xid)) {
      kernels::matmul_nt(g.ptr(), t->value(wid).ptr(), t->grad_buffer(xid).ptr(), 1, out, in, true);
    }
    if (t->requires_grad(wid)) {
      kernels::matmul_tn(t->value(xid).ptr(), g.ptr(), t->grad_buffer(wid).ptr(), 1, in, out, true);
    }
    if (t->requires_grad(bid)) {
      Tensor& gb = t->grad_buffer(bid);
      for (int o = 0; o < out; ++o) gb[o] += g[o];
    }
  });
}

Var weighted_row_sum(Var rows, Var w) {
  require_same_tape(rows, w);
  require_ndim(rows, 2, "weighted_row_sum");
  require_ndim(w, 1, "weighted_row_sum");
  const int k = rows.val().dim(0), d = rows.val().dim(1);
  if (w.val().dim(0) != k) {
    throw ShapeError("weighted_row_sum: " + std::to_string(k) + " rows vs " +
                     std::to_string(w.val().dim(0)) + " weights");
  }
  Tensor y({d});
  kernels::matmul_nn(w.val().ptr(), rows.val().ptr(), y.ptr(), 1, k, d);
  Tape* t = rows.tape;
  const int rid = rows.id, wid = w.id;
  return t->record(std::move(y), {rid, wid}, [t, rid, wid, k, d](const Tensor& g) {
    if (t->requires_grad(rid)) {
      Tensor& gr = t->grad_buffer(rid);
      const Tensor& wv = t->value(wid);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) gr.at(i, j) += wv[i] * g[j];
    }
    if (t->requires_grad(wid)) {
      Tensor& gw = t->grad_buffer(wid);
      const Tensor& rv = t->value(rid);
      for (int i = 0; i < k; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += rv.at(i, j) * g[j];
        gw[i] += acc;
      }
    }
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "hadamard");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Tensor y(av.shape());
  for (int i = 0; i < av.numel(); ++i) y[i] = av[i] * bv[i];
  Tape* t = a.tape;
  const int aid = a.id, bid = b.id;
  return t->record(std::move(y), {aid, bid}, [t, aid, bid](const Tensor& g) {
    if (t->requires_grad(aid)) {
      Tensor& ga = t->grad_buffer(aid);
      const Tensor& bv2 = t->value(bid);
      for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t->requires_grad(bid)) {
      Tensor& gb = t->grad_buffer(bid);
      const Tensor& av2 = t->value(aid);
      for (int i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Tensor y(av.shape());
  for (int i = 0; i < av.numel(); ++i) y[i] = av[i] + bv[i];
  Tape* t = a.tape;
  const int aid = a.id, bid = b.id;
  return t->record(std::move(y), {aid, bid}, [t, aid, bid](const Tensor& g) {
    for (int id : {aid, bid}) {
      if (!t->requires_grad(id)) continue;
      Tensor& gx = t->grad_buffer(id);
      for (int i = 0; i < g.numel(); ++i) gx[i] += g[i];
    }
  });
}

Var add_bias(Var m, Var bias) {
  require_same_tape(m, bias);
  require_ndim(m, 2, "add_bias");
  require_ndim(bias, 1, "add_bias");
  const int r = m.val().dim(0), c = m.val().dim(1);
  if (bias.val().dim(0) != c) {
    throw ShapeError("add_bias: matrix " + shape_str(m.shape()) + " vs bias " +
                     shape_str(bias.shape()));
  }
  Tensor y({r, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) y.at(i, j) = m.val().at(i, j) + bias.val()[j];
  Tape* t = m.tape;
  const int mid = m.id, bid = bias.id;
  return t->record(std::move(y), {mid, bid}, [t, mid, bid, r, c](const Tensor& g) {
    if (t->requires_grad(mid)) {
      Tensor& gm = t->grad_buffer(mid);
      for (int i = 0; i < g.numel(); ++i) gm[i] += g[i];
    }
    if (t->requires_grad(bid)) {
      Tensor& gb = t->grad_buffer(bid);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gb[j] += g.at(i, j);
    }
  });
}

namespace {

// shared scaffolding for simple pointwise ops
template <typename Fwd, typename Bwd>
Var pointwise(Var a, Fwd fwd, Bwd bwd) {
  const Tensor& x = a.val();
  Tensor y(x.shape());
  fwd(x, y);
  Tape* t = a.tape;
  const int xid = a.id;
  const int yid = t->size();  // id the new node will get
  return t->record(std::move(y), {xid}, [t, xid, yid, bwd](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    bwd(t->value(xid), t->value(yid), g, t->grad_buffer(xid));
  });
}

}  // namespace

Var vtanh(Var a) {
  return pointwise(
      a,
      [](const Tensor& x, Tensor& y) { kernels::vtanh(x.ptr(), y.ptr(), x.numel()); },
      [](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
        for (int i = 0; i < g.numel(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

Var vrelu(Var a) {
  return pointwise(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      },
      [](const Tensor& x, const Tensor&, const Tensor& g, Tensor& gx) {
        for (int i = 0; i < g.numel(); ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
      });
}

Var vsigmoid(Var a) {
  return pointwise(
      a,
      [](const Tensor& x, Tensor& y) {
        for (int i = 0; i < x.numel(); ++i) y[i] = stable_sigmoid(x[i]);
      },
      [](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
        for (int i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Var vlog(Var a) {
  const Tensor& x = a.val();
  for (int i = 0; i < x.numel(); ++i) {
    if (x[i] <= 0.0) throw DomainError("log of non-positive entry " + std::to_string(x[i]));
  }
  return pointwise(
      a,
      [](const Tensor& xv, Tensor& y) {
        for (int i = 0; i < xv.numel(); ++i) y[i] = std::log(xv[i]);
      },
      [](const Tensor& xv, const Tensor&, const Tensor& g, Tensor& gx) {
        for (int i = 0; i < g.numel(); ++i) gx[i] += g[i] / xv[i];
      });
}

Var vscale(Var a, double c) {
  return pointwise(
      a,
      [c](const Tensor& x, Tensor& y) {
        for (int i = 0; i < x.numel(); ++i) y[i] = c * x[i];
      },
      [c](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
        for (int i = 0; i < g.numel(); ++i) gx[i] += c * g[i];
      });
}

Var vmax(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "vmax");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Tensor y(av.shape());
  for (int i = 0; i < av.numel(); ++i) y[i] = av[i] >= bv[i] ? av[i] : bv[i];
  Tape* t = a.tape;
  const int aid = a.id, bid = b.id;
  return t->record(std::move(y), {aid, bid}, [t, aid, bid](const Tensor& g) {
    const Tensor& av2 = t->value(aid);
    const Tensor& bv2 = t->value(bid);
    for (int i = 0; i < g.numel(); ++i) {
      const int winner = av2[i] >= bv2[i] ? aid : bid;
      if (t->requires_grad(winner)) t->grad_buffer(winner)[i] += g[i];
    }
  });
}

Var scale_by(Var x, Var s) {
  require_same_tape(x, s);
  if (s.val().numel() != 1) {
    throw ShapeError("scale_by: scalar expected, got " + shape_str(s.shape()));
  }
  const double sv = s.val()[0];
  const Tensor& xv = x.val();
  Tensor y(xv.shape());
  for (int i = 0; i < xv.numel(); ++i) y[i] = sv * xv[i];
  Tape* t = x.tape;
  const int xid = x.id, sid = s.id;
  return t->record(std::move(y), {xid, sid}, [t, xid, sid](const Tensor& g) {
    const double sv2 = t->value(sid)[0];
    if (t->requires_grad(xid)) {
      Tensor& gx = t->grad_buffer(xid);
      for (int i = 0; i < g.numel(); ++i) gx[i] += sv2 * g[i];
    }
    if (t->requires_grad(sid)) {
      const Tensor& xv2 = t->value(xid);
      double acc = 0.0;
      for (int i = 0; i < g.numel(); ++i) acc += g[i] * xv2[i];
      t->grad_buffer(sid)[0] += acc;
    }
  });
}

namespace {

// iterate the slices of a 1-D/2-D tensor along `axis`:
// axis 0 walks columns (each slice spans the rows), axis 1 walks rows.
struct AxisView {
  int slices, len, slice_stride, elem_stride;
};

AxisView axis_view(const Tensor& v, int axis, const char* op) {
  if (v.ndim() == 1) {
    if (axis != 0) throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for 1-d tensor");
    return {1, v.dim(0), 0, 1};
  }
  if (v.ndim() != 2 || (axis != 0 && axis != 1)) {
    throw ShapeError(std::string(op) + ": expected 1-d or 2-d tensor and axis in {0,1}, got " +
                     shape_str(v.shape()) + " axis " + std::to_string(axis));
  }
  const int r = v.dim(0), c = v.dim(1);
  if (axis == 0) return {c, r, 1, c};  // one slice per column
  return {r, c, c, 1};                 // one slice per row
}

}  // namespace

Var softmax_over_axis(Var m, int axis) {
  const Tensor& x = m.val();
  const AxisView av = axis_view(x, axis, "softmax_over_axis");
  Tensor y(x.shape());
  for (int s = 0; s < av.slices; ++s) {
    const int base = s * av.slice_stride;
    double mx = x[base];
    for (int i = 1; i < av.len; ++i) mx = std::max(mx, x[base + i * av.elem_stride]);
    double denom = 0.0;
    for (int i = 0; i < av.len; ++i) {
      const int idx = base + i * av.elem_stride;
      y[idx] = std::exp(x[idx] - mx);
      denom += y[idx];
    }
    for (int i = 0; i < av.len; ++i) y[base + i * av.elem_stride] /= denom;
  }
  Tape* t = m.tape;
  const int xid = m.id;
  const int yid = t->size();
  return t->record(std::move(y), {xid}, [t, xid, yid, av](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    const Tensor& yv = t->value(yid);
    Tensor& gx = t->grad_buffer(xid);
    for (int s = 0; s < av.slices; ++s) {
      const int base = s * av.slice_stride;
      double dot = 0.0;
      for (int i = 0; i < av.len; ++i) {
        const int idx = base + i * av.elem_stride;
        dot += g[idx] * yv[idx];
      }
      for (int i = 0; i < av.len; ++i) {
        const int idx = base + i * av.elem_stride;
        gx[idx] += yv[idx] * (g[idx] - dot);
      }
    }
  });
}

Var maxpool_over_axis(Var m, int axis) {
  const Tensor& x = m.val();
  const AxisView av = axis_view(x, axis, "maxpool_over_axis");
  Tensor y({av.slices});
  for (int s = 0; s < av.slices; ++s) {
    const int base = s * av.slice_stride;
    double best = x[base];
    for (int i = 1; i < av.len; ++i) best = std::max(best, x[base + i * av.elem_stride]);
    y[s] = best;
  }
  Tape* t = m.tape;
  const int xid = m.id;
  return t->record(std::move(y), {xid}, [t, xid, av](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    const Tensor& xv = t->value(xid);
    Tensor& gx = t->grad_buffer(xid);
    for (int s = 0; s < av.slices; ++s) {
      const int base = s * av.slice_stride;
      int arg = 0;
      double best = xv[base];
      for (int i = 1; i < av.len; ++i) {
        const double v = xv[base + i * av.elem_stride];
        if (v > best) {  // strict: ties keep the lowest index
          best = v;
          arg = i;
        }
      }
      gx[base + arg * av.elem_stride] += g[s];
    }
  });
}

Var conv1d_same(Var seq, Var filt, Var bias) {
  require_same_tape(seq, filt);
  require_same_tape(seq, bias);
  require_ndim(seq, 2, "conv1d_same");
  require_ndim(bias, 1, "conv1d_same");
  if (filt.val().ndim() != 3) {
    throw ShapeError("conv1d_same: filter must be [L x din x dout], got " + shape_str(filt.shape()));
  }
  const int M = seq.val().dim(0), din = seq.val().dim(1);
  const int L = filt.val().dim(0), dout = filt.val().dim(2);
  if (filt.val().dim(1) != din || bias.val().dim(0) != dout) {
    throw ShapeError("conv1d_same: seq " + shape_str(seq.shape()) + " filter " +
                     shape_str(filt.shape()) + " bias " + shape_str(bias.shape()));
  }
  Tensor y({M, dout});
  kernels::conv1d_same(seq.val().ptr(), filt.val().ptr(), bias.val().ptr(), y.ptr(), M, L, din, dout);
  Tape* t = seq.tape;
  const int sid = seq.id, fid = filt.id, bid = bias.id;
  return t->record(std::move(y), {sid, fid, bid}, [t, sid, fid, bid, M, L, din, dout](const Tensor& g) {
    if (t->requires_grad(sid)) {
      kernels::conv1d_grad_seq(g.ptr(), t->value(fid).ptr(), t->grad_buffer(sid).ptr(), M, L, din, dout);
    }
    if (t->requires_grad(fid)) {
      kernels::conv1d_grad_filt(g.ptr(), t->value(sid).ptr(), t->grad_buffer(fid).ptr(), M, L, din, dout);
    }
    if (t->requires_grad(bid)) {
      kernels::conv1d_grad_bias(g.ptr(), t->grad_buffer(bid).ptr(), M, dout);
    }
  });
}

namespace {

Var reduce_over_axis(Var m, int axis, bool mean, const char* op) {
  const Tensor& x = m.val();
  const AxisView av = axis_view(x, axis, op);
  const double scale = mean ? 1.0 / av.len : 1.0;
  Tensor y({av.slices});
  for (int s = 0; s < av.slices; ++s) {
    const int base = s * av.slice_stride;
    double acc = 0.0;
    for (int i = 0; i < av.len; ++i) acc += x[base + i * av.elem_stride];
    y[s] = acc * scale;
  }
  Tape* t = m.tape;
  const int xid = m.id;
  return t->record(std::move(y), {xid}, [t, xid, av, scale](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    Tensor& gx = t->grad_buffer(xid);
    for (int s = 0; s < av.slices; ++s) {
      const int base = s * av.slice_stride;
      for (int i = 0; i < av.len; ++i) gx[base + i * av.elem_stride] += g[s] * scale;
    }
  });
}

}  // namespace

Var mean_over_axis(Var m, int axis) { return reduce_over_axis(m, axis, true, "mean_over_axis"); }
Var sum_over_axis(Var m, int axis) { return reduce_over_axis(m, axis, false, "sum_over_axis"); }

Var sum_all(Var a) {
  const Tensor& x = a.val();
  double acc = 0.0;
  for (int i = 0; i < x.numel(); ++i) acc += x[i];
  Tape* t = a.tape;
  const int xid = a.id;
  return t->record(Tensor::scalar(acc), {xid}, [t, xid](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    Tensor& gx = t->grad_buffer(xid);
    for (int i = 0; i < gx.numel(); ++i) gx[i] += g[0];
  });
}

Var embed_rows(Var table, const std::vector<int>& ids) {
  require_ndim(table, 2, "embed_rows");
  const int V = table.val().dim(0), d = table.val().dim(1);
  if (ids.empty()) throw ShapeError("embed_rows: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= V) {
      throw DataError("embed_rows: row " + std::to_string(id) + " outside table of " +
                      std::to_string(V) + " rows");
    }
  }
  const int M = static_cast<int>(ids.size());
  Tensor y({M, d});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = table.val().at(ids[static_cast<size_t>(i)], j);
  Tape* t = table.tape;
  const int tid = table.id;
  return t->record(std::move(y), {tid}, [t, tid, ids, d](const Tensor& g) {
    if (!t->requires_grad(tid)) return;
    Tensor& gt = t->grad_buffer(tid);
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j) gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
  });
}

Var scale_rows_by_category(Var x, Var w, const std::vector<int>& cats) {
  require_same_tape(x, w);
  require_ndim(x, 2, "scale_rows_by_category");
  require_ndim(w, 1, "scale_rows_by_category");
  const int M = x.val().dim(0), d = x.val().dim(1), C = w.val().dim(0);
  if (static_cast<int>(cats.size()) != M) {
    throw ShapeError("scale_rows_by_category: " + std::to_string(M) + " rows vs " +
                     std::to_string(cats.size()) + " categories");
  }
  for (int c : cats) {
    if (c < 0 || c >= C) throw DataError("scale_rows_by_category: category index out of range");
  }
  Tensor y({M, d});
  for (int i = 0; i < M; ++i) {
    const double wi = w.val()[cats[static_cast<size_t>(i)]];
    for (int j = 0; j < d; ++j) y.at(i, j) = x.val().at(i, j) * wi;
  }
  Tape* t = x.tape;
  const int xid = x.id, wid = w.id;
  return t->record(std::move(y), {xid, wid}, [t, xid, wid, cats, d](const Tensor& g) {
    const Tensor& xv = t->value(xid);
    const Tensor& wv = t->value(wid);
    if (t->requires_grad(xid)) {
      Tensor& gx = t->grad_buffer(xid);
      for (size_t i = 0; i < cats.size(); ++i) {
        const double wi = wv[cats[i]];
        for (int j = 0; j < d; ++j) gx.at(static_cast<int>(i), j) += g.at(static_cast<int>(i), j) * wi;
      }
    }
    if (t->requires_grad(wid)) {
      Tensor& gw = t->grad_buffer(wid);
      for (size_t i = 0; i < cats.size(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += g.at(static_cast<int>(i), j) * xv.at(static_cast<int>(i), j);
        gw[cats[i]] += acc;
      }
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Tape* t = rows[0].tape;
  const int d = rows[0].val().numel();
  std::vector<int> ids;
  ids.reserve(rows.size());
  for (const Var& r : rows) {
    require_same_tape(rows[0], r);
    if (r.val().ndim() != 1 || r.val().dim(0) != d) {
      throw ShapeError("stack_rows: all rows must be 1-d of length " + std::to_string(d));
    }
    ids.push_back(r.id);
  }
  const int B = static_cast<int>(rows.size());
  Tensor y({B, d});
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = t->value(ids[static_cast<size_t>(i)])[j];
  return t->record(std::move(y), ids, [t, ids, d](const Tensor& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!t->requires_grad(ids[i])) continue;
      Tensor& gr = t->grad_buffer(ids[i]);
      for (int j = 0; j < d; ++j) gr[j] += g.at(static_cast<int>(i), j);
    }
  });
}

Var normalize_sum(Var x) {
  const Tensor& xv = x.val();
  double sum = 0.0;
  for (int i = 0; i < xv.numel(); ++i) sum += xv[i];
  if (std::abs(sum) < 1e-8) {
    throw DegenerateAttentionError("attention sum " + std::to_string(sum) +
                                   " too close to zero to normalize");
  }
  Tensor y(xv.shape());
  for (int i = 0; i < xv.numel(); ++i) y[i] = xv[i] / sum;
  Tape* t = x.tape;
  const int xid = x.id;
  const int yid = t->size();
  return t->record(std::move(y), {xid}, [t, xid, yid, sum](const Tensor& g) {
    if (!t->requires_grad(xid)) return;
    const Tensor& yv = t->value(yid);
    Tensor& gx = t->grad_buffer(xid);
    double dot = 0.0;
    for (int i = 0; i < g.numel(); ++i) dot += g[i] * yv[i];
    for (int i = 0; i < g.numel(); ++i) gx[i] += (g[i] - dot) / sum;
  });
}

Var batch_norm_train(Var x, Var gamma, Var beta, double eps,
                     Tensor* batch_mean, Tensor* batch_var) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  require_ndim(x, 2, "batch_norm_train");
  const int B = x.val().dim(0), h = x.val().dim(1);
  if (B < 2) {
    throw ShapeError("batch_norm_train: batch of " + std::to_string(B) +
                     " is too small, need at least 2 rows");
  }
  if (gamma.val().dim(0) != h || beta.val().dim(0) != h) {
    throw ShapeError("batch_norm_train: feature width mismatch");
  }
  Tensor mean({h}), var({h});
  const Tensor& xv = x.val();
  for (int j = 0; j < h; ++j) {
    double m = 0.0;
    for (int b = 0; b < B; ++b) m += xv.at(b, j);
    m /= B;
    double v = 0.0;
    for (int b = 0; b < B; ++b) {
      const double dxb = xv.at(b, j) - m;
      v += dxb * dxb;
    }
    mean[j] = m;
    var[j] = v / B;
  }
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;

  Tensor y({B, h});
  for (int j = 0; j < h; ++j) {
    const double invstd = 1.0 / std::sqrt(var[j] + eps);
    for (int b = 0; b < B; ++b) {
      y.at(b, j) = gamma.val()[j] * (xv.at(b, j) - mean[j]) * invstd + beta.val()[j];
    }
  }
  Tape* t = x.tape;
  const int xid = x.id, gid = gamma.id, bid = beta.id;
  return t->record(std::move(y), {xid, gid, bid},
                   [t, xid, gid, bid, B, h, eps, mean, var](const Tensor& g) {
    const Tensor& xv2 = t->value(xid);
    const Tensor& gam = t->value(gid);
    for (int j = 0; j < h; ++j) {
      const double invstd = 1.0 / std::sqrt(var[j] + eps);
      double sum_g = 0.0, sum_gxh = 0.0;
      for (int b = 0; b < B; ++b) {
        const double xh = (xv2.at(b, j) - mean[j]) * invstd;
        sum_g += g.at(b, j);
        sum_gxh += g.at(b, j) * xh;
      }
      if (t->requires_grad(bid)) t->grad_buffer(bid)[j] += sum_g;
      if (t->requires_grad(gid)) t->grad_buffer(gid)[j] += sum_gxh;
      if (t->requires_grad(xid)) {
        Tensor& gx = t->grad_buffer(xid);
        for (int b = 0; b < B; ++b) {
          const double xh = (xv2.at(b, j) - mean[j]) * invstd;
          gx.at(b, j) += gam[j] * invstd * (g.at(b, j) - sum_g / B - xh * sum_gxh / B);
        }
      }
    }
  });
}

Var batch_norm_eval(Var x, Var gamma, Var beta,
                    const Tensor& running_mean, const Tensor& running_var, double eps) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const bool is_vec = x.val().ndim() == 1;
  const int B = is_vec ? 1 : x.val().dim(0);
  const int h = is_vec ? x.val().dim(0) : x.val().dim(1);
  if (gamma.val().numel() != h || beta.val().numel() != h ||
      running_mean.numel() != h || running_var.numel() != h) {
    throw ShapeError("batch_norm_eval: feature width mismatch");
  }
  for (int j = 0; j < h; ++j) {
    if (running_var[j] < 0.0) throw DomainError("batch_norm_eval: negative running variance");
  }
  Tensor y(x.val().shape());
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < h; ++j) {
      const int idx = b * h + j;
      const double invstd = 1.0 / std::sqrt(running_var[j] + eps);
      y[idx] = gamma.val()[j] * (x.val()[idx] - running_mean[j]) * invstd + beta.val()[j];
    }
  }
  Tape* t = x.tape;
  const int xid = x.id, gid = gamma.id, bid = beta.id;
  return t->record(std::move(y), {xid, gid, bid},
                   [t, xid, gid, bid, B, h, running_mean, running_var, eps](const Tensor& g) {
    const Tensor& xv = t->value(xid);
    const Tensor& gam = t->value(gid);
    for (int j = 0; j < h; ++j) {
      const double invstd = 1.0 / std::sqrt(running_var[j] + eps);
      double sum_g = 0.0, sum_gxh = 0.0;
      for (int b = 0; b < B; ++b) {
        const int idx = b * h + j;
        sum_g += g[idx];
        sum_gxh += g[idx] * (xv[idx] - running_mean[j]) * invstd;
      }
      if (t->requires_grad(bid)) t->grad_buffer(bid)[j] += sum_g;
      if (t->requires_grad(gid)) t->grad_buffer(gid)[j] += sum_gxh;
      if (t->requires_grad(xid)) {
        Tensor& gx = t->grad_buffer(xid);
        for (int b = 0; b < B; ++b) gx[b * h + j] += g[b * h + j] * gam[j] * invstd;
      }
    }
  });
}

namespace {
constexpr double kProbClampLo = 1e-12;
constexpr double kProbClampHi = 1.0 - 1e-12;
}  // namespace

Var binary_cross_entropy(Var p, const std::vector<double>& targets) {
  const Tensor& pv = p.val();
  const int B = pv.numel();
  if (static_cast<int>(targets.size()) != B) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(B) + " scores vs " +
                     std::to_string(targets.size()) + " targets");
  }
  for (double tv : targets) {
    if (tv != 0.0 && tv != 1.0) throw DataError("binary_cross_entropy: targets must be 0 or 1");
  }
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    const double pc = std::clamp(pv[i], kProbClampLo, kProbClampHi);
    loss -= targets[static_cast<size_t>(i)] * std::log(pc) +
            (1.0 - targets[static_cast<size_t>(i)]) * std::log(1.0 - pc);
  }
  loss /= B;
  Tape* t = p.tape;
  const int pid = p.id;
  return t->record(Tensor::scalar(loss), {pid}, [t, pid, targets, B](const Tensor& g) {
    if (!t->requires_grad(pid)) return;
    const Tensor& pv2 = t->value(pid);
    Tensor& gp = t->grad_buffer(pid);
    for (int i = 0; i < B; ++i) {
      if (pv2[i] <= kProbClampLo || pv2[i] >= kProbClampHi) continue;  // flat in the clamped region
      const double tv = targets[static_cast<size_t>(i)];
      gp[i] += g[0] * (-(tv / pv2[i]) + (1.0 - tv) / (1.0 - pv2[i])) / B;
    }
  });
}

Var margin_hinge(Var p, int pos_row, const std::vector<int>& neg_rows, double margin) {
  const Tensor& pv = p.val();
  if (neg_rows.empty()) throw DataError("margin_hinge: at least one negative required");
  const int B = pv.numel();
  if (pos_row < 0 || pos_row >= B) throw ShapeError("margin_hinge: positive row out of range");
  for (int r : neg_rows) {
    if (r < 0 || r >= B) throw ShapeError("margin_hinge: negative row out of range");
  }
  int hardest = neg_rows[0];
  for (int r : neg_rows) {
    if (pv[r] > pv[hardest]) hardest = r;  // ties keep the earliest listed negative
  }
  const double v = margin + pv[hardest] - pv[pos_row];
  const double loss = v > 0.0 ? v : 0.0;
  Tape* t = p.tape;
  const int pid = p.id;
  return t->record(Tensor::scalar(loss), {pid}, [t, pid, pos_row, hardest, loss](const Tensor& g) {
    if (!t->requires_grad(pid) || loss <= 0.0) return;
    Tensor& gp = t->grad_buffer(pid);
    gp[hardest] += g[0];
    gp[pos_row] -= g[0];
  });
}

}  // namespace stvqa

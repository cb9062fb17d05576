#pragma once

// Straight-line recomputation of the scoring pipeline with plain loops.
// Deliberately shares no code with the library beyond the Tensor container
// and the parameter struct, so tests can compare two independent readings
// of the same equations.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stvqa/config.hpp"
#include "stvqa/model.hpp"
#include "stvqa/text.hpp"
#include "stvqa/vision.hpp"

namespace oracle {

using stvqa::AttentionMode;
using stvqa::FeatureGrid;
using stvqa::ModelParams;
using stvqa::RunConfig;
using stvqa::TaggedSentence;
using stvqa::Tensor;

// pos-scaled embedding rows, M x d
inline Tensor pos_scaled_rows(const TaggedSentence& s, const ModelParams& p) {
  const int m = s.length();
  const int d = p.embedding.dim(1);
  Tensor out({m, d});
  for (int i = 0; i < m; ++i) {
    const double w = p.pos_weights[static_cast<int>(s.pos_cats[static_cast<size_t>(i)])];
    for (int j = 0; j < d; ++j) {
      out.at(i, j) = w * p.embedding.at(s.vocab_ids[static_cast<size_t>(i)], j);
    }
  }
  return out;
}

// same-length convolution of window size L, then tanh
inline Tensor conv_tanh(const Tensor& seq, const Tensor& filt, const Tensor& bias) {
  const int m = seq.dim(0), din = seq.dim(1);
  const int L = filt.dim(0), dout = filt.dim(2);
  Tensor out({m, dout});
  for (int i = 0; i < m; ++i) {
    const int start = (L % 2 == 1) ? i - (L - 1) / 2 : i - L / 2;
    for (int o = 0; o < dout; ++o) {
      double acc = bias[o];
      for (int t = 0; t < L; ++t) {
        const int src = start + t;
        if (src < 0 || src >= m) continue;
        for (int j = 0; j < din; ++j) {
          acc += seq.at(src, j) * filt[(t * din + j) * dout + o];
        }
      }
      out.at(i, o) = std::tanh(acc);
    }
  }
  return out;
}

// elementwise max across window sizes 1..Lmax; ties keep the smaller window
inline Tensor ngram_encode(const TaggedSentence& s, const ModelParams& p) {
  const Tensor ehat = pos_scaled_rows(s, p);
  Tensor best = conv_tanh(ehat, p.conv_filters[0], p.conv_biases[0]);
  for (size_t l = 1; l < p.conv_filters.size(); ++l) {
    const Tensor c = conv_tanh(ehat, p.conv_filters[l], p.conv_biases[l]);
    for (int i = 0; i < best.numel(); ++i) {
      if (c[i] > best[i]) best[i] = c[i];
    }
  }
  return best;
}

inline Tensor mean_rows(const Tensor& m) {
  Tensor out({m.dim(1)});
  for (int j = 0; j < m.dim(1); ++j) {
    double acc = 0.0;
    for (int i = 0; i < m.dim(0); ++i) acc += m.at(i, j);
    out[j] = acc / m.dim(0);
  }
  return out;
}

// tanh(x W + b) for a row vector x
inline Tensor tanh_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out({w.dim(1)});
  for (int o = 0; o < w.dim(1); ++o) {
    double acc = b[o];
    for (int j = 0; j < w.dim(0); ++j) acc += x[j] * w.at(j, o);
    out[o] = std::tanh(acc);
  }
  return out;
}

// relu(raw W_I + b_I), K x img_dim
inline Tensor region_features(const FeatureGrid& grid, const ModelParams& p) {
  const int k = grid.k(), dr = grid.raw_dim(), di = p.w_img.dim(1);
  Tensor out({k, di});
  for (int r = 0; r < k; ++r) {
    for (int o = 0; o < di; ++o) {
      double acc = p.b_img[o];
      for (int j = 0; j < dr; ++j) acc += grid.regions.at(r, j) * p.w_img.at(j, o);
      out.at(r, o) = acc > 0.0 ? acc : 0.0;
    }
  }
  return out;
}

// column-softmax of word-region dot products, then column max
inline Tensor region_attention(const Tensor& etil, const Tensor& x_regions) {
  const int m = etil.dim(0), k = x_regions.dim(0), d = etil.dim(1);
  Tensor aff({m, k});
  for (int i = 0; i < m; ++i) {
    for (int r = 0; r < k; ++r) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += etil.at(i, j) * x_regions.at(r, j);
      aff.at(i, r) = acc;
    }
  }
  Tensor att({k});
  for (int r = 0; r < k; ++r) {
    double hi = aff.at(0, r);
    for (int i = 1; i < m; ++i) hi = std::max(hi, aff.at(i, r));
    double z = 0.0;
    for (int i = 0; i < m; ++i) z += std::exp(aff.at(i, r) - hi);
    double best = 0.0;
    for (int i = 0; i < m; ++i) best = std::max(best, std::exp(aff.at(i, r) - hi) / z);
    att[r] = best;
  }
  return att;
}

inline Tensor combine(const Tensor& att_q, const Tensor& att_a, double lambda1,
                      AttentionMode mode) {
  const int k = att_q.numel();
  Tensor out({k});
  switch (mode) {
    case AttentionMode::Full:
      for (int r = 0; r < k; ++r) out[r] = lambda1 * att_q[r] + att_a[r];
      break;
    case AttentionMode::QuestionOnly:
      for (int r = 0; r < k; ++r) out[r] = att_q[r];
      break;
    case AttentionMode::AnswerOnly:
      for (int r = 0; r < k; ++r) out[r] = att_a[r];
      break;
    case AttentionMode::None:
      for (int r = 0; r < k; ++r) out[r] = 1.0;
      break;
  }
  double z = 0.0;
  for (int r = 0; r < k; ++r) z += out[r];
  for (int r = 0; r < k; ++r) out[r] /= z;
  return out;
}

// eval-mode scores for every candidate of one group
inline std::vector<double> score_candidates(const ModelParams& p, const RunConfig& cfg,
                                            const FeatureGrid& grid,
                                            const TaggedSentence& question,
                                            const std::vector<TaggedSentence>& answers) {
  const Tensor x_regions = region_features(grid, p);
  const Tensor etil_q = ngram_encode(question, p);
  const Tensor att_q = region_attention(etil_q, x_regions);
  const Tensor x_q = tanh_affine(mean_rows(etil_q), p.w_qproj, p.b_qproj);
  const double lambda1 = p.lambda1[0];
  const int h = cfg.hidden_dim;

  std::vector<double> probs;
  for (const TaggedSentence& answer : answers) {
    const Tensor etil_a = ngram_encode(answer, p);
    const Tensor x_ans = tanh_affine(mean_rows(etil_a), p.w_aproj, p.b_aproj);
    const Tensor att_a = region_attention(etil_a, x_regions);
    const Tensor att = combine(att_q, att_a, lambda1, cfg.attention_mode);

    Tensor x_img({x_regions.dim(1)});
    for (int j = 0; j < x_regions.dim(1); ++j) {
      double acc = 0.0;
      for (int r = 0; r < x_regions.dim(0); ++r) acc += att[r] * x_regions.at(r, j);
      x_img[j] = acc;
    }

    Tensor x_qi({x_img.numel()});
    for (int j = 0; j < x_img.numel(); ++j) x_qi[j] = x_q[j] * x_img[j];
    const Tensor gate = tanh_affine(x_qi, p.w_qi, p.b_qi);
    Tensor x_qia({h});
    for (int j = 0; j < h; ++j) x_qia[j] = gate[j] * x_ans[j];

    double logit = p.b_qia[0];
    for (int j = 0; j < h; ++j) {
      const double xhat =
          (x_qia[j] - p.bn_running_mean[j]) / std::sqrt(p.bn_running_var[j] + cfg.bn_eps);
      logit += (p.bn_gamma[j] * xhat + p.bn_beta[j]) * p.w_qia.at(j, 0);
    }
    probs.push_back(1.0 / (1.0 + std::exp(-logit)));
  }
  return probs;
}

}  // namespace oracle

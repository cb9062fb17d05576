#pragma once

#include <string>

#include "stvqa/autodiff.hpp"
#include "stvqa/tensor.hpp"

namespace stvqa {

// Ablation switches for the region attention (the four studied configurations).
enum class AttentionMode { Full, QuestionOnly, AnswerOnly, None };

AttentionMode attention_mode_from_string(const std::string& s);
const char* attention_mode_name(AttentionMode m);

// Per-candidate attention snapshot for the dump tool.
struct AttentionOutput {
  Tensor att_q;         // [K], question -> region weights
  Tensor att_a;         // [K], answer -> region weights
  Tensor att_combined;  // [K], sums to 1
  Tensor x_img;         // [d_img]
};

// A[m,k] = softmax over words of <word_m, region_k>, per region column.
Var affinity_matrix(Var x_sent, Var x_regions);

// Column maxima: how strongly the best-matching word attends each region.
Var attention_from_affinity(Var a);

// norm(lambda1 * att_q + att_a); norm(x) = x / sum(x), degenerate sums rejected.
Var combine_attentions(Var att_q, Var att_a, Var lambda1);

// x_img = sum_k att[k] * region_k.
Var attend_image(Var x_regions, Var att);

// uniform 1/K weights as a constant leaf, for the no-attention ablation
Var uniform_attention(Tape& tape, int k);

}  // namespace stvqa

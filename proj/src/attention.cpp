#include "stvqa/attention.hpp"

namespace stvqa {

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "full") return AttentionMode::Full;
  if (s == "q_only") return AttentionMode::QuestionOnly;
  if (s == "a_only") return AttentionMode::AnswerOnly;
  if (s == "none") return AttentionMode::None;
  throw DataError("unknown attention mode '" + s + "' (want full, q_only, a_only or none)");
}

const char* attention_mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::Full: return "full";
    case AttentionMode::QuestionOnly: return "q_only";
    case AttentionMode::AnswerOnly: return "a_only";
    case AttentionMode::None: return "none";
  }
  return "?";
}

Var affinity_matrix(Var x_sent, Var x_regions) {
  if (x_sent.val().dim(1) != x_regions.val().dim(1)) {
    throw ShapeError("affinity_matrix: word width " + std::to_string(x_sent.val().dim(1)) +
                     " vs region width " + std::to_string(x_regions.val().dim(1)));
  }
  return softmax_over_axis(dot_rows(x_sent, x_regions), 0);
}

Var attention_from_affinity(Var a) { return maxpool_over_axis(a, 0); }

Var combine_attentions(Var att_q, Var att_a, Var lambda1) {
  return normalize_sum(add(scale_by(att_q, lambda1), att_a));
}

Var attend_image(Var x_regions, Var att) { return weighted_row_sum(x_regions, att); }

Var uniform_attention(Tape& tape, int k) {
  return tape.leaf(Tensor::full({k}, 1.0 / k));
}

}  // namespace stvqa

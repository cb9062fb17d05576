#include "stvqa/fusion.hpp"

#include "stvqa/tensor.hpp"

namespace stvqa {

Var fuse_question_image(Var x_q, Var x_img) { return hadamard(x_q, x_img); }

Var fuse_answer(Var x_qi, Var x_ans, Var w_qi, Var b_qi) {
  return hadamard(vtanh(linear(x_qi, w_qi, b_qi)), x_ans);
}

Var score_rows(Var bn_rows, Var w_qia, Var b_qia) {
  Var logits = add_bias(matmul(bn_rows, w_qia), b_qia);  // [B x 1]
  return vsigmoid(logits);
}

int predict_choice(const std::vector<double>& probs) {
  if (probs.empty()) throw DataError("predict_choice: no candidates");
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

int predict_choice(const std::vector<CandidateScore>& scores) {
  std::vector<double> p;
  p.reserve(scores.size());
  for (const CandidateScore& s : scores) p.push_back(s.p);
  return predict_choice(p);
}

}  // namespace stvqa

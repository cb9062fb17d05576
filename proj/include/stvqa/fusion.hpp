#pragma once

#include <vector>

#include "stvqa/autodiff.hpp"

namespace stvqa {

struct CandidateScore {
  double p = 0.0;      // sigmoid(logit)
  double logit = 0.0;  // pre-sigmoid score
  int index = -1;      // candidate position within the group
};

// x_qi = x_q (*) x_img, elementwise
Var fuse_question_image(Var x_q, Var x_img);

// x_qia = tanh(w_qi^T x_qi + b_qi) (*) x_ans
Var fuse_answer(Var x_qi, Var x_ans, Var w_qi, Var b_qi);

// batched scoring head: rows of x_qia (already batch-normalized) to
// probabilities, p = sigmoid(rows * w_qia + b_qia). w_qia is [h x 1].
Var score_rows(Var bn_rows, Var w_qia, Var b_qia);

// argmax by probability, ties to the lowest index
int predict_choice(const std::vector<CandidateScore>& scores);
int predict_choice(const std::vector<double>& probs);

}  // namespace stvqa

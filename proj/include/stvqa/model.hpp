#pragma once

#include <string>
#include <vector>

#include "stvqa/adam.hpp"
#include "stvqa/attention.hpp"
#include "stvqa/autodiff.hpp"
#include "stvqa/config.hpp"
#include "stvqa/text.hpp"
#include "stvqa/vision.hpp"

namespace stvqa {

// Every learnable tensor of the scorer, plus the batch-norm running
// statistics (persisted but not trained).
struct ModelParams {
  Tensor embedding;                  // V x d, last row is UNK
  Tensor pos_weights;                // [7]
  std::vector<Tensor> conv_filters;  // window l+1: [(l+1) x d x d]
  std::vector<Tensor> conv_biases;   // [d] each
  Tensor w_img, b_img;               // raw_dim x img_dim, [img_dim]
  Tensor lambda1;                    // [1]
  Tensor w_qproj, b_qproj;           // d x img_dim, [img_dim]
  Tensor w_aproj, b_aproj;           // d x h, [h]
  Tensor w_qi, b_qi;                 // img_dim x h, [h]
  Tensor bn_gamma, bn_beta;          // [h]
  Tensor w_qia, b_qia;               // h x 1, [1]
  Tensor bn_running_mean, bn_running_var;  // [h]
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
  bool trainable;
  bool embedding_group;  // moves at lr_embedding instead of lr_other
};

// Stable, name-keyed enumeration used by the optimizer, the checkpoint
// format and the gradient checker.
std::vector<NamedParam> visit_params(ModelParams& p);

// All-zero tensors with the shapes the config dictates.
ModelParams zero_params(const RunConfig& cfg, int vocab_size);

// POS weights ~ U(0,2); lambda1 = 0.5; weights Glorot-uniform; biases zero;
// BN gamma 1 / beta 0, running stats (0, 1). The embedding matrix copies
// `pretrained` rows when given, else draws U(-0.05, 0.05).
ModelParams init_params(const RunConfig& cfg, int vocab_size, Rng& rng,
                        const EmbeddingTable* pretrained = nullptr);

// Tape handles for the trainable tensors.
struct ParamVars {
  Var embedding, pos_weights;
  std::vector<Var> conv_filters, conv_biases;
  Var w_img, b_img, lambda1;
  Var w_qproj, b_qproj, w_aproj, b_aproj;
  Var w_qi, b_qi, bn_gamma, bn_beta, w_qia, b_qia;
};
ParamVars lift_params(Tape& tape, const ModelParams& p, bool requires_grad);

// Same order and names as visit_params restricted to trainable tensors.
struct NamedVar {
  std::string name;
  Var var;
  bool embedding_group;
};
std::vector<NamedVar> visit_param_vars(const ParamVars& pv);

// Per-group work shared by all of its candidates.
struct GroupContext {
  Var x_regions;  // K x img_dim
  Var att_q;      // [K]
  Var x_q;        // [img_dim], tanh-projected mean question encoding
};
GroupContext encode_group(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                          const FeatureGrid& grid, const TaggedSentence& question);

// One candidate's fused feature vector (pre batch-norm), [h].
Var candidate_fused(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                    const GroupContext& ctx, const TaggedSentence& answer,
                    AttentionOutput* capture = nullptr);

// Stacks fused rows, batch-normalizes and scores them; returns [B x 1]
// probabilities. The train form folds fresh batch statistics into
// stats_io's running mean/var.
Var score_batch_train(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                      const std::vector<Var>& rows, ModelParams& stats_io);
Var score_batch_eval(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                     const std::vector<Var>& rows, const ModelParams& stats);

// Inference scores for one group's candidates, in the order given.
std::vector<double> score_candidates_eval(const ModelParams& params, const RunConfig& cfg,
                                          const FeatureGrid& grid,
                                          const TaggedSentence& question,
                                          const std::vector<TaggedSentence>& answers,
                                          std::vector<AttentionOutput>* capture = nullptr);

// ---- checkpoint ------------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  RunConfig config;
  std::vector<std::string> vocab;  // tokens for embedding rows 0..V-2
  Adam adam;

  EmbeddingTable rebuild_table() const;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const RunConfig& cfg,
                     const std::vector<std::string>& vocab, const Adam& adam);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stvqa

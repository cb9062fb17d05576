#pragma once

#include <iosfwd>
#include <vector>

#include "stvqa/adam.hpp"
#include "stvqa/config.hpp"
#include "stvqa/data.hpp"
#include "stvqa/model.hpp"

namespace stvqa {

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double wall_seconds = 0.0;
};

struct FitResult {
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  ModelParams best_params;
  Adam best_adam;
  bool stopped_early = false;
};

// Candidate indices entering one training step: the positive (index 0 after
// canonicalization) plus neg_per_pos sampled negatives, ascending. Groups
// with fewer negatives keep them all.
std::vector<int> sample_negatives(int n_candidates, int neg_per_pos, Rng& rng);

// True once the best validation accuracy is `patience` or more epochs old.
bool early_stop(const std::vector<double>& val_history, int patience);

// One pass over shuffled groups: per batch, forward the sampled candidates,
// binary + weighted margin loss, backward, Adam step. Returns mean step loss;
// train_acc_out gets the fraction of groups whose positive won its step.
double train_epoch(ModelParams& params, Adam& adam, const RunConfig& cfg,
                   const std::vector<CandidateGroup>& groups, const FeatureStore& features,
                   Rng& rng, double* train_acc_out);

// Predicted candidate index per group (post-canonicalization order, so 0
// means the positive won). Every candidate scored, batch-norm in eval
// mode. jobs > 1 fans groups out across threads (parameters read-only).
std::vector<int> evaluate_choices(const ModelParams& params, const RunConfig& cfg,
                                  const std::vector<CandidateGroup>& groups,
                                  const FeatureStore& features, int jobs = 1);

// Fraction of groups whose positive candidate scores highest.
double evaluate(const ModelParams& params, const RunConfig& cfg,
                const std::vector<CandidateGroup>& groups, const FeatureStore& features,
                int jobs = 1);

// Full training loop with per-epoch validation, best-checkpoint tracking and
// early stopping. Writes one tab-separated line per epoch to `log` when given:
// epoch, mean loss, train accuracy, val accuracy, wall seconds.
FitResult fit(ModelParams& params, Adam& adam, const RunConfig& cfg,
              const std::vector<CandidateGroup>& train_groups,
              const std::vector<CandidateGroup>& val_groups, const FeatureStore& features,
              Rng& rng, std::ostream* log);

}  // namespace stvqa

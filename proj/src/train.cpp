#include "stvqa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "stvqa/fusion.hpp"

namespace stvqa {

std::vector<int> sample_negatives(int n_candidates, int neg_per_pos, Rng& rng) {
  if (n_candidates < 2) throw DataError("a group needs at least one negative");
  std::vector<int> negatives(static_cast<size_t>(n_candidates - 1));
  std::iota(negatives.begin(), negatives.end(), 1);
  std::vector<int> scored{0};
  if (neg_per_pos >= n_candidates - 1) {
    scored.insert(scored.end(), negatives.begin(), negatives.end());
    return scored;
  }
  rng.shuffle(negatives);
  negatives.resize(static_cast<size_t>(neg_per_pos));
  std::sort(negatives.begin(), negatives.end());
  scored.insert(scored.end(), negatives.begin(), negatives.end());
  return scored;
}

bool early_stop(const std::vector<double>& val_history, int patience) {
  if (val_history.empty()) throw DataError("early_stop: empty history");
  size_t best = 0;
  for (size_t i = 1; i < val_history.size(); ++i) {
    if (val_history[i] > val_history[best]) best = i;  // ties keep the earliest epoch
  }
  return val_history.size() - 1 - best >= static_cast<size_t>(patience);
}

namespace {

struct GroupRows {
  int pos_row;
  std::vector<int> neg_rows;
};

}  // namespace

double train_epoch(ModelParams& params, Adam& adam, const RunConfig& cfg,
                   const std::vector<CandidateGroup>& groups, const FeatureStore& features,
                   Rng& rng, double* train_acc_out) {
  if (groups.empty()) throw DataError("train_epoch: no groups");
  std::vector<int> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  double loss_sum = 0.0;
  int steps = 0;
  int correct = 0;

  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_groups)) {
    const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_groups));
    Tape tape;
    ParamVars pv = lift_params(tape, params, true);

    std::vector<Var> rows;
    std::vector<double> targets;
    std::vector<GroupRows> layout;
    const CandidateGroup* current = nullptr;
    try {
      for (size_t b = start; b < stop; ++b) {
        const CandidateGroup& group = groups[static_cast<size_t>(order[b])];
        current = &group;
        const std::vector<int> scored =
            sample_negatives(static_cast<int>(group.answers.size()), cfg.neg_per_pos, rng);
        GroupRows gr;
        gr.pos_row = static_cast<int>(rows.size());
        GroupContext ctx =
            encode_group(tape, pv, cfg, features.get(group.image_id), group.question);
        for (int idx : scored) {
          if (idx != 0) gr.neg_rows.push_back(static_cast<int>(rows.size()));
          rows.push_back(candidate_fused(tape, pv, cfg, ctx, group.answers[static_cast<size_t>(idx)]));
          targets.push_back(idx == 0 ? 1.0 : 0.0);
        }
        layout.push_back(std::move(gr));
      }

      Var p = score_batch_train(tape, pv, cfg, rows, params);
      Var lb = binary_cross_entropy(p, targets);
      std::vector<Var> hinges;
      hinges.reserve(layout.size());
      for (const GroupRows& gr : layout) {
        hinges.push_back(margin_hinge(p, gr.pos_row, gr.neg_rows, cfg.margin));
      }
      Var ls = mean_over_axis(stack_rows(hinges), 0);
      Var total = add(lb, vscale(ls, cfg.lambda2));

      const double loss = total.val()[0];
      if (!std::isfinite(loss)) {
        throw TrainAbortError("non-finite loss at step " + std::to_string(steps) + " (group '" +
                              (current ? current->image_id : "?") + "')");
      }
      tape.backward(total);

      for (const GroupRows& gr : layout) {
        int best = gr.pos_row;
        for (int r : gr.neg_rows) {
          if (p.val()[r] > p.val()[best]) best = r;
        }
        if (best == gr.pos_row) ++correct;
      }

      adam.begin_step();
      std::vector<NamedParam> named = visit_params(params);
      const std::vector<NamedVar> vars = visit_param_vars(pv);
      size_t vi = 0;
      for (const NamedParam& np : named) {
        if (!np.trainable) continue;
        const NamedVar& nv = vars[vi++];
        if (nv.name != np.name) throw std::runtime_error("parameter enumeration out of sync");
        const double lr = np.embedding_group ? cfg.lr_embedding : cfg.lr_other;
        adam.update(np.name, *np.tensor, tape.grad_buffer(nv.var.id), lr);
      }

      loss_sum += loss;
      ++steps;
    } catch (const DegenerateAttentionError& e) {
      throw TrainAbortError(std::string(e.what()) + " at step " + std::to_string(steps) +
                            " (group '" + (current ? current->image_id : "?") + "')");
    }
  }

  if (train_acc_out) *train_acc_out = static_cast<double>(correct) / groups.size();
  return loss_sum / steps;
}

std::vector<int> evaluate_choices(const ModelParams& params, const RunConfig& cfg,
                                  const std::vector<CandidateGroup>& groups,
                                  const FeatureStore& features, int jobs) {
  if (groups.empty()) throw DataError("evaluate: no groups");
  const int n = static_cast<int>(groups.size());
  std::vector<int> choices(groups.size(), -1);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (int i = 0; i < n; ++i) {
    const CandidateGroup& g = groups[static_cast<size_t>(i)];
    const std::vector<double> p = score_candidates_eval(
        params, cfg, features.get(g.image_id), g.question, g.answers);
    choices[static_cast<size_t>(i)] = predict_choice(p);
  }
  return choices;
}

double evaluate(const ModelParams& params, const RunConfig& cfg,
                const std::vector<CandidateGroup>& groups, const FeatureStore& features,
                int jobs) {
  const std::vector<int> choices = evaluate_choices(params, cfg, groups, features, jobs);
  const int n = static_cast<int>(choices.size());
  int sum = 0;
  for (int c : choices) sum += (c == 0) ? 1 : 0;
  return static_cast<double>(sum) / n;
}

FitResult fit(ModelParams& params, Adam& adam, const RunConfig& cfg,
              const std::vector<CandidateGroup>& train_groups,
              const std::vector<CandidateGroup>& val_groups, const FeatureStore& features,
              Rng& rng, std::ostream* log) {
  FitResult result;
  std::vector<double> val_history;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double train_acc = 0.0;
    const double mean_loss = train_epoch(params, adam, cfg, train_groups, features, rng, &train_acc);
    const double val_acc = evaluate(params, cfg, val_groups, features);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EpochMetrics m{epoch, mean_loss, train_acc, val_acc, wall};
    result.history.push_back(m);
    val_history.push_back(val_acc);
    if (log) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d\t%.12g\t%.6f\t%.6f\t%.3f\n", epoch, mean_loss,
                    train_acc, val_acc, wall);
      (*log) << line << std::flush;
    }

    if (result.best_epoch == 0 || val_acc > result.best_val_acc) {
      result.best_epoch = epoch;
      result.best_val_acc = val_acc;
      result.best_params = params;
      result.best_adam = adam;
    }
    if (early_stop(val_history, cfg.patience)) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace stvqa

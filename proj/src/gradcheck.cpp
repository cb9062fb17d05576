#include "stvqa/gradcheck.hpp"

#include <cmath>

#include "stvqa/model.hpp"

namespace stvqa {

std::vector<GradBlockReport> finite_difference_check(const std::function<double()>& loss_fn,
                                                     std::vector<FdBlock>& blocks, double step,
                                                     double tol) {
  std::vector<GradBlockReport> reports;
  for (FdBlock& block : blocks) {
    if (!block.param->same_shape(block.analytic)) {
      throw ShapeError("gradcheck block '" + block.name + "': analytic gradient is " +
                       shape_str(block.analytic.shape()) + ", parameter is " +
                       shape_str(block.param->shape()));
    }
    GradBlockReport r;
    r.name = block.name;
    r.checked = block.param->numel();
    for (int i = 0; i < block.param->numel(); ++i) {
      const double old = (*block.param)[i];
      (*block.param)[i] = old + step;
      const double up = loss_fn();
      (*block.param)[i] = old - step;
      const double down = loss_fn();
      (*block.param)[i] = old;
      const double fd = (up - down) / (2.0 * step);
      const double a = block.analytic[i];
      const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      r.max_rel_err = std::max(r.max_rel_err, rel);
    }
    r.pass = r.max_rel_err < tol;
    reports.push_back(std::move(r));
  }
  return reports;
}

bool gradcheck_all_pass(const std::vector<GradBlockReport>& reports) {
  for (const GradBlockReport& r : reports) {
    if (!r.pass) return false;
  }
  return !reports.empty();
}

namespace {

struct TinyGroup {
  FeatureGrid grid;
  TaggedSentence question;
  std::vector<TaggedSentence> answers;
};

TaggedSentence random_sentence(Rng& rng, int words, int vocab) {
  TaggedSentence s;
  for (int i = 0; i < words; ++i) {
    s.tokens.push_back("w" + std::to_string(i));
    s.vocab_ids.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab))));
    s.pos_cats.push_back(static_cast<PosCategory>(rng.below(kPosCategoryCount)));
  }
  return s;
}

std::vector<TinyGroup> tiny_instance(const RunConfig& cfg, Rng& rng, int vocab) {
  std::vector<TinyGroup> groups;
  for (int g = 0; g < 2; ++g) {
    TinyGroup tg;
    tg.grid.image_id = "tiny" + std::to_string(g);
    tg.grid.grid_rows = 2;
    tg.grid.grid_cols = 2;
    tg.grid.regions = random_uniform(rng, {4, cfg.raw_dim}, -1.0, 1.0);
    tg.question = random_sentence(rng, 3 + static_cast<int>(rng.below(2)), vocab);
    for (int a = 0; a < 4; ++a) {
      tg.answers.push_back(random_sentence(rng, 1 + static_cast<int>(rng.below(3)), vocab));
    }
    groups.push_back(std::move(tg));
  }
  return groups;
}

// training loss (two-sided CE + weighted margin) on the tiny batch; all
// candidates scored, batch norm in train mode
double tiny_loss(const ModelParams& params, const RunConfig& cfg,
                 const std::vector<TinyGroup>& groups, std::vector<FdBlock>* analytic_out) {
  Tape tape;
  const bool want_grads = analytic_out != nullptr;
  ParamVars pv = lift_params(tape, params, want_grads);
  ModelParams scratch = params;  // running-stat sink, never read back

  std::vector<Var> rows;
  std::vector<double> targets;
  std::vector<std::pair<int, std::vector<int>>> layout;
  for (const TinyGroup& tg : groups) {
    GroupContext ctx = encode_group(tape, pv, cfg, tg.grid, tg.question);
    const int pos_row = static_cast<int>(rows.size());
    std::vector<int> neg_rows;
    for (size_t a = 0; a < tg.answers.size(); ++a) {
      if (a != 0) neg_rows.push_back(static_cast<int>(rows.size()));
      rows.push_back(candidate_fused(tape, pv, cfg, ctx, tg.answers[a]));
      targets.push_back(a == 0 ? 1.0 : 0.0);
    }
    layout.emplace_back(pos_row, std::move(neg_rows));
  }
  Var p = score_batch_train(tape, pv, cfg, rows, scratch);
  Var lb = binary_cross_entropy(p, targets);
  std::vector<Var> hinges;
  for (const auto& [pos, negs] : layout) hinges.push_back(margin_hinge(p, pos, negs, cfg.margin));
  Var ls = mean_over_axis(stack_rows(hinges), 0);
  Var total = add(lb, vscale(ls, cfg.lambda2));

  if (want_grads) {
    tape.backward(total);
    for (const NamedVar& nv : visit_param_vars(pv)) {
      analytic_out->push_back({nv.name, nullptr, tape.grad_buffer(nv.var.id)});
    }
  }
  return total.val()[0];
}

}  // namespace

std::vector<GradBlockReport> gradcheck_model(const RunConfig& cfg, std::uint64_t seed,
                                             double step, double tol) {
  constexpr int kVocab = 10;
  Rng rng(seed);
  ModelParams work = init_params(cfg, kVocab, rng);
  const std::vector<TinyGroup> groups = tiny_instance(cfg, rng, kVocab);

  std::vector<FdBlock> blocks;
  tiny_loss(work, cfg, groups, &blocks);
  for (FdBlock& b : blocks) {
    bool found = false;
    for (const NamedParam& np : visit_params(work)) {
      if (np.name == b.name) {
        b.param = np.tensor;
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("gradcheck: no parameter named '" + b.name + "'");
  }

  const auto loss_fn = [&]() { return tiny_loss(work, cfg, groups, nullptr); };
  return finite_difference_check(loss_fn, blocks, step, tol);
}

}  // namespace stvqa

#include "stvqa/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stvqa/fusion.hpp"
#include "stvqa/wire.hpp"

namespace stvqa {

std::vector<NamedParam> visit_params(ModelParams& p) {
  std::vector<NamedParam> out;
  out.push_back({"embedding", &p.embedding, true, true});
  out.push_back({"pos_weights", &p.pos_weights, true, false});
  for (size_t l = 0; l < p.conv_filters.size(); ++l) {
    const std::string stem = "conv" + std::to_string(l + 1);
    out.push_back({stem + ".filter", &p.conv_filters[l], true, false});
    out.push_back({stem + ".bias", &p.conv_biases[l], true, false});
  }
  out.push_back({"img.w", &p.w_img, true, false});
  out.push_back({"img.b", &p.b_img, true, false});
  out.push_back({"lambda1", &p.lambda1, true, false});
  out.push_back({"qproj.w", &p.w_qproj, true, false});
  out.push_back({"qproj.b", &p.b_qproj, true, false});
  out.push_back({"aproj.w", &p.w_aproj, true, false});
  out.push_back({"aproj.b", &p.b_aproj, true, false});
  out.push_back({"qi.w", &p.w_qi, true, false});
  out.push_back({"qi.b", &p.b_qi, true, false});
  out.push_back({"bn.gamma", &p.bn_gamma, true, false});
  out.push_back({"bn.beta", &p.bn_beta, true, false});
  out.push_back({"qia.w", &p.w_qia, true, false});
  out.push_back({"qia.b", &p.b_qia, true, false});
  out.push_back({"bn.running_mean", &p.bn_running_mean, false, false});
  out.push_back({"bn.running_var", &p.bn_running_var, false, false});
  return out;
}

ModelParams zero_params(const RunConfig& cfg, int vocab_size) {
  if (vocab_size < 1) throw DataError("model needs a non-empty vocabulary");
  const int d = cfg.embed_dim, di = cfg.img_dim, h = cfg.hidden_dim;
  ModelParams p;
  p.embedding = Tensor({vocab_size, d});
  p.pos_weights = Tensor({kPosCategoryCount});
  for (int l = 1; l <= cfg.lmax; ++l) {
    p.conv_filters.push_back(Tensor({l, d, d}));
    p.conv_biases.push_back(Tensor({d}));
  }
  p.w_img = Tensor({cfg.raw_dim, di});
  p.b_img = Tensor({di});
  p.lambda1 = Tensor({1});
  p.w_qproj = Tensor({d, di});
  p.b_qproj = Tensor({di});
  p.w_aproj = Tensor({d, h});
  p.b_aproj = Tensor({h});
  p.w_qi = Tensor({di, h});
  p.b_qi = Tensor({h});
  p.bn_gamma = Tensor({h});
  p.bn_beta = Tensor({h});
  p.w_qia = Tensor({h, 1});
  p.b_qia = Tensor({1});
  p.bn_running_mean = Tensor({h});
  p.bn_running_var = Tensor({h});
  return p;
}

namespace {

Tensor glorot(Rng& rng, const std::vector<int>& shape, int fan_in, int fan_out) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  return random_uniform(rng, shape, -a, a);
}

}  // namespace

ModelParams init_params(const RunConfig& cfg, int vocab_size, Rng& rng,
                        const EmbeddingTable* pretrained) {
  ModelParams p = zero_params(cfg, vocab_size);
  if (pretrained) {
    if (pretrained->vocab_size() != vocab_size || pretrained->dim() != cfg.embed_dim) {
      throw DataError("embedding table is " + shape_str(pretrained->matrix.shape()) +
                      ", model wants [" + std::to_string(vocab_size) + " x " +
                      std::to_string(cfg.embed_dim) + "]");
    }
    p.embedding = pretrained->matrix;
  } else {
    p.embedding = random_uniform(rng, p.embedding.shape(), -0.05, 0.05);
  }
  p.pos_weights = random_uniform(rng, {kPosCategoryCount}, 0.0, 2.0);
  const int d = cfg.embed_dim, di = cfg.img_dim, h = cfg.hidden_dim;
  for (int l = 1; l <= cfg.lmax; ++l) {
    p.conv_filters[static_cast<size_t>(l - 1)] = glorot(rng, {l, d, d}, l * d, d);
  }
  p.w_img = glorot(rng, {cfg.raw_dim, di}, cfg.raw_dim, di);
  p.lambda1[0] = cfg.lambda1_init;
  p.w_qproj = glorot(rng, {d, di}, d, di);
  p.w_aproj = glorot(rng, {d, h}, d, h);
  p.w_qi = glorot(rng, {di, h}, di, h);
  p.bn_gamma.fill(1.0);
  p.w_qia = glorot(rng, {h, 1}, h, 1);
  p.bn_running_var.fill(1.0);
  return p;
}

ParamVars lift_params(Tape& tape, const ModelParams& p, bool requires_grad) {
  ParamVars v;
  v.embedding = tape.leaf(p.embedding, requires_grad);
  v.pos_weights = tape.leaf(p.pos_weights, requires_grad);
  for (size_t l = 0; l < p.conv_filters.size(); ++l) {
    v.conv_filters.push_back(tape.leaf(p.conv_filters[l], requires_grad));
    v.conv_biases.push_back(tape.leaf(p.conv_biases[l], requires_grad));
  }
  v.w_img = tape.leaf(p.w_img, requires_grad);
  v.b_img = tape.leaf(p.b_img, requires_grad);
  v.lambda1 = tape.leaf(p.lambda1, requires_grad);
  v.w_qproj = tape.leaf(p.w_qproj, requires_grad);
  v.b_qproj = tape.leaf(p.b_qproj, requires_grad);
  v.w_aproj = tape.leaf(p.w_aproj, requires_grad);
  v.b_aproj = tape.leaf(p.b_aproj, requires_grad);
  v.w_qi = tape.leaf(p.w_qi, requires_grad);
  v.b_qi = tape.leaf(p.b_qi, requires_grad);
  v.bn_gamma = tape.leaf(p.bn_gamma, requires_grad);
  v.bn_beta = tape.leaf(p.bn_beta, requires_grad);
  v.w_qia = tape.leaf(p.w_qia, requires_grad);
  v.b_qia = tape.leaf(p.b_qia, requires_grad);
  return v;
}

std::vector<NamedVar> visit_param_vars(const ParamVars& pv) {
  std::vector<NamedVar> out;
  out.push_back({"embedding", pv.embedding, true});
  out.push_back({"pos_weights", pv.pos_weights, false});
  for (size_t l = 0; l < pv.conv_filters.size(); ++l) {
    const std::string stem = "conv" + std::to_string(l + 1);
    out.push_back({stem + ".filter", pv.conv_filters[l], false});
    out.push_back({stem + ".bias", pv.conv_biases[l], false});
  }
  out.push_back({"img.w", pv.w_img, false});
  out.push_back({"img.b", pv.b_img, false});
  out.push_back({"lambda1", pv.lambda1, false});
  out.push_back({"qproj.w", pv.w_qproj, false});
  out.push_back({"qproj.b", pv.b_qproj, false});
  out.push_back({"aproj.w", pv.w_aproj, false});
  out.push_back({"aproj.b", pv.b_aproj, false});
  out.push_back({"qi.w", pv.w_qi, false});
  out.push_back({"qi.b", pv.b_qi, false});
  out.push_back({"bn.gamma", pv.bn_gamma, false});
  out.push_back({"bn.beta", pv.bn_beta, false});
  out.push_back({"qia.w", pv.w_qia, false});
  out.push_back({"qia.b", pv.b_qia, false});
  return out;
}

GroupContext encode_group(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                          const FeatureGrid& grid, const TaggedSentence& question) {
  (void)cfg;
  GroupContext ctx;
  ctx.x_regions = transform_regions(tape, grid, pv.w_img, pv.b_img);
  Var ehat = apply_pos_attention(question, pv.embedding, pv.pos_weights);
  Var etil = conv_ngram_encode(ehat, pv.conv_filters, pv.conv_biases);
  ctx.att_q = attention_from_affinity(affinity_matrix(etil, ctx.x_regions));
  ctx.x_q = vtanh(linear(sentence_embed(etil), pv.w_qproj, pv.b_qproj));
  return ctx;
}

Var candidate_fused(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                    const GroupContext& ctx, const TaggedSentence& answer,
                    AttentionOutput* capture) {
  Var ehat = apply_pos_attention(answer, pv.embedding, pv.pos_weights);
  Var etil = conv_ngram_encode(ehat, pv.conv_filters, pv.conv_biases);
  Var x_ans = vtanh(linear(sentence_embed(etil), pv.w_aproj, pv.b_aproj));
  Var att_a = attention_from_affinity(affinity_matrix(etil, ctx.x_regions));
  Var att;
  switch (cfg.attention_mode) {
    case AttentionMode::Full:
      att = combine_attentions(ctx.att_q, att_a, pv.lambda1);
      break;
    case AttentionMode::QuestionOnly:
      att = normalize_sum(ctx.att_q);
      break;
    case AttentionMode::AnswerOnly:
      att = normalize_sum(att_a);
      break;
    case AttentionMode::None:
      att = uniform_attention(tape, ctx.x_regions.val().dim(0));
      break;
  }
  Var x_img = attend_image(ctx.x_regions, att);
  Var x_qi = fuse_question_image(ctx.x_q, x_img);
  Var x_qia = fuse_answer(x_qi, x_ans, pv.w_qi, pv.b_qi);
  if (capture) {
    capture->att_q = ctx.att_q.val();
    capture->att_a = att_a.val();
    capture->att_combined = att.val();
    capture->x_img = x_img.val();
  }
  return x_qia;
}

Var score_batch_train(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                      const std::vector<Var>& rows, ModelParams& stats_io) {
  (void)tape;
  Var x = stack_rows(rows);
  Tensor batch_mean, batch_var;
  Var bn = batch_norm_train(x, pv.bn_gamma, pv.bn_beta, cfg.bn_eps, &batch_mean, &batch_var);
  const int b = x.val().dim(0);
  const double m = cfg.bn_momentum;
  const double unbias = static_cast<double>(b) / (b - 1);
  for (int j = 0; j < batch_mean.numel(); ++j) {
    stats_io.bn_running_mean[j] = m * stats_io.bn_running_mean[j] + (1.0 - m) * batch_mean[j];
    stats_io.bn_running_var[j] = m * stats_io.bn_running_var[j] + (1.0 - m) * batch_var[j] * unbias;
  }
  return score_rows(bn, pv.w_qia, pv.b_qia);
}

Var score_batch_eval(Tape& tape, const ParamVars& pv, const RunConfig& cfg,
                     const std::vector<Var>& rows, const ModelParams& stats) {
  (void)tape;
  Var x = stack_rows(rows);
  Var bn = batch_norm_eval(x, pv.bn_gamma, pv.bn_beta, stats.bn_running_mean,
                           stats.bn_running_var, cfg.bn_eps);
  return score_rows(bn, pv.w_qia, pv.b_qia);
}

std::vector<double> score_candidates_eval(const ModelParams& params, const RunConfig& cfg,
                                          const FeatureGrid& grid,
                                          const TaggedSentence& question,
                                          const std::vector<TaggedSentence>& answers,
                                          std::vector<AttentionOutput>* capture) {
  if (answers.empty()) throw DataError("no candidate answers to score");
  Tape tape;
  ParamVars pv = lift_params(tape, params, false);
  GroupContext ctx = encode_group(tape, pv, cfg, grid, question);
  std::vector<Var> rows;
  rows.reserve(answers.size());
  if (capture) capture->resize(answers.size());
  for (size_t i = 0; i < answers.size(); ++i) {
    rows.push_back(candidate_fused(tape, pv, cfg, ctx, answers[i],
                                   capture ? &(*capture)[i] : nullptr));
  }
  Var p = score_batch_eval(tape, pv, cfg, rows, params);
  std::vector<double> out(answers.size());
  for (size_t i = 0; i < answers.size(); ++i) out[i] = p.val()[static_cast<int>(i)];
  return out;
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'V', 'Q', 'A'};
constexpr std::uint16_t kVersion = 1;

void write_named_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  wire::write_string(out, name);
  wire::write_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) wire::write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  wire::write_tensor_payload(out, t);
}

std::string config_text(const RunConfig& cfg) {
  // the preset line must come first: the parser applies lines in order and a
  // preset resets everything written before it
  std::ostringstream os;
  const std::map<std::string, std::string> kv = config_to_kv(cfg);
  os << "preset=" << kv.at("preset") << "\n";
  for (const auto& [k, v] : kv) {
    if (k != "preset") os << k << "=" << v << "\n";
  }
  return os.str();
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const RunConfig& cfg,
                     const std::vector<std::string>& vocab, const Adam& adam) {
  if (static_cast<int>(vocab.size()) + 1 != params.embedding.dim(0)) {
    throw DataError("vocabulary of " + std::to_string(vocab.size()) +
                    " tokens does not match embedding table of " +
                    std::to_string(params.embedding.dim(0)) + " rows (UNK included)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 4);
  wire::write_u16(out, kVersion);
  wire::write_string(out, config_text(cfg));
  wire::write_u32(out, static_cast<std::uint32_t>(vocab.size()));
  for (const std::string& tok : vocab) wire::write_string(out, tok);

  ModelParams& mut = const_cast<ModelParams&>(params);
  const std::vector<NamedParam> named = visit_params(mut);
  std::uint32_t count = static_cast<std::uint32_t>(named.size()) + 1;
  count += static_cast<std::uint32_t>(2 * adam.slots().size());
  wire::write_u32(out, count);
  for (const NamedParam& np : named) write_named_tensor(out, np.name, *np.tensor);
  for (const auto& [name, slot] : adam.slots()) {
    write_named_tensor(out, "adam.m." + name, slot.m);
    write_named_tensor(out, "adam.v." + name, slot.v);
  }
  Tensor step = Tensor::scalar(static_cast<double>(adam.step_count()));
  write_named_tensor(out, "adam.step", step);
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const std::uint16_t version = wire::read_u16(in, "checkpoint version");
  if (version != kVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  Checkpoint ck;
  ck.config = parse_config_text(wire::read_string(in, "checkpoint config"), path + " (config)");
  const std::uint32_t vocab_n = wire::read_u32(in, "vocab count");
  ck.vocab.reserve(vocab_n);
  for (std::uint32_t i = 0; i < vocab_n; ++i) ck.vocab.push_back(wire::read_string(in, "vocab"));

  ck.params = zero_params(ck.config, static_cast<int>(vocab_n) + 1);
  ck.adam = Adam(ck.config.beta1, ck.config.beta2, ck.config.adam_eps);

  std::map<std::string, Tensor> loose;
  const std::uint32_t tensor_n = wire::read_u32(in, "tensor count");
  for (std::uint32_t i = 0; i < tensor_n; ++i) {
    const std::string name = wire::read_string(in, "tensor name");
    const std::uint32_t ndim = wire::read_u32(in, "tensor rank");
    if (ndim == 0 || ndim > 4) throw DataError("tensor '" + name + "' has bad rank");
    std::vector<int> dims;
    for (std::uint32_t j = 0; j < ndim; ++j) {
      dims.push_back(static_cast<int>(wire::read_u32(in, "tensor dims")));
    }
    Tensor t(dims);
    wire::read_tensor_payload(in, t, name.c_str());
    if (!loose.emplace(name, std::move(t)).second) {
      throw DataError("duplicate tensor '" + name + "' in checkpoint");
    }
  }

  const std::vector<NamedParam> named = visit_params(ck.params);
  std::map<std::string, const NamedParam*> by_name;
  for (const NamedParam& np : named) by_name[np.name] = &np;

  for (const NamedParam& np : named) {
    auto it = loose.find(np.name);
    if (it == loose.end()) throw DataError("checkpoint missing tensor '" + np.name + "'");
    if (it->second.shape() != np.tensor->shape()) {
      throw DataError("checkpoint tensor '" + np.name + "' is " + shape_str(it->second.shape()) +
                      ", model wants " + shape_str(np.tensor->shape()));
    }
    *np.tensor = std::move(it->second);
    loose.erase(it);
  }
  for (auto& [name, t] : loose) {
    if (name == "adam.step") {
      ck.adam.set_step_count(static_cast<std::int64_t>(t[0]));
      continue;
    }
    const bool is_m = name.rfind("adam.m.", 0) == 0;
    const bool is_v = name.rfind("adam.v.", 0) == 0;
    if (!is_m && !is_v) throw DataError("unexpected tensor '" + name + "' in checkpoint");
    const std::string pname = name.substr(7);
    auto pit = by_name.find(pname);
    if (pit == by_name.end() || !pit->second->trainable) {
      throw DataError("optimizer state '" + name + "' has no matching parameter");
    }
    if (t.shape() != pit->second->tensor->shape()) {
      throw DataError("optimizer state '" + name + "' shape mismatch");
    }
    AdamSlot& slot = ck.adam.slot(pname, t.shape());
    (is_m ? slot.m : slot.v) = std::move(t);
  }
  return ck;
}

EmbeddingTable Checkpoint::rebuild_table() const {
  EmbeddingTable t;
  t.matrix = params.embedding;
  for (size_t i = 0; i < vocab.size(); ++i) t.index[vocab[i]] = static_cast<int>(i);
  t.unk_id = static_cast<int>(vocab.size());
  t.trainable = true;
  return t;
}

}  // namespace stvqa

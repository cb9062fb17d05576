// Command-line front end. Subcommands:
//   train      fit the scorer on a dataset, write best checkpoint + log
//   eval       accuracy of a checkpoint on a dataset
//   predict    score one group from standard input
//   attn-dump  region attention of one group as CSV + PGM files
//   synth      generate the planted synthetic corpus
//   gradcheck  finite-difference audit of every parameter block
//
// All failures print a single "error: ..." line and exit nonzero.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stvqa/config.hpp"
#include "stvqa/data.hpp"
#include "stvqa/fusion.hpp"
#include "stvqa/gradcheck.hpp"
#include "stvqa/model.hpp"
#include "stvqa/text.hpp"
#include "stvqa/train.hpp"

namespace {

using namespace stvqa;

RunConfig config_from_flag(const std::string& path) {
  RunConfig cfg = path.empty() ? preset_config("desk") : load_config(path);
  apply_env_seed(cfg);
  validate_config(cfg);
  return cfg;
}

void check_feature_dims(const FeatureStore& store, const RunConfig& cfg) {
  for (const FeatureGrid& g : store.all()) {
    if (g.raw_dim() != cfg.raw_dim) {
      throw DataError("feature grid '" + g.image_id + "' has raw width " +
                      std::to_string(g.raw_dim()) + ", config expects " +
                      std::to_string(cfg.raw_dim));
    }
  }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, data, val, features, embeddings, out, log;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = config_from_flag(a.config);

  std::vector<RawGroup> raw_train = load_raw_dataset(a.data);
  std::vector<RawGroup> raw_val;
  if (!a.val.empty()) {
    raw_val = load_raw_dataset(a.val);
  } else {
    // no validation file: hold out the tail fifth of the training file
    if (raw_train.size() < 2) throw DataError("need at least 2 groups to split a validation set");
    const size_t n_val = std::max<size_t>(1, raw_train.size() / 5);
    raw_val.assign(raw_train.end() - static_cast<long>(n_val), raw_train.end());
    raw_train.resize(raw_train.size() - n_val);
  }

  EmbeddingTable table = a.embeddings.empty() ? table_from_dataset(raw_train, cfg.embed_dim)
                                              : load_embeddings(a.embeddings, cfg.embed_dim);
  std::vector<CandidateGroup> train_groups = resolve_dataset(raw_train, table);
  std::vector<CandidateGroup> val_groups = resolve_dataset(raw_val, table);

  FeatureStore features = load_feature_grids(a.features);
  check_feature_dims(features, cfg);

  Rng rng(cfg.seed);
  ModelParams params =
      init_params(cfg, table.vocab_size(), rng, a.embeddings.empty() ? nullptr : &table);
  Adam adam(cfg.beta1, cfg.beta2, cfg.adam_eps);

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw DataError("cannot write log '" + log_path + "'");

  FitResult res = fit(params, adam, cfg, train_groups, val_groups, features, rng, &log);
  log.close();
  save_checkpoint(a.out, res.best_params, cfg, table_tokens(table), res.best_adam);

  std::printf("epochs %zu%s\n", res.history.size(), res.stopped_early ? " (early stop)" : "");
  std::printf("best epoch %d val accuracy %.6f\n", res.best_epoch, res.best_val_acc);
  std::printf("checkpoint %s\n", a.out.c_str());
  std::printf("log %s\n", log_path.c_str());
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, features;
  int jobs = 1;
};

int cmd_eval(const EvalArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  EmbeddingTable table = ck.rebuild_table();
  std::vector<CandidateGroup> groups = load_dataset(a.data, table);
  FeatureStore features = load_feature_grids(a.features);
  check_feature_dims(features, ck.config);

  const std::vector<int> choices = evaluate_choices(ck.params, ck.config, groups, features, a.jobs);
  std::map<int, std::pair<int, int>> by_size;  // candidates -> (correct, total)
  int correct = 0;
  for (size_t i = 0; i < groups.size(); ++i) {
    auto& bucket = by_size[static_cast<int>(groups[i].answers.size())];
    ++bucket.second;
    if (choices[i] == 0) {
      ++bucket.first;
      ++correct;
    }
  }
  std::printf("accuracy %.6f (%d/%zu)\n", static_cast<double>(correct) / groups.size(), correct,
              groups.size());
  for (const auto& [n, bucket] : by_size) {
    std::printf("candidates=%d accuracy %.6f (%d/%d)\n", n,
                static_cast<double>(bucket.first) / bucket.second, bucket.first, bucket.second);
  }
  return 0;
}

// ---- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, features;
  bool auto_tag = false;
};

// Prediction input is one dataset record, with two relaxations: is_correct
// labels are optional (and ignored), and tags may be omitted when
// --auto-tag supplies them. A single-answer group is allowed.
TaggedSentence parse_predict_sentence(const nlohmann::json& j, const std::string& where,
                                      bool auto_tag, const EmbeddingTable& table) {
  if (!j.is_object() || !j.contains("tokens")) {
    throw DataError(where + ": expected an object with tokens");
  }
  std::vector<std::string> tokens;
  for (const auto& t : j.at("tokens")) {
    if (!t.is_string()) throw DataError(where + ": tokens must be strings");
    tokens.push_back(t.get<std::string>());
  }
  if (tokens.empty()) throw DataError(where + ": empty sentence");
  std::vector<std::string> tags;
  if (j.contains("tags")) {
    for (const auto& t : j.at("tags")) {
      if (!t.is_string()) throw DataError(where + ": tags must be strings");
      tags.push_back(t.get<std::string>());
    }
    if (tags.size() != tokens.size()) {
      throw DataError(where + ": " + std::to_string(tokens.size()) + " tokens vs " +
                      std::to_string(tags.size()) + " tags");
    }
  } else if (auto_tag) {
    tags = demo_pos_tags(tokens);
  } else {
    throw DataError(where + ": missing tags (pass --auto-tag to infer them)");
  }
  TaggedSentence s;
  s.tokens = tokens;
  for (const std::string& tok : tokens) s.vocab_ids.push_back(table.lookup(tok));
  for (const std::string& tag : tags) s.pos_cats.push_back(group_pos_tag(tag));
  s.validate(table.vocab_size());
  return s;
}

int cmd_predict(const PredictArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  EmbeddingTable table = ck.rebuild_table();
  FeatureStore features = load_feature_grids(a.features);
  check_feature_dims(features, ck.config);

  std::stringstream buf;
  buf << std::cin.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("stdin: ") + e.what());
  }
  if (!j.is_object() || !j.contains("image_id") || !j.at("image_id").is_string()) {
    throw DataError("stdin: missing image_id");
  }
  if (!j.contains("question")) throw DataError("stdin: missing question");
  if (!j.contains("answers") || !j.at("answers").is_array() || j.at("answers").empty()) {
    throw DataError("stdin: missing answers array");
  }
  const std::string image_id = j.at("image_id").get<std::string>();
  TaggedSentence question = parse_predict_sentence(j.at("question"), "question", a.auto_tag, table);
  std::vector<TaggedSentence> answers;
  int idx = 0;
  for (const auto& ans : j.at("answers")) {
    answers.push_back(
        parse_predict_sentence(ans, "answer " + std::to_string(idx), a.auto_tag, table));
    ++idx;
  }

  const std::vector<double> probs =
      score_candidates_eval(ck.params, ck.config, features.get(image_id), question, answers);
  std::printf("choice %d\n", predict_choice(probs));
  for (size_t i = 0; i < probs.size(); ++i) {
    std::printf("prob %zu %.12g\n", i, probs[i]);
  }
  return 0;
}

// ---- attn-dump -------------------------------------------------------------

struct AttnDumpArgs {
  std::string checkpoint, data, features, out_dir;
  int group_id = 0;
};

void write_word_csv(const std::string& path, const RawSentence& raw, const Tensor& pos_weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "token,tag,category,weight\n";
  for (size_t i = 0; i < raw.tokens.size(); ++i) {
    const PosCategory c = group_pos_tag(raw.tags[i]);
    out << raw.tokens[i] << ',' << raw.tags[i] << ',' << pos_category_name(c) << ','
        << pos_weights[static_cast<int>(c)] << '\n';
  }
}

int cmd_attn_dump(const AttnDumpArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  EmbeddingTable table = ck.rebuild_table();
  std::vector<RawGroup> raw = load_raw_dataset(a.data);
  if (a.group_id < 0 || a.group_id >= static_cast<int>(raw.size())) {
    throw DataError("group id " + std::to_string(a.group_id) + " out of range, dataset has " +
                    std::to_string(raw.size()) + " groups");
  }
  const RawGroup& rg = raw[static_cast<size_t>(a.group_id)];
  CandidateGroup group = resolve_group(rg, table);
  FeatureStore features = load_feature_grids(a.features);
  check_feature_dims(features, ck.config);
  const FeatureGrid& grid = features.get(group.image_id);

  std::filesystem::create_directories(a.out_dir);
  std::vector<AttentionOutput> atts;
  score_candidates_eval(ck.params, ck.config, grid, group.question, group.answers, &atts);

  const std::string stem = a.out_dir + "/group" + std::to_string(a.group_id);
  write_word_csv(stem + "_question_words.csv", rg.question, ck.params.pos_weights);
  int files = 1;
  for (size_t i = 0; i < group.answers.size(); ++i) {
    // name files by the candidate's position in the dataset file
    const int orig = group.original_positions[i];
    const std::string cand = stem + "_cand" + std::to_string(orig);
    write_attention_csv(cand + ".csv", grid, atts[i]);
    write_attention_pgm(cand + ".pgm", grid, atts[i].att_combined);
    write_word_csv(cand + "_words.csv", rg.answers[static_cast<size_t>(orig)],
                   ck.params.pos_weights);
    files += 3;
  }
  std::printf("wrote %d files under %s\n", files, a.out_dir.c_str());
  return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
  SynthCorpus corpus = make_synthetic_corpus(a.spec);
  std::string why;
  if (!check_planted_rule(corpus, &why)) {
    throw DataError("planted rule violated: " + why);
  }
  write_synthetic_corpus(corpus, a.out_dir);
  std::printf("train groups %zu\n", corpus.train_groups.size());
  std::printf("val groups %zu\n", corpus.val_groups.size());
  std::printf("vocab %zu\n", corpus.vocab_tokens.size());
  std::printf("features %zu grids of %dx%d x %d\n", corpus.features.size(), a.spec.grid_rows,
              a.spec.grid_cols, a.spec.raw_dim);
  std::printf("planted rule verified, chance accuracy %.6f\n", 1.0 / a.spec.candidates);
  std::printf("wrote train.jsonl val.jsonl features.bin embeddings.txt under %s\n",
              a.out_dir.c_str());
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  RunConfig cfg = config_from_flag(a.config);
  const std::uint64_t seed = a.seed_set ? a.seed : cfg.seed;
  const std::vector<GradBlockReport> reports = gradcheck_model(cfg, seed);
  for (const GradBlockReport& r : reports) {
    std::printf("block %-14s max_rel %.3e checked %5d %s\n", r.name.c_str(), r.max_rel_err,
                r.checked, r.pass ? "PASS" : "FAIL");
  }
  const bool ok = gradcheck_all_pass(reports);
  std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POS-guided attention scorer for multiple-choice visual question answering"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "fit on a dataset, write checkpoint + log");
  train->add_option("--config", train_args.config, "key=value config file (default: desk preset)");
  train->add_option("--data", train_args.data, "training groups, one JSON record per line")
      ->required();
  train->add_option("--val", train_args.val,
                    "validation groups (default: tail fifth of --data)");
  train->add_option("--features", train_args.features, "feature grid file")->required();
  train->add_option("--embeddings", train_args.embeddings,
                    "pretrained word embeddings (default: train from scratch)");
  train->add_option("--out", train_args.out, "checkpoint output path")->required();
  train->add_option("--log", train_args.log, "per-epoch log path (default: <out>.log)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
  eval->add_option("--data", eval_args.data, "groups to score")->required();
  eval->add_option("--features", eval_args.features, "feature grid file")->required();
  eval->add_option("--jobs", eval_args.jobs, "scoring threads")->check(CLI::PositiveNumber);

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "score one group read from standard input");
  predict->add_option("--checkpoint", predict_args.checkpoint, "trained checkpoint")->required();
  predict->add_option("--features", predict_args.features, "feature grid file")->required();
  predict->add_flag("--auto-tag", predict_args.auto_tag,
                    "infer missing POS tags with the demo tagger");

  AttnDumpArgs attn_args;
  CLI::App* attn = app.add_subcommand("attn-dump", "write attention CSV + PGM files for a group");
  attn->add_option("--checkpoint", attn_args.checkpoint, "trained checkpoint")->required();
  attn->add_option("--data", attn_args.data, "dataset holding the group")->required();
  attn->add_option("--features", attn_args.features, "feature grid file")->required();
  attn->add_option("--group-id", attn_args.group_id, "group index within --data")->required();
  attn->add_option("--out-dir", attn_args.out_dir, "output directory")->required();

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate the planted synthetic corpus");
  synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
  synth->add_option("--groups", synth_args.spec.groups, "total groups");
  synth->add_option("--vocab", synth_args.spec.vocab, "vocabulary size");
  synth->add_option("--candidates", synth_args.spec.candidates, "answers per group");
  synth->add_option("--embed-dim", synth_args.spec.embed_dim, "embedding width");
  synth->add_option("--raw-dim", synth_args.spec.raw_dim, "raw region feature width");
  synth->add_option("--grid-rows", synth_args.spec.grid_rows, "feature grid rows");
  synth->add_option("--grid-cols", synth_args.spec.grid_cols, "feature grid columns");
  synth->add_option("--concepts", synth_args.spec.concepts, "planted concept count");
  synth->add_option("--val-fraction", synth_args.spec.val_fraction, "validation share");
  synth->add_option("--seed", synth_args.spec.seed, "corpus seed");

  GradcheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference audit of the gradients");
  grad->add_option("--config", grad_args.config, "key=value config file (default: desk preset)");
  CLI::Option* seed_opt = grad->add_option("--seed", grad_args.seed,
                                           "instance seed (default: config seed)");

  try {
    app.parse(argc, argv);
    grad_args.seed_set = seed_opt->count() > 0;
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (predict->parsed()) return cmd_predict(predict_args);
    if (attn->parsed()) return cmd_attn_dump(attn_args);
    if (synth->parsed()) return cmd_synth(synth_args);
    if (grad->parsed()) return cmd_gradcheck(grad_args);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "stvqa/attention.hpp"

namespace stvqa {

// Every knob of the model and the training loop. Presets carry the
// published full-scale values; the desk preset is sized for seconds-long
// runs on synthetic data.
struct RunConfig {
  std::string preset = "desk";

  // dimensions
  int embed_dim = 8;   // word embedding width d
  int img_dim = 8;     // common region/fusion width; must equal embed_dim
  int raw_dim = 6;     // raw feature width per region
  int hidden_dim = 8;  // fusion hidden width h
  int lmax = 3;        // largest n-gram window

  // loss
  double lambda2 = 0.5;
  double margin = 0.2;
  int neg_per_pos = 2;

  // schedule
  int max_epochs = 200;
  int patience = 50;
  int batch_groups = 8;  // groups per optimizer step
  std::uint64_t seed = 7;

  // optimizer
  double lr_embedding = 0.01;
  double lr_other = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;

  // batch norm
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  // attention ablation switch
  AttentionMode attention_mode = AttentionMode::Full;

  double lambda1_init = 0.5;
};

RunConfig preset_config(const std::string& name);  // desk | visual7w | vqa

// key=value text, one pair per line, '#' comments; a preset=... line first
// selects the base, later keys override it.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

// TVQA_SEED in the environment beats the configured seed.
void apply_env_seed(RunConfig& cfg);

void validate_config(const RunConfig& cfg);

// flat round-trippable view, used for the checkpoint echo
std::map<std::string, std::string> config_to_kv(const RunConfig& cfg);
RunConfig config_from_kv(const std::map<std::string, std::string>& kv);

}  // namespace stvqa

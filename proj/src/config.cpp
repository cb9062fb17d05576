#include "stvqa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stvqa/tensor.hpp"

namespace stvqa {

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") {
    return c;  // struct defaults are the desk preset
  }
  if (name == "visual7w") {
    c.embed_dim = 300;
    c.img_dim = 300;
    c.raw_dim = 2048;
    c.hidden_dim = 4096;
    c.lambda2 = 0.5;
    c.max_epochs = 20;
    c.patience = 5;
    c.batch_groups = 18;
    c.lr_embedding = 0.0002;
    c.lr_other = 0.0001;
    return c;
  }
  if (name == "vqa") {
    c.embed_dim = 300;
    c.img_dim = 300;
    c.raw_dim = 2048;
    c.hidden_dim = 4096;
    c.lambda2 = 0.05;
    c.max_epochs = 20;
    c.patience = 5;
    c.batch_groups = 576;
    c.lr_embedding = 0.0002;
    c.lr_other = 0.0001;
    return c;
  }
  throw DataError("unknown preset '" + name + "' (want desk, visual7w or vqa)");
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw DataError("config key " + key + ": '" + v + "' is not an integer");
  }
  if (pos != v.size()) throw DataError("config key " + key + ": '" + v + "' is not an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw DataError("config key " + key + ": '" + v + "' is not a number");
  }
  if (pos != v.size()) throw DataError("config key " + key + ": '" + v + "' is not a number");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  unsigned long long out;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw DataError("config key " + key + ": '" + v + "' is not an unsigned integer");
  }
  if (pos != v.size()) {
    throw DataError("config key " + key + ": '" + v + "' is not an unsigned integer");
  }
  return out;
}

void apply_kv(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "preset") { c = preset_config(v); return; }
  if (key == "embed_dim") { c.embed_dim = parse_int(key, v); return; }
  if (key == "img_dim") { c.img_dim = parse_int(key, v); return; }
  if (key == "raw_dim") { c.raw_dim = parse_int(key, v); return; }
  if (key == "hidden_dim") { c.hidden_dim = parse_int(key, v); return; }
  if (key == "lmax") { c.lmax = parse_int(key, v); return; }
  if (key == "lambda2") { c.lambda2 = parse_double(key, v); return; }
  if (key == "margin") { c.margin = parse_double(key, v); return; }
  if (key == "neg_per_pos") { c.neg_per_pos = parse_int(key, v); return; }
  if (key == "max_epochs") { c.max_epochs = parse_int(key, v); return; }
  if (key == "patience") { c.patience = parse_int(key, v); return; }
  if (key == "batch_groups") { c.batch_groups = parse_int(key, v); return; }
  if (key == "seed") { c.seed = parse_u64(key, v); return; }
  if (key == "lr_embedding") { c.lr_embedding = parse_double(key, v); return; }
  if (key == "lr_other") { c.lr_other = parse_double(key, v); return; }
  if (key == "beta1") { c.beta1 = parse_double(key, v); return; }
  if (key == "beta2") { c.beta2 = parse_double(key, v); return; }
  if (key == "adam_eps") { c.adam_eps = parse_double(key, v); return; }
  if (key == "bn_eps") { c.bn_eps = parse_double(key, v); return; }
  if (key == "bn_momentum") { c.bn_momentum = parse_double(key, v); return; }
  if (key == "attention_mode") { c.attention_mode = attention_mode_from_string(v); return; }
  if (key == "lambda1_init") { c.lambda1_init = parse_double(key, v); return; }
  throw DataError("unknown config key '" + key + "'");
}

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" +
                      line + "'");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      apply_kv(c, key, value);
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_env_seed(RunConfig& cfg) {
  const char* env = std::getenv("TVQA_SEED");
  if (!env || !*env) return;
  cfg.seed = parse_u64("TVQA_SEED", env);
}

void validate_config(const RunConfig& cfg) {
  if (cfg.embed_dim < 1 || cfg.img_dim < 1 || cfg.raw_dim < 1 || cfg.hidden_dim < 1) {
    throw DataError("config: all dimensions must be positive");
  }
  if (cfg.embed_dim != cfg.img_dim) {
    throw DataError("config: embed_dim (" + std::to_string(cfg.embed_dim) +
                    ") must equal img_dim (" + std::to_string(cfg.img_dim) +
                    "); the word/region affinity needs a shared width");
  }
  if (cfg.lmax < 1 || cfg.lmax > 8) throw DataError("config: lmax must be in [1, 8]");
  if (cfg.margin < 0.0) throw DataError("config: margin must be >= 0");
  if (cfg.neg_per_pos < 1) throw DataError("config: neg_per_pos must be >= 1");
  if (cfg.max_epochs < 1) throw DataError("config: max_epochs must be >= 1");
  if (cfg.patience < 1 || cfg.patience > cfg.max_epochs) {
    throw DataError("config: patience must be in [1, max_epochs]");
  }
  if (cfg.batch_groups < 1) throw DataError("config: batch_groups must be >= 1");
  if (cfg.lr_embedding < 0.0 || cfg.lr_other < 0.0) {
    throw DataError("config: learning rates must be >= 0");
  }
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw DataError("config: adam betas must lie in [0, 1)");
  }
  if (cfg.adam_eps <= 0.0 || cfg.bn_eps <= 0.0) {
    throw DataError("config: adam_eps and bn_eps must be > 0");
  }
  if (cfg.bn_momentum < 0.0 || cfg.bn_momentum >= 1.0) {
    throw DataError("config: bn_momentum must lie in [0, 1)");
  }
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> config_to_kv(const RunConfig& c) {
  std::map<std::string, std::string> kv;
  kv["preset"] = c.preset;
  kv["embed_dim"] = std::to_string(c.embed_dim);
  kv["img_dim"] = std::to_string(c.img_dim);
  kv["raw_dim"] = std::to_string(c.raw_dim);
  kv["hidden_dim"] = std::to_string(c.hidden_dim);
  kv["lmax"] = std::to_string(c.lmax);
  kv["lambda2"] = fmt_double(c.lambda2);
  kv["margin"] = fmt_double(c.margin);
  kv["neg_per_pos"] = std::to_string(c.neg_per_pos);
  kv["max_epochs"] = std::to_string(c.max_epochs);
  kv["patience"] = std::to_string(c.patience);
  kv["batch_groups"] = std::to_string(c.batch_groups);
  kv["seed"] = std::to_string(c.seed);
  kv["lr_embedding"] = fmt_double(c.lr_embedding);
  kv["lr_other"] = fmt_double(c.lr_other);
  kv["beta1"] = fmt_double(c.beta1);
  kv["beta2"] = fmt_double(c.beta2);
  kv["adam_eps"] = fmt_double(c.adam_eps);
  kv["bn_eps"] = fmt_double(c.bn_eps);
  kv["bn_momentum"] = fmt_double(c.bn_momentum);
  kv["attention_mode"] = attention_mode_name(c.attention_mode);
  kv["lambda1_init"] = fmt_double(c.lambda1_init);
  return kv;
}

RunConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  auto preset = kv.find("preset");
  if (preset != kv.end()) c = preset_config(preset->second);
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    apply_kv(c, key, value);
  }
  validate_config(c);
  return c;
}

}  // namespace stvqa

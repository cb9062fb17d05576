#include "stvqa/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stvqa/wire.hpp"

namespace stvqa {

namespace {

using json = nlohmann::ordered_json;

RawSentence parse_sentence(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("tokens") || !j.contains("tags")) {
    throw DataError(where + ": expected an object with tokens and tags");
  }
  RawSentence s;
  for (const auto& t : j.at("tokens")) {
    if (!t.is_string()) throw DataError(where + ": tokens must be strings");
    s.tokens.push_back(t.get<std::string>());
  }
  for (const auto& t : j.at("tags")) {
    if (!t.is_string()) throw DataError(where + ": tags must be strings");
    s.tags.push_back(t.get<std::string>());
  }
  if (s.tokens.empty()) throw DataError(where + ": empty sentence");
  if (s.tokens.size() != s.tags.size()) {
    throw DataError(where + ": " + std::to_string(s.tokens.size()) + " tokens vs " +
                    std::to_string(s.tags.size()) + " tags");
  }
  return s;
}

}  // namespace

RawGroup parse_raw_group(const std::string& json_line, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(origin + ": record is not an object");
  RawGroup g;
  if (!j.contains("image_id") || !j.at("image_id").is_string()) {
    throw DataError(origin + ": missing image_id");
  }
  g.image_id = j.at("image_id").get<std::string>();
  if (!j.contains("question")) throw DataError(origin + ": missing question");
  g.question = parse_sentence(j.at("question"), origin + " question");
  if (!j.contains("answers") || !j.at("answers").is_array()) {
    throw DataError(origin + ": missing answers array");
  }
  int idx = 0;
  for (const auto& a : j.at("answers")) {
    g.answers.push_back(parse_sentence(a, origin + " answer " + std::to_string(idx)));
    const bool correct = a.value("is_correct", false);
    if (correct) {
      if (g.positive >= 0) throw DataError(origin + ": more than one answer marked correct");
      g.positive = idx;
    }
    ++idx;
  }
  if (g.answers.size() < 2) throw DataError(origin + ": a group needs at least 2 answers");
  if (g.positive < 0) throw DataError(origin + ": no answer marked correct");
  return g;
}

std::string raw_group_to_json(const RawGroup& g) {
  json j;
  j["image_id"] = g.image_id;
  j["question"] = {{"tokens", g.question.tokens}, {"tags", g.question.tags}};
  j["answers"] = json::array();
  for (size_t i = 0; i < g.answers.size(); ++i) {
    json a;
    a["tokens"] = g.answers[i].tokens;
    a["tags"] = g.answers[i].tags;
    a["is_correct"] = static_cast<int>(i) == g.positive;
    j["answers"].push_back(std::move(a));
  }
  return j.dump();
}

std::vector<RawGroup> load_raw_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::vector<RawGroup> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_raw_group(line, path + ":" + std::to_string(line_no)));
  }
  return out;
}

namespace {

TaggedSentence resolve_sentence(const RawSentence& raw, const EmbeddingTable& table) {
  TaggedSentence s;
  s.tokens = raw.tokens;
  for (const std::string& tok : raw.tokens) s.vocab_ids.push_back(table.lookup(tok));
  for (const std::string& tag : raw.tags) s.pos_cats.push_back(group_pos_tag(tag));
  s.validate(table.vocab_size());
  return s;
}

}  // namespace

CandidateGroup resolve_group(const RawGroup& raw, const EmbeddingTable& table) {
  CandidateGroup g;
  g.image_id = raw.image_id;
  g.question = resolve_sentence(raw.question, table);
  const int n = static_cast<int>(raw.answers.size());
  g.answers.reserve(raw.answers.size());
  g.original_positions.reserve(raw.answers.size());
  g.answers.push_back(resolve_sentence(raw.answers[static_cast<size_t>(raw.positive)], table));
  g.original_positions.push_back(raw.positive);
  for (int i = 0; i < n; ++i) {
    if (i == raw.positive) continue;
    g.answers.push_back(resolve_sentence(raw.answers[static_cast<size_t>(i)], table));
    g.original_positions.push_back(i);
  }
  return g;
}

std::vector<CandidateGroup> resolve_dataset(const std::vector<RawGroup>& raw,
                                            const EmbeddingTable& table) {
  std::vector<CandidateGroup> out;
  out.reserve(raw.size());
  for (const RawGroup& g : raw) out.push_back(resolve_group(g, table));
  return out;
}

std::vector<CandidateGroup> load_dataset(const std::string& path, const EmbeddingTable& table) {
  return resolve_dataset(load_raw_dataset(path), table);
}

EmbeddingTable load_embeddings(const std::string& path, int expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  EmbeddingTable table;
  std::vector<double> values;
  int dim = expected_dim;
  std::string line;
  int line_no = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (!ls.eof()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric value for token '" +
                      token + "'");
    }
    if (dim == 0) dim = static_cast<int>(vec.size());
    if (dim == 0 || static_cast<int>(vec.size()) != dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": token '" + token + "' has " +
                      std::to_string(vec.size()) + " values, want " + std::to_string(dim));
    }
    if (!table.index.emplace(token, rows).second) {
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate token '" + token + "'");
    }
    values.insert(values.end(), vec.begin(), vec.end());
    ++rows;
  }
  if (rows == 0) throw DataError(path + ": no embeddings found");
  values.insert(values.end(), static_cast<size_t>(dim), 0.0);  // UNK row
  table.matrix = Tensor({rows + 1, dim}, values);
  table.matrix.assert_finite("embedding table");
  table.unk_id = rows;
  return table;
}

EmbeddingTable table_from_dataset(const std::vector<RawGroup>& raw, int dim) {
  if (dim < 1) throw DataError("embedding dimension must be positive");
  EmbeddingTable table;
  int rows = 0;
  auto take = [&](const RawSentence& s) {
    for (const std::string& tok : s.tokens) {
      if (table.index.emplace(tok, rows).second) ++rows;
    }
  };
  for (const RawGroup& g : raw) {
    take(g.question);
    for (const RawSentence& a : g.answers) take(a);
  }
  if (rows == 0) throw DataError("dataset has no tokens to build a vocabulary from");
  table.matrix = Tensor({rows + 1, dim});
  table.unk_id = rows;
  return table;
}

std::vector<std::string> table_tokens(const EmbeddingTable& table) {
  std::vector<std::string> tokens(static_cast<size_t>(table.vocab_size() - 1));
  for (const auto& [tok, row] : table.index) {
    if (row < 0 || row >= static_cast<int>(tokens.size())) {
      throw DataError("embedding index row " + std::to_string(row) + " out of range");
    }
    tokens[static_cast<size_t>(row)] = tok;
  }
  return tokens;
}

// ---- feature grids ---------------------------------------------------------

void FeatureStore::add(FeatureGrid g) {
  g.validate();
  if (!index_.emplace(g.image_id, grids_.size()).second) {
    throw DataError("duplicate image_id '" + g.image_id + "'");
  }
  grids_.push_back(std::move(g));
}

const FeatureGrid& FeatureStore::get(const std::string& image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) throw DataError("no features for image '" + image_id + "'");
  return grids_[it->second];
}

bool FeatureStore::contains(const std::string& image_id) const {
  return index_.count(image_id) > 0;
}

namespace {

constexpr char kGridMagic[4] = {'F', 'G', 'R', 'D'};
constexpr char kIndexMagic[4] = {'F', 'I', 'D', 'X'};
constexpr std::uint16_t kGridVersion = 1;

std::uint64_t grid_checksum(const Tensor& regions) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<size_t>(regions.numel()) * 8);
  for (int i = 0; i < regions.numel(); ++i) {
    std::uint64_t bits;
    const double d = regions[i];
    __builtin_memcpy(&bits, &d, sizeof(bits));
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
  return wire::fnv1a64(bytes.data(), bytes.size());
}

}  // namespace

void save_feature_grids(const std::string& path, const FeatureStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file '" + path + "'");
  out.write(kGridMagic, 4);
  wire::write_u16(out, kGridVersion);
  struct Entry {
    std::string id;
    std::uint64_t offset;
    std::uint64_t checksum;
  };
  std::vector<Entry> entries;
  for (const FeatureGrid& g : store.all()) {
    g.validate();
    entries.push_back({g.image_id, static_cast<std::uint64_t>(out.tellp()), grid_checksum(g.regions)});
    wire::write_u32(out, static_cast<std::uint32_t>(g.k()));
    wire::write_u32(out, static_cast<std::uint32_t>(g.raw_dim()));
    wire::write_u32(out, static_cast<std::uint32_t>(g.grid_rows));
    wire::write_u32(out, static_cast<std::uint32_t>(g.grid_cols));
    wire::write_tensor_payload(out, g.regions);
    wire::write_string(out, g.image_id);
  }
  const std::uint64_t index_start = static_cast<std::uint64_t>(out.tellp());
  wire::write_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    wire::write_string(out, e.id);
    wire::write_u64(out, e.offset);
    wire::write_u64(out, e.checksum);
  }
  wire::write_u64(out, index_start);
  out.write(kIndexMagic, 4);
  if (!out) throw DataError("failed writing feature file '" + path + "'");
}

FeatureStore load_feature_grids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kGridMagic, 4)) {
    throw DataError("'" + path + "' is not a feature file (bad magic)");
  }
  const std::uint16_t version = wire::read_u16(in, "feature version");
  if (version != kGridVersion) {
    throw DataError("feature file version " + std::to_string(version) + " unsupported");
  }
  in.seekg(-12, std::ios::end);
  if (!in) throw DataError("'" + path + "' too short for an index");
  const std::uint64_t index_start = wire::read_u64(in, "index offset");
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kIndexMagic, 4)) {
    throw DataError("'" + path + "' has no trailing index (bad index magic)");
  }
  in.clear();
  in.seekg(static_cast<std::streamoff>(index_start));
  const std::uint32_t count = wire::read_u32(in, "index count");
  struct Entry {
    std::string id;
    std::uint64_t offset;
    std::uint64_t checksum;
  };
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.id = wire::read_string(in, "index id");
    e.offset = wire::read_u64(in, "index offset");
    e.checksum = wire::read_u64(in, "index checksum");
    entries.push_back(std::move(e));
  }
  FeatureStore store;
  for (const Entry& e : entries) {
    in.clear();
    in.seekg(static_cast<std::streamoff>(e.offset));
    FeatureGrid g;
    const int k = static_cast<int>(wire::read_u32(in, "grid K"));
    const int raw = static_cast<int>(wire::read_u32(in, "grid D_raw"));
    g.grid_rows = static_cast<int>(wire::read_u32(in, "grid rows"));
    g.grid_cols = static_cast<int>(wire::read_u32(in, "grid cols"));
    if (k < 1 || raw < 1 || k > (1 << 20) || raw > (1 << 20)) {
      throw DataError("feature grid for '" + e.id + "' has implausible dimensions");
    }
    g.regions = Tensor({k, raw});
    wire::read_tensor_payload(in, g.regions, "grid payload");
    g.image_id = wire::read_string(in, "grid image_id");
    if (g.image_id != e.id) {
      throw DataError("feature index points at '" + e.id + "' but found '" + g.image_id + "'");
    }
    if (grid_checksum(g.regions) != e.checksum) {
      throw DataError("feature payload checksum mismatch for '" + e.id + "'");
    }
    store.add(std::move(g));
  }
  return store;
}

// ---- synthetic corpus ------------------------------------------------------

namespace {

// Orthonormal rows via Gram-Schmidt on uniform draws; redraws on near collapse.
Tensor orthonormal_rows(Rng& rng, int rows, int cols) {
  Tensor m({rows, cols});
  for (int r = 0; r < rows; ++r) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (int c = 0; c < cols; ++c) m.at(r, c) = rng.uniform(-1.0, 1.0);
      for (int p = 0; p < r; ++p) {
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += m.at(r, c) * m.at(p, c);
        for (int c = 0; c < cols; ++c) m.at(r, c) -= dot * m.at(p, c);
      }
      double norm = 0.0;
      for (int c = 0; c < cols; ++c) norm += m.at(r, c) * m.at(r, c);
      norm = std::sqrt(norm);
      if (norm > 1e-3) {
        for (int c = 0; c < cols; ++c) m.at(r, c) /= norm;
        break;
      }
      if (attempt == 63) throw DataError("could not orthonormalize concept directions");
    }
  }
  return m;
}

const char* kFillerTags[] = {"NN", "JJ", "IN", "DT", "VBZ"};

RawSentence make_answer(Rng& rng, int concept_token, const SynthSpec& spec) {
  RawSentence s;
  const int fillers = static_cast<int>(rng.below(3));  // 0..2 extra tokens
  const int concept_pos = static_cast<int>(rng.below(static_cast<std::uint64_t>(fillers) + 1));
  for (int i = 0; i <= fillers; ++i) {
    if (i == concept_pos) {
      s.tokens.push_back("tok" + std::to_string(concept_token));
      s.tags.push_back("NN");
    } else {
      const int filler =
          spec.concepts + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.vocab - spec.concepts)));
      s.tokens.push_back("tok" + std::to_string(filler));
      s.tags.push_back(kFillerTags[rng.below(5)]);
    }
  }
  return s;
}

RawSentence make_question(Rng& rng, const SynthSpec& spec) {
  RawSentence s;
  s.tokens = {"what", "is"};
  s.tags = {"WP", "VBZ"};
  const int fillers = 2 + static_cast<int>(rng.below(3));  // 2..4
  for (int i = 0; i < fillers; ++i) {
    const int filler =
        spec.concepts + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.vocab - spec.concepts)));
    s.tokens.push_back("tok" + std::to_string(filler));
    s.tags.push_back(kFillerTags[rng.below(5)]);
  }
  return s;
}

}  // namespace

SynthCorpus make_synthetic_corpus(const SynthSpec& spec) {
  if (spec.concepts > spec.embed_dim) {
    throw DataError("synthetic corpus: concepts must fit the embedding dimension");
  }
  if (spec.concepts > spec.raw_dim) {
    throw DataError("synthetic corpus: concepts must fit the raw feature dimension");
  }
  if (spec.concepts < spec.candidates) {
    throw DataError("synthetic corpus: need at least as many concepts as candidates");
  }
  if (spec.vocab <= spec.concepts) {
    throw DataError("synthetic corpus: vocabulary must be larger than the concept set");
  }
  if (spec.groups < 2 || spec.val_fraction <= 0.0 || spec.val_fraction >= 1.0) {
    throw DataError("synthetic corpus: need >= 2 groups and val_fraction in (0,1)");
  }
  if (spec.rule != "dominant-region") {
    throw DataError("unknown planted rule '" + spec.rule + "'");
  }
  SynthCorpus c;
  c.spec = spec;
  Rng rng(spec.seed);

  for (int i = 0; i < spec.vocab; ++i) c.vocab_tokens.push_back("tok" + std::to_string(i));
  c.vocab_tokens.push_back("what");
  c.vocab_tokens.push_back("is");

  const int vocab_total = static_cast<int>(c.vocab_tokens.size());
  c.embeddings = Tensor({vocab_total, spec.embed_dim});
  for (int i = 0; i < vocab_total; ++i) {
    if (i < spec.concepts) {
      c.embeddings.at(i, i) = 1.0;  // one-hot concept token
    } else {
      for (int j = 0; j < spec.embed_dim; ++j) c.embeddings.at(i, j) = rng.uniform(-0.1, 0.1);
    }
  }

  c.concept_dirs = orthonormal_rows(rng, spec.concepts, spec.raw_dim);

  const int k = spec.grid_rows * spec.grid_cols;
  std::vector<RawGroup> all;
  for (int g = 0; g < spec.groups; ++g) {
    const int concept_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.concepts)));
    const int region = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    c.truth_concept.push_back(concept_id);
    c.truth_region.push_back(region);

    FeatureGrid grid;
    grid.image_id = "img" + std::to_string(g);
    grid.grid_rows = spec.grid_rows;
    grid.grid_cols = spec.grid_cols;
    grid.regions = Tensor({k, spec.raw_dim});
    for (int r = 0; r < k; ++r) {
      for (int j = 0; j < spec.raw_dim; ++j) {
        grid.regions.at(r, j) = rng.uniform(-0.1, 0.1);
        if (r == region) grid.regions.at(r, j) += 3.0 * c.concept_dirs.at(concept_id, j);
      }
    }
    c.features.add(std::move(grid));

    RawGroup group;
    group.image_id = "img" + std::to_string(g);
    group.question = make_question(rng, spec);

    // negatives name concepts absent from this image
    std::vector<int> others;
    for (int j = 0; j < spec.concepts; ++j) {
      if (j != concept_id) others.push_back(j);
    }
    rng.shuffle(others);
    group.positive = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.candidates)));
    int next_other = 0;
    for (int a = 0; a < spec.candidates; ++a) {
      const int tok = (a == group.positive) ? concept_id : others[static_cast<size_t>(next_other++)];
      group.answers.push_back(make_answer(rng, tok, spec));
    }
    all.push_back(std::move(group));
  }

  const int val_n = std::max(1, static_cast<int>(std::lround(spec.groups * spec.val_fraction)));
  const int train_n = spec.groups - val_n;
  if (train_n < 1) throw DataError("synthetic corpus: split leaves no training groups");
  c.train_groups.assign(all.begin(), all.begin() + train_n);
  c.val_groups.assign(all.begin() + train_n, all.end());
  return c;
}

void write_synthetic_corpus(const SynthCorpus& c, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write_groups = [](const std::string& path, const std::vector<RawGroup>& groups) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const RawGroup& g : groups) out << raw_group_to_json(g) << "\n";
  };
  write_groups(out_dir + "/train.jsonl", c.train_groups);
  write_groups(out_dir + "/val.jsonl", c.val_groups);
  save_feature_grids(out_dir + "/features.bin", c.features);

  std::ofstream emb(out_dir + "/embeddings.txt", std::ios::binary | std::ios::trunc);
  if (!emb) throw DataError("cannot write '" + out_dir + "/embeddings.txt'");
  emb.precision(17);
  for (size_t i = 0; i < c.vocab_tokens.size(); ++i) {
    emb << c.vocab_tokens[i];
    for (int j = 0; j < c.embeddings.dim(1); ++j) {
      emb << " " << c.embeddings.at(static_cast<int>(i), j);
    }
    emb << "\n";
  }
}

bool check_planted_rule(const SynthCorpus& c, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  std::vector<const RawGroup*> all;
  for (const RawGroup& g : c.train_groups) all.push_back(&g);
  for (const RawGroup& g : c.val_groups) all.push_back(&g);
  if (all.size() != c.truth_concept.size() || all.size() != c.truth_region.size()) {
    return fail("truth metadata does not cover all groups");
  }
  for (size_t gi = 0; gi < all.size(); ++gi) {
    const RawGroup& g = *all[gi];
    const FeatureGrid& grid = c.features.get(g.image_id);
    // recover the dominant concept from the features alone
    int best_concept = -1, best_region = -1;
    double best = -1e300;
    for (int j = 0; j < c.spec.concepts; ++j) {
      for (int r = 0; r < grid.k(); ++r) {
        double dot = 0.0;
        for (int d = 0; d < grid.raw_dim(); ++d) {
          dot += grid.regions.at(r, d) * c.concept_dirs.at(j, d);
        }
        if (dot > best) {
          best = dot;
          best_concept = j;
          best_region = r;
        }
      }
    }
    const std::string where = "group " + std::to_string(gi) + " (" + g.image_id + ")";
    if (best_concept != c.truth_concept[gi]) {
      return fail(where + ": features name concept " + std::to_string(best_concept) +
                  ", truth says " + std::to_string(c.truth_concept[gi]));
    }
    if (best_region != c.truth_region[gi]) {
      return fail(where + ": dominant region mismatch");
    }
    const std::string concept_token = "tok" + std::to_string(best_concept);
    for (size_t a = 0; a < g.answers.size(); ++a) {
      const bool has = std::find(g.answers[a].tokens.begin(), g.answers[a].tokens.end(),
                                 concept_token) != g.answers[a].tokens.end();
      const bool is_pos = static_cast<int>(a) == g.positive;
      if (is_pos && !has) return fail(where + ": correct answer lacks the concept token");
      if (!is_pos && has) {
        return fail(where + ": negative answer " + std::to_string(a) + " names the concept");
      }
    }
  }
  if (why) why->clear();
  return true;
}

// ---- attention dumps -------------------------------------------------------

void write_attention_csv(const std::string& path, const FeatureGrid& grid,
                         const AttentionOutput& att) {
  if (att.att_q.numel() != grid.k() || att.att_a.numel() != grid.k() ||
      att.att_combined.numel() != grid.k()) {
    throw ShapeError("attention dump: weight lengths do not match the grid");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "region_row,region_col,att_q,att_a,att_combined\n";
  for (int r = 0; r < grid.k(); ++r) {
    out << (r / grid.grid_cols) << "," << (r % grid.grid_cols) << "," << att.att_q[r] << ","
        << att.att_a[r] << "," << att.att_combined[r] << "\n";
  }
}

void write_attention_pgm(const std::string& path, const FeatureGrid& grid,
                         const Tensor& weights) {
  if (weights.numel() != grid.k()) {
    throw ShapeError("attention heatmap: weight length does not match the grid");
  }
  double lo = weights[0], hi = weights[0];
  for (int i = 1; i < weights.numel(); ++i) {
    lo = std::min(lo, weights[i]);
    hi = std::max(hi, weights[i]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "P5\n" << grid.grid_cols << " " << grid.grid_rows << "\n255\n";
  for (int i = 0; i < weights.numel(); ++i) {
    int v = 0;
    if (hi > lo) v = static_cast<int>(std::lround((weights[i] - lo) / (hi - lo) * 255.0));
    out.put(static_cast<char>(std::clamp(v, 0, 255)));
  }
}

}  // namespace stvqa

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stvqa/attention.hpp"
#include "stvqa/tensor.hpp"
#include "stvqa/text.hpp"
#include "stvqa/vision.hpp"

namespace stvqa {

// A dataset record as it sits in the file: tokens and Penn Treebank tag
// strings, not yet resolved against a vocabulary.
struct RawSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct RawGroup {
  std::string image_id;
  RawSentence question;
  std::vector<RawSentence> answers;
  int positive = -1;  // position of the correct answer in file order
};

// A group ready for the model: ids resolved, positive canonicalized to
// index 0. original_positions[i] is where answers[i] sat in the file, so
// predictions can be reported in the caller's order.
struct CandidateGroup {
  std::string image_id;
  TaggedSentence question;
  std::vector<TaggedSentence> answers;
  std::vector<int> original_positions;
};

RawGroup parse_raw_group(const std::string& json_line, const std::string& origin);
std::string raw_group_to_json(const RawGroup& g);

std::vector<RawGroup> load_raw_dataset(const std::string& path);

CandidateGroup resolve_group(const RawGroup& raw, const EmbeddingTable& table);
std::vector<CandidateGroup> resolve_dataset(const std::vector<RawGroup>& raw,
                                            const EmbeddingTable& table);
std::vector<CandidateGroup> load_dataset(const std::string& path, const EmbeddingTable& table);

// Whitespace text embeddings: token then `dim` floats per line. Appends a
// zero UNK row. dim 0 means infer from the first line.
EmbeddingTable load_embeddings(const std::string& path, int expected_dim);

// Vocabulary in first-appearance order over a dataset, zero vectors
// (trainable-from-scratch path); UNK row appended.
EmbeddingTable table_from_dataset(const std::vector<RawGroup>& raw, int dim);

// Tokens for embedding rows 0..V-2 (everything but UNK), row order.
std::vector<std::string> table_tokens(const EmbeddingTable& table);

// ---- feature grids ---------------------------------------------------------

class FeatureStore {
 public:
  void add(FeatureGrid g);
  const FeatureGrid& get(const std::string& image_id) const;
  bool contains(const std::string& image_id) const;
  std::size_t size() const { return grids_.size(); }
  const std::vector<FeatureGrid>& all() const { return grids_; }

 private:
  std::vector<FeatureGrid> grids_;
  std::map<std::string, std::size_t> index_;
};

void save_feature_grids(const std::string& path, const FeatureStore& store);
FeatureStore load_feature_grids(const std::string& path);

// ---- synthetic corpus ------------------------------------------------------

struct SynthSpec {
  int groups = 200;
  int vocab = 50;
  int candidates = 4;
  int embed_dim = 8;
  int raw_dim = 6;
  int grid_rows = 2;
  int grid_cols = 2;
  int concepts = 6;
  double val_fraction = 0.2;
  std::uint64_t seed = 7;
  std::string rule = "dominant-region";
};

// Groups whose correct answer names the concept planted in the image's
// dominant region, so the scorer has a learnable cross-modal signal and
// chance accuracy is exactly 1/N.
struct SynthCorpus {
  SynthSpec spec;
  std::vector<RawGroup> train_groups;
  std::vector<RawGroup> val_groups;
  FeatureStore features;
  std::vector<std::string> vocab_tokens;  // first `concepts` entries are the concept tokens
  Tensor embeddings;                      // vocab x embed_dim, written to embeddings.txt
  Tensor concept_dirs;                    // concepts x raw_dim, orthonormal rows
  std::vector<int> truth_concept;         // per group, train then val
  std::vector<int> truth_region;
};

SynthCorpus make_synthetic_corpus(const SynthSpec& spec);

// train.jsonl, val.jsonl, features.bin, embeddings.txt under out_dir.
void write_synthetic_corpus(const SynthCorpus& c, const std::string& out_dir);

// Brute-force consistency check of the planted rule over every group.
bool check_planted_rule(const SynthCorpus& c, std::string* why = nullptr);

// ---- attention dumps -------------------------------------------------------

void write_attention_csv(const std::string& path, const FeatureGrid& grid,
                         const AttentionOutput& att);
void write_attention_pgm(const std::string& path, const FeatureGrid& grid,
                         const Tensor& weights);

}  // namespace stvqa

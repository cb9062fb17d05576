#pragma once

#include <map>
#include <string>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/tensor.hpp"

namespace stvqa {

// The 7 coarse word classes that carry their own attention weight.
enum class PosCategory : int { CD = 0, J, N, V, WP, WRB, O };
constexpr int kPosCategoryCount = 7;

// Total map from a Penn Treebank tag to its category; unlisted tags fall to O.
PosCategory group_pos_tag(const std::string& ptb_tag);
const char* pos_category_name(PosCategory c);

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<int> vocab_ids;
  std::vector<PosCategory> pos_cats;

  int length() const { return static_cast<int>(tokens.size()); }
  // equal lengths, M >= 1, ids within [0, vocab_size)
  void validate(int vocab_size) const;
};

struct EmbeddingTable {
  Tensor matrix;                     // V x d, last row reserved for UNK
  std::map<std::string, int> index;  // token -> row
  int unk_id = -1;
  bool trainable = true;

  int vocab_size() const { return matrix.dim(0); }
  int dim() const { return matrix.dim(1); }
  int lookup(const std::string& token) const;  // row id, UNK for unknown tokens
};

// Rows e_i scaled by the weight of their word's category.
Var apply_pos_attention(const TaggedSentence& sent, Var table, Var pos_weights);

// Per window size: conv1d_same then tanh; elementwise max across window sizes.
// filters[l] is [(l+1) x d x d] for window size l+1, biases[l] is [d].
Var conv_ngram_encode(Var x_hat, const std::vector<Var>& filters, const std::vector<Var>& biases);

// Mean over word rows.
Var sentence_embed(Var e_tilde);

// Tiny lookup/suffix tagger for demo input only. Nowhere near a real tagger;
// datasets are expected to carry their own tags.
std::vector<std::string> demo_pos_tags(const std::vector<std::string>& tokens);

}  // namespace stvqa

#include "stvqa/text.hpp"

#include <cctype>

namespace stvqa {

PosCategory group_pos_tag(const std::string& tag) {
  if (tag == "CD") return PosCategory::CD;
  if (tag == "JJ" || tag == "JJR" || tag == "JJS") return PosCategory::J;
  if (tag == "NN" || tag == "NNS" || tag == "NNP" || tag == "NNPS") return PosCategory::N;
  if (tag == "VB" || tag == "VBD" || tag == "VBG" || tag == "VBN" || tag == "VBP" ||
      tag == "VBZ") {
    return PosCategory::V;
  }
  if (tag == "WP" || tag == "WP$") return PosCategory::WP;
  if (tag == "WRB") return PosCategory::WRB;
  return PosCategory::O;
}

const char* pos_category_name(PosCategory c) {
  switch (c) {
    case PosCategory::CD: return "CD";
    case PosCategory::J: return "J";
    case PosCategory::N: return "N";
    case PosCategory::V: return "V";
    case PosCategory::WP: return "WP";
    case PosCategory::WRB: return "WRB";
    case PosCategory::O: return "O";
  }
  return "?";
}

void TaggedSentence::validate(int vocab_size) const {
  if (tokens.empty()) throw DataError("empty sentence");
  if (tokens.size() != vocab_ids.size() || tokens.size() != pos_cats.size()) {
    throw DataError("sentence with " + std::to_string(tokens.size()) + " tokens but " +
                    std::to_string(vocab_ids.size()) + " ids and " +
                    std::to_string(pos_cats.size()) + " tags");
  }
  for (int id : vocab_ids) {
    if (id < 0 || id >= vocab_size) {
      throw DataError("vocab id " + std::to_string(id) + " outside table of " +
                      std::to_string(vocab_size) + " rows");
    }
  }
}

int EmbeddingTable::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? unk_id : it->second;
}

Var apply_pos_attention(const TaggedSentence& sent, Var table, Var pos_weights) {
  sent.validate(table.val().dim(0));
  std::vector<int> cats;
  cats.reserve(sent.pos_cats.size());
  for (PosCategory c : sent.pos_cats) cats.push_back(static_cast<int>(c));
  Var emb = embed_rows(table, sent.vocab_ids);
  return scale_rows_by_category(emb, pos_weights, cats);
}

Var conv_ngram_encode(Var x_hat, const std::vector<Var>& filters, const std::vector<Var>& biases) {
  if (filters.empty() || filters.size() != biases.size()) {
    throw ShapeError("conv_ngram_encode: need one (filter, bias) pair per window size");
  }
  Var out;
  for (size_t l = 0; l < filters.size(); ++l) {
    Var act = vtanh(conv1d_same(x_hat, filters[l], biases[l]));
    out = out.defined() ? vmax(out, act) : act;  // ties keep the smaller window
  }
  return out;
}

Var sentence_embed(Var e_tilde) { return mean_over_axis(e_tilde, 0); }

namespace {

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.' && c != ',') return false;
  }
  return true;
}

bool ends_with(const std::string& s, const char* suf) {
  const std::string_view sv(suf);
  return s.size() >= sv.size() && s.compare(s.size() - sv.size(), sv.size(), sv) == 0;
}

}  // namespace

std::vector<std::string> demo_pos_tags(const std::vector<std::string>& tokens) {
  static const std::map<std::string, std::string> lexicon = {
      {"what", "WP"},   {"who", "WP"},    {"whom", "WP"},   {"whose", "WP$"},
      {"where", "WRB"}, {"when", "WRB"},  {"why", "WRB"},   {"how", "WRB"},
      {"is", "VBZ"},    {"are", "VBP"},   {"was", "VBD"},   {"were", "VBD"},
      {"be", "VB"},     {"been", "VBN"},  {"being", "VBG"}, {"do", "VBP"},
      {"does", "VBZ"},  {"did", "VBD"},   {"has", "VBZ"},   {"have", "VBP"},
      {"had", "VBD"},   {"can", "MD"},    {"will", "MD"},   {"would", "MD"},
      {"the", "DT"},    {"a", "DT"},      {"an", "DT"},     {"this", "DT"},
      {"that", "DT"},   {"these", "DT"},  {"those", "DT"},  {"in", "IN"},
      {"on", "IN"},     {"at", "IN"},     {"of", "IN"},     {"for", "IN"},
      {"with", "IN"},   {"near", "IN"},   {"and", "CC"},    {"or", "CC"},
      {"but", "CC"},    {"not", "RB"},    {"no", "DT"},     {"it", "PRP"},
      {"he", "PRP"},    {"she", "PRP"},   {"they", "PRP"},  {"there", "EX"},
      {"one", "CD"},    {"two", "CD"},    {"three", "CD"},  {"four", "CD"},
      {"five", "CD"},   {"six", "CD"},    {"seven", "CD"},  {"eight", "CD"},
      {"nine", "CD"},   {"ten", "CD"},    {"many", "JJ"},   {"red", "JJ"},
      {"green", "JJ"},  {"blue", "JJ"},   {"white", "JJ"},  {"black", "JJ"},
      {"large", "JJ"},  {"small", "JJ"},  {"man", "NN"},    {"woman", "NN"},
      {"people", "NNS"}};
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (const std::string& raw : tokens) {
    std::string t;
    t.reserve(raw.size());
    for (char c : raw) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    auto it = lexicon.find(t);
    if (it != lexicon.end()) {
      tags.push_back(it->second);
    } else if (all_digits(t)) {
      tags.push_back("CD");
    } else if (ends_with(t, "ing")) {
      tags.push_back("VBG");
    } else if (ends_with(t, "ed")) {
      tags.push_back("VBD");
    } else if (ends_with(t, "ly")) {
      tags.push_back("RB");
    } else if (ends_with(t, "est") && t.size() > 4) {
      tags.push_back("JJS");
    } else if (ends_with(t, "s") && t.size() > 3) {
      tags.push_back("NNS");
    } else {
      tags.push_back("NN");
    }
  }
  return tags;
}

}  // namespace stvqa

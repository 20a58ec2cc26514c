#include "core/chunker.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace phg {

const char* phrase_kind_name(PhraseKind k) {
  switch (k) {
    case PhraseKind::noun: return "noun";
    case PhraseKind::verb: return "verb";
    case PhraseKind::preposition: return "preposition";
    case PhraseKind::adjective: return "adjective";
  }
  return "?";
}

const Lexicon& default_lexicon() {
  static const Lexicon lex = {
      {"red", Pos::adjective},      {"blue", Pos::adjective},   {"green", Pos::adjective},
      {"yellow", Pos::adjective},   {"orange", Pos::adjective}, {"purple", Pos::adjective},
      {"white", Pos::adjective},    {"black", Pos::adjective},  {"square", Pos::noun},
      {"circle", Pos::noun},        {"triangle", Pos::noun},    {"cat", Pos::noun},
      {"left", Pos::preposition},   {"right", Pos::preposition},{"above", Pos::preposition},
      {"below", Pos::preposition},  {"of", Pos::preposition},   {"on", Pos::preposition},
      {"and", Pos::conjunction},    {"laying", Pos::verb},
  };
  return lex;
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (const auto& [word, pos] : default_lexicon()) v.push_back(word);
    std::sort(v.begin(), v.end());
    return v;
  }();
  return vocab;
}

int token_id(const std::string& word) {
  const auto& v = vocabulary();
  auto it = std::lower_bound(v.begin(), v.end(), word);
  if (it == v.end() || *it != word)
    throw std::invalid_argument("token_id: word not in vocabulary: " + word);
  return static_cast<int>(it - v.begin());
}

namespace {

// Category a token contributes to when grouping runs.
enum class RunCat { nounish, verb, prep };

RunCat run_category(Pos p) {
  switch (p) {
    case Pos::noun:
    case Pos::adjective:
    case Pos::conjunction: return RunCat::nounish;
    case Pos::verb: return RunCat::verb;
    case Pos::preposition: return RunCat::prep;
  }
  return RunCat::nounish;
}

void validate(const PhraseDecomposition& d) {
  if (d.tokens.empty()) throw std::invalid_argument("decomposition: empty sentence");
  if (d.phrases.empty()) throw std::invalid_argument("decomposition: no phrases");
  int cursor = 0;
  for (const auto& p : d.phrases) {
    if (p.start != cursor || p.end <= p.start)
      throw std::invalid_argument("decomposition: spans must be contiguous, ordered and cover "
                                  "the sentence");
    cursor = p.end;
  }
  if (cursor != d.word_count())
    throw std::invalid_argument("decomposition: spans do not cover all words");
}

void merge_tail(PhraseDecomposition& d, int l_max) {
  if (l_max < 1) throw std::invalid_argument("chunk: l_max must be >= 1");
  if (d.level_count() <= l_max) return;
  d.phrases[l_max - 1].end = d.word_count();
  d.phrases.resize(l_max);
}

}  // namespace

PhraseDecomposition chunk(const std::vector<std::string>& tokens, const Lexicon& lexicon,
                          int l_max) {
  if (tokens.empty()) throw std::invalid_argument("chunk: empty sentence");
  std::vector<Pos> pos;
  pos.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = lexicon.find(t);
    if (it == lexicon.end())
      throw std::invalid_argument("chunk: unknown token \"" + t +
                                  "\" (not in lexicon; pass explicit spans for open text)");
    pos.push_back(it->second);
  }

  PhraseDecomposition d;
  d.tokens = tokens;
  int n = static_cast<int>(tokens.size());
  int i = 0;
  while (i < n) {
    RunCat cat = run_category(pos[i]);
    int j = i + 1;
    while (j < n && run_category(pos[j]) == cat) ++j;
    PhraseSpan span;
    span.start = i;
    span.end = j;
    switch (cat) {
      case RunCat::verb: span.kind = PhraseKind::verb; break;
      case RunCat::prep: span.kind = PhraseKind::preposition; break;
      case RunCat::nounish: {
        bool has_noun = false;
        for (int k = i; k < j; ++k)
          if (pos[k] == Pos::noun) has_noun = true;
        span.kind = has_noun ? PhraseKind::noun : PhraseKind::adjective;
        break;
      }
    }
    d.phrases.push_back(span);
    i = j;
  }
  merge_tail(d, l_max);
  validate(d);
  return d;
}

PhraseDecomposition chunk(const std::vector<std::string>& tokens, int l_max) {
  return chunk(tokens, default_lexicon(), l_max);
}

PhraseDecomposition decomposition_from_spans(const std::vector<std::string>& tokens,
                                             const std::vector<PhraseSpan>& spans) {
  PhraseDecomposition d;
  d.tokens = tokens;
  d.phrases = spans;
  validate(d);
  return d;
}

std::vector<std::vector<uint8_t>> phrase_position_encodings(const PhraseDecomposition& d) {
  std::vector<std::vector<uint8_t>> enc;
  enc.reserve(d.phrases.size());
  for (const auto& p : d.phrases) {
    std::vector<uint8_t> bits(d.word_count(), 0);
    for (int i = p.start; i < p.end; ++i) bits[i] = 1;
    enc.push_back(std::move(bits));
  }
  return enc;
}

std::vector<uint8_t> hierarchical_mask(const PhraseDecomposition& d, int level) {
  if (level < 1 || level > d.level_count())
    throw std::invalid_argument("hierarchical_mask: level " + std::to_string(level) +
                                " out of range [1," + std::to_string(d.level_count()) + "]");
  // Sum of the first `level` phrase position encodings; contiguity and
  // ordering of the spans make this a strict prefix of ones.
  std::vector<uint8_t> bits(d.word_count(), 0);
  auto enc = phrase_position_encodings(d);
  for (int i = 0; i < level; ++i)
    for (int w = 0; w < d.word_count(); ++w) bits[w] = static_cast<uint8_t>(bits[w] + enc[i][w]);
  return bits;
}

std::vector<std::vector<uint8_t>> all_masks(const PhraseDecomposition& d) {
  std::vector<std::vector<uint8_t>> masks;
  for (int j = 1; j <= d.level_count(); ++j) masks.push_back(hierarchical_mask(d, j));
  return masks;
}

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string w;
  while (iss >> w) out.push_back(w);
  return out;
}

std::string chunk_json_line(const PhraseDecomposition& d) {
  nlohmann::json j;
  j["tokens"] = d.tokens;
  j["phrases"] = nlohmann::json::array();
  for (const auto& p : d.phrases)
    j["phrases"].push_back(
        {{"kind", phrase_kind_name(p.kind)}, {"start", p.start}, {"end", p.end}});
  j["masks"] = nlohmann::json::array();
  for (const auto& m : all_masks(d)) {
    nlohmann::json row = nlohmann::json::array();
    for (uint8_t b : m) row.push_back(static_cast<int>(b));
    j["masks"].push_back(row);
  }
  return j.dump();
}

}  // namespace phg

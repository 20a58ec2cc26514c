#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace phg {

enum class Pos { noun, verb, preposition, adjective, conjunction };
enum class PhraseKind { noun, verb, preposition, adjective };

const char* phrase_kind_name(PhraseKind k);

// word -> part of speech over the closed synthetic vocabulary
using Lexicon = std::map<std::string, Pos>;
const Lexicon& default_lexicon();

// Sorted word list defining token ids for the text encoder.
const std::vector<std::string>& vocabulary();
int token_id(const std::string& word);

struct PhraseSpan {
  PhraseKind kind;
  int start = 0;  // word index, inclusive
  int end = 0;    // exclusive
};

// Ordered contiguous phrases covering the whole sentence.
struct PhraseDecomposition {
  std::vector<std::string> tokens;
  std::vector<PhraseSpan> phrases;

  int level_count() const { return static_cast<int>(phrases.size()); }
  int word_count() const { return static_cast<int>(tokens.size()); }
};

// Rule-based decoupling: maximal runs of adjective/noun/conjunction words form
// noun phrases (adjective phrases when no noun occurs in the run), verb runs
// form verb phrases, preposition runs form prepositional phrases. Sentences
// with more than `l_max` phrases have the tail merged into the final phrase.
PhraseDecomposition chunk(const std::vector<std::string>& tokens, const Lexicon& lexicon,
                          int l_max = 4);
PhraseDecomposition chunk(const std::vector<std::string>& tokens, int l_max = 4);

// Annotation passthrough for text outside the closed vocabulary; validates
// that the spans are contiguous, ordered and cover the sentence.
PhraseDecomposition decomposition_from_spans(const std::vector<std::string>& tokens,
                                             const std::vector<PhraseSpan>& spans);

// p_i of the i-th phrase (0-based): ones exactly on its span.
std::vector<std::vector<uint8_t>> phrase_position_encodings(const PhraseDecomposition& d);

// M_j for 1 <= level <= L: the sum of the first `level` position encodings,
// always a prefix of ones followed by zeros.
std::vector<uint8_t> hierarchical_mask(const PhraseDecomposition& d, int level);
std::vector<std::vector<uint8_t>> all_masks(const PhraseDecomposition& d);

std::vector<std::string> split_words(const std::string& line);
std::string chunk_json_line(const PhraseDecomposition& d);

}  // namespace phg

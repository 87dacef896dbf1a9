#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stresslab {

// Coarse tag set.  Rule annotation only ever produces ARTICLE, PREPOSITION,
// STOPWORD, PUNCT and OTHER; VERB and NOUN come from merged external files.
enum class PosTag { article, preposition, stopword, verb, noun, punct, other };

std::string_view to_string(PosTag tag);
PosTag pos_from_string(std::string_view name);  // throws validation_error

struct Span {
  std::size_t begin = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive token index
  bool operator==(const Span&) const = default;
};

struct AnnotatedText {
  std::vector<std::string> tokens;
  std::vector<Span> sentences;   // partition of [0, tokens.size())
  std::vector<PosTag> pos;       // empty, or one tag per token
  std::vector<Span> entities;    // sorted, non-overlapping token ranges
  std::vector<std::string> entity_classes;  // parallel to entities ("" = unknown)
  bool merged = false;           // true once external annotations were folded in

  bool has_pos() const { return !pos.empty(); }
};

// Whitespace-and-punctuation tokenization.  The marks . , ? ! : ; ( ) and the
// double quote are split out as standalone tokens; everything else stays
// attached to its word.  Sentence boundaries fall after . ? ! followed by
// whitespace and a capital letter (or at end of text), except after a fixed
// list of abbreviations such as "Mr." and "Dr.".
AnnotatedText tokenize(std::string_view text);

// Inverse of tokenize up to whitespace: joins with single spaces except no
// space before . , ? ! : ; ), no space after (, and quote pairing by parity.
std::string detokenize(std::span<const std::string> tokens);

// Fills `pos` from fixed word lists (articles, prepositions, stopwords,
// punctuation); all other tokens become OTHER.
AnnotatedText annotate_rules(AnnotatedText at);

bool is_punct_token(std::string_view token);
bool is_stopword(std::string_view token);  // includes articles and prepositions

// One record per sample id from an external annotation file.
struct ExternalAnnotation {
  std::vector<std::string> tokens;
  std::vector<PosTag> pos;
  std::vector<Span> entities;
  std::vector<std::string> entity_classes;
};

using AnnotationFile = std::map<std::string, ExternalAnnotation>;

AnnotationFile load_annotations(const std::filesystem::path& path);
AnnotationFile parse_annotations(std::istream& in, std::string_view origin);

// Overlays file tags/entities onto a rule-annotated text.  Token counts must
// match, tags must be known, and entity spans must be non-overlapping and
// fall inside a single sentence; violations raise validation_error.
AnnotatedText merge_annotations(AnnotatedText at, const ExternalAnnotation& ann,
                                const std::string& sample_id);

}  // namespace stresslab

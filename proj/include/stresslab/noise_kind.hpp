#pragma once

#include <string_view>

namespace stresslab {

enum class NoiseKind {
  truncation,
  article_removal,
  preposition_removal,
  stopword_removal,
  verb_lemmatization,
  token_drop,
  repeated_token,
  local_swap,
  middle_swap,
  noised_punctuation,
  sentence_switch,
  sentence_replace,
  negation,
  generic_entity,
  entity_switch,
  verb_switch,
  noun_switch,
  positioned_error,
  rep_k,
  freq_ngram,
  copy_source,
  injection,
  bert_diverge,
};

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);  // throws validation_error

// Reordering noises count every moved token twice in the raw edit distance,
// so their noise-ratio is halved.
bool is_switching_kind(NoiseKind kind);

}  // namespace stresslab

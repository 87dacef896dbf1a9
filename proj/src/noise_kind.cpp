#include "stresslab/noise_kind.hpp"

#include <array>
#include <string>
#include <utility>

#include "stresslab/error.hpp"

namespace stresslab {

namespace {
constexpr std::array<std::pair<NoiseKind, std::string_view>, 23> kNames = {{
    {NoiseKind::truncation, "truncation"},
    {NoiseKind::article_removal, "article_removal"},
    {NoiseKind::preposition_removal, "preposition_removal"},
    {NoiseKind::stopword_removal, "stopword_removal"},
    {NoiseKind::verb_lemmatization, "verb_lemmatization"},
    {NoiseKind::token_drop, "token_drop"},
    {NoiseKind::repeated_token, "repeated_token"},
    {NoiseKind::local_swap, "local_swap"},
    {NoiseKind::middle_swap, "middle_swap"},
    {NoiseKind::noised_punctuation, "noised_punctuation"},
    {NoiseKind::sentence_switch, "sentence_switch"},
    {NoiseKind::sentence_replace, "sentence_replace"},
    {NoiseKind::negation, "negation"},
    {NoiseKind::generic_entity, "generic_entity"},
    {NoiseKind::entity_switch, "entity_switch"},
    {NoiseKind::verb_switch, "verb_switch"},
    {NoiseKind::noun_switch, "noun_switch"},
    {NoiseKind::positioned_error, "positioned_error"},
    {NoiseKind::rep_k, "rep_k"},
    {NoiseKind::freq_ngram, "freq_ngram"},
    {NoiseKind::copy_source, "copy_source"},
    {NoiseKind::injection, "injection"},
    {NoiseKind::bert_diverge, "bert_diverge"},
}};
}  // namespace

std::string_view to_string(NoiseKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw validation_error("unknown noise kind: " + std::string(name));
}

bool is_switching_kind(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::sentence_switch:
    case NoiseKind::entity_switch:
    case NoiseKind::verb_switch:
    case NoiseKind::noun_switch:
    case NoiseKind::local_swap:
    case NoiseKind::middle_swap:
      return true;
    default:
      return false;
  }
}

}  // namespace stresslab

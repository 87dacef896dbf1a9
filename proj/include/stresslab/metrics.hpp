#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stresslab/corpus.hpp"

namespace stresslab {

using TokenList = std::vector<std::string>;

// --- raw metric functions over token lists -------------------------------

// Clipped n-gram matches against the per-reference maximum count, plus the
// total hypothesis n-gram count.  Exposed so tests can pin the hand-counted
// fractions directly.
std::pair<std::size_t, std::size_t> clipped_ngram_matches(const TokenList& hyp,
                                                          const std::vector<TokenList>& refs,
                                                          std::size_t n);

// Geometric mean of clipped precisions (orders 1..max_n, capped at |hyp|)
// with add-epsilon smoothing and a brevity penalty against the closest
// reference length.  Ranges over [0,1]; hyp == ref gives exactly 1.
double bleu(const TokenList& hyp, const std::vector<TokenList>& refs, std::size_t max_n = 4);

// F-measure of n-gram overlap; multi-reference = max over references.
double rouge_n(const TokenList& hyp, const std::vector<TokenList>& refs, std::size_t n);

// LCS-based f-measure; multi-reference = max over references.
double rouge_l(const TokenList& hyp, const std::vector<TokenList>& refs);
std::size_t lcs_length(const TokenList& a, const TokenList& b);

enum class OverlapVariant { precision, recall, f1 };

// Greedy one-to-one token matching (multiset intersection); P = m/|hyp|,
// R = m/|ref|, F harmonic. Multi-reference = max of the variant over refs.
double overlap_prf(const TokenList& hyp, const std::vector<TokenList>& refs,
                   OverlapVariant variant);

// 1 - distinct/total n-grams; 0 when fewer than n tokens.
double rep_ngram(const TokenList& hyp, std::size_t n = 4);

// distinct/total n-grams; 1 when fewer than n tokens (documented convention).
double distinct_n(const TokenList& hyp, std::size_t n);

// --- registry --------------------------------------------------------------

struct MetricDescriptor {
  enum class Scope { sample, set };
  std::string name;
  bool higher_is_better = true;
  Scope scope = Scope::sample;
  bool needs_source = false;
  bool needs_references = true;
};

// A sample-scope scorer: hypothesis text (tokenized internally) against the
// sample's references.
struct BuiltinMetric {
  MetricDescriptor descriptor;
  std::function<double(const std::string& hyp, const Sample& sample)> score;
};

const std::vector<std::string>& builtin_metric_names();
bool is_builtin_metric(const std::string& name);
BuiltinMetric make_builtin_metric(const std::string& name);  // throws validation_error

}  // namespace stresslab

#include "stresslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stresslab/annotate.hpp"
#include "stresslab/error.hpp"

namespace stresslab {

namespace {

constexpr double kBleuEpsilon = 0.1;

// n-grams keyed by their space-joined form; tokens never contain whitespace.
std::map<std::string, std::size_t> ngram_counts(const TokenList& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += ' ';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

double harmonic_f(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

std::pair<std::size_t, std::size_t> clipped_ngram_matches(const TokenList& hyp,
                                                          const std::vector<TokenList>& refs,
                                                          std::size_t n) {
  auto hyp_counts = ngram_counts(hyp, n);
  std::map<std::string, std::size_t> max_ref;
  for (const TokenList& ref : refs)
    for (const auto& [key, count] : ngram_counts(ref, n))
      max_ref[key] = std::max(max_ref[key], count);
  std::size_t matches = 0, total = 0;
  for (const auto& [key, count] : hyp_counts) {
    total += count;
    auto it = max_ref.find(key);
    if (it != max_ref.end()) matches += std::min(count, it->second);
  }
  return {matches, total};
}

double bleu(const TokenList& hyp, const std::vector<TokenList>& refs, std::size_t max_n) {
  if (hyp.empty()) throw validation_error("bleu: empty hypothesis");
  if (refs.empty()) throw validation_error("bleu: no references");

  std::size_t orders = std::min(max_n, hyp.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    auto [matches, total] = clipped_ngram_matches(hyp, refs, n);
    log_sum += std::log((static_cast<double>(matches) + kBleuEpsilon) /
                        (static_cast<double>(total) + kBleuEpsilon));
  }
  double precision = std::exp(log_sum / static_cast<double>(orders));

  // Closest reference length; ties go to the shorter reference.
  std::size_t c = hyp.size();
  std::size_t r = refs[0].size();
  for (const TokenList& ref : refs) {
    std::size_t d_new = ref.size() > c ? ref.size() - c : c - ref.size();
    std::size_t d_old = r > c ? r - c : c - r;
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  double bp = c >= r ? 1.0
                     : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * precision;
}

double rouge_n(const TokenList& hyp, const std::vector<TokenList>& refs, std::size_t n) {
  if (refs.empty()) throw validation_error("rouge_n: no references");
  auto hyp_counts = ngram_counts(hyp, n);
  std::size_t hyp_total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  double best = 0.0;
  for (const TokenList& ref : refs) {
    auto ref_counts = ngram_counts(ref, n);
    std::size_t ref_total = ref.size() >= n ? ref.size() - n + 1 : 0;
    if (hyp_total == 0 || ref_total == 0) continue;
    std::size_t matches = 0;
    for (const auto& [key, count] : hyp_counts) {
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    double p = static_cast<double>(matches) / static_cast<double>(hyp_total);
    double r = static_cast<double>(matches) / static_cast<double>(ref_total);
    best = std::max(best, harmonic_f(p, r));
  }
  return best;
}

std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenList& hyp, const std::vector<TokenList>& refs) {
  if (refs.empty()) throw validation_error("rouge_l: no references");
  double best = 0.0;
  for (const TokenList& ref : refs) {
    if (hyp.empty() || ref.empty()) continue;
    double lcs = static_cast<double>(lcs_length(hyp, ref));
    double p = lcs / static_cast<double>(hyp.size());
    double r = lcs / static_cast<double>(ref.size());
    best = std::max(best, harmonic_f(p, r));
  }
  return best;
}

double overlap_prf(const TokenList& hyp, const std::vector<TokenList>& refs,
                   OverlapVariant variant) {
  if (refs.empty()) throw validation_error("overlap_prf: no references");
  auto hyp_counts = ngram_counts(hyp, 1);
  double best = 0.0;
  for (const TokenList& ref : refs) {
    if (hyp.empty() || ref.empty()) continue;
    auto ref_counts = ngram_counts(ref, 1);
    std::size_t matches = 0;
    for (const auto& [key, count] : hyp_counts) {
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    double p = static_cast<double>(matches) / static_cast<double>(hyp.size());
    double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    double v = variant == OverlapVariant::precision ? p
               : variant == OverlapVariant::recall  ? r
                                                    : harmonic_f(p, r);
    best = std::max(best, v);
  }
  return best;
}

double rep_ngram(const TokenList& hyp, std::size_t n) {
  if (hyp.size() < n) return 0.0;
  auto counts = ngram_counts(hyp, n);
  double total = static_cast<double>(hyp.size() - n + 1);
  return 1.0 - static_cast<double>(counts.size()) / total;
}

double distinct_n(const TokenList& hyp, std::size_t n) {
  if (hyp.size() < n) return 1.0;
  auto counts = ngram_counts(hyp, n);
  double total = static_cast<double>(hyp.size() - n + 1);
  return static_cast<double>(counts.size()) / total;
}

namespace {

std::vector<TokenList> tokenize_refs(const Sample& sample, const std::string& metric) {
  if (sample.references.empty())
    throw validation_error(metric + ": sample " + sample.id + " has no references");
  std::vector<TokenList> refs;
  for (const std::string& r : sample.references) refs.push_back(tokenize(r).tokens);
  return refs;
}

}  // namespace

const std::vector<std::string>& builtin_metric_names() {
  static const std::vector<std::string> names = {"bleu",      "rouge2",    "rougeL",
                                                 "overlap-p", "overlap-r", "overlap-f",
                                                 "rep4",      "distinct2"};
  return names;
}

bool is_builtin_metric(const std::string& name) {
  const auto& names = builtin_metric_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

BuiltinMetric make_builtin_metric(const std::string& name) {
  BuiltinMetric m;
  m.descriptor.name = name;
  if (name == "bleu") {
    m.score = [](const std::string& hyp, const Sample& s) {
      return bleu(tokenize(hyp).tokens, tokenize_refs(s, "bleu"), 4);
    };
  } else if (name == "rouge2") {
    m.score = [](const std::string& hyp, const Sample& s) {
      return rouge_n(tokenize(hyp).tokens, tokenize_refs(s, "rouge2"), 2);
    };
  } else if (name == "rougeL") {
    m.score = [](const std::string& hyp, const Sample& s) {
      return rouge_l(tokenize(hyp).tokens, tokenize_refs(s, "rougeL"));
    };
  } else if (name == "overlap-p" || name == "overlap-r" || name == "overlap-f") {
    OverlapVariant v = name == "overlap-p" ? OverlapVariant::precision
                       : name == "overlap-r" ? OverlapVariant::recall
                                             : OverlapVariant::f1;
    m.score = [v, name](const std::string& hyp, const Sample& s) {
      return overlap_prf(tokenize(hyp).tokens, tokenize_refs(s, name), v);
    };
  } else if (name == "rep4") {
    // Negated so that higher is better, like every registry metric; the raw
    // repetition fraction stays available as rep_ngram().
    m.descriptor.needs_references = false;
    m.score = [](const std::string& hyp, const Sample&) {
      return -rep_ngram(tokenize(hyp).tokens, 4);
    };
  } else if (name == "distinct2") {
    m.descriptor.needs_references = false;
    m.score = [](const std::string& hyp, const Sample&) {
      return distinct_n(tokenize(hyp).tokens, 2);
    };
  } else {
    throw validation_error("unknown metric: " + name);
  }
  return m;
}

}  // namespace stresslab

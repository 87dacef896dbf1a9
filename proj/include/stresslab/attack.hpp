#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stresslab/candidates.hpp"
#include "stresslab/corpus.hpp"
#include "stresslab/line_process.hpp"

namespace stresslab {

// Fixed table of easily-confused word pairs: a/an, this/these, that/those,
// the singular/plural pronoun family, and word-form numbers mapping one step
// up (seven -> eight). Case-insensitive with capitalization carried over.
class ConfusionProvider : public CandidateProvider {
 public:
  std::string name() const override { return "confusion"; }
  std::vector<std::string> candidates(const std::vector<std::string>& tokens,
                                      std::size_t position) override;
};

// Child process answering {"tokens":[...],"position":N} with
// {"candidates":[...]}; also powers the bert_diverge noise kind.
class ExternalCandidateProvider : public CandidateProvider {
 public:
  ExternalCandidateProvider(std::vector<std::string> command, double timeout_s = 30.0);
  std::string name() const override { return "external"; }
  std::vector<std::string> candidates(const std::vector<std::string>& tokens,
                                      std::size_t position) override;

 private:
  std::unique_ptr<LineProcess> proc_;
  double timeout_s_;
};

struct AttackConfig {
  double min_noise_ratio = 0.1;   // must be > 0 for a real attack; 0 returns at once
  std::size_t max_iters = 32;
  std::vector<CandidateProvider*> providers;  // consulted in order
};

struct AttackStep {
  std::size_t iteration = 0;
  std::string op;        // "del" or "sub"
  std::size_t pos = 0;
  std::string token;     // substituted-in token; empty for del
  double score = 0.0;    // score after applying this step
  double ratio = 0.0;    // noise-ratio after applying this step
};

struct AttackResult {
  std::string sample_id;
  std::string text;
  double score = 0.0;
  double ratio = 0.0;
  bool reached_min_ratio = false;
  std::vector<AttackStep> trajectory;
};

// Scores a token-list hypothesis; the attack binds the metric to
// (source, hypothesis, gold-as-reference) so references are never consulted.
using AttackScorer = std::function<double(const std::vector<std::string>& tokens)>;

// Builds the standard scorer for a built-in metric name.
AttackScorer make_attack_scorer(const std::string& metric, const Sample& sample);

// Greedy enumeration: each iteration tries deleting every position and every
// provider substitution, applies the single best-scoring edit, and stops once
// the noise-ratio against gold reaches min_noise_ratio (checked before the
// first iteration) or max_iters is exhausted. Deterministic tie-break:
// lowest position, delete before substitute, lexicographic candidate.
AttackResult greedy_attack(const Sample& sample, const AttackScorer& score,
                           const AttackConfig& cfg);

}  // namespace stresslab

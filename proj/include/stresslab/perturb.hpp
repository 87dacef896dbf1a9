#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stresslab/annotate.hpp"
#include "stresslab/candidates.hpp"
#include "stresslab/corpus.hpp"
#include "stresslab/noise_kind.hpp"

namespace stresslab {

// Fully determines one perturbation: kind + level + seed + kind-specific
// options (position, mode, span_len, top_k, fix_last_sentence, ...).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::truncation;
  double level = 0.0;  // portion in (0,1] or integer count, kind-dependent
  std::uint64_t seed = 0;
  std::map<std::string, std::string> options;
};

struct EditRecord {
  enum class Op { del, ins, sub, set_text };
  Op op = Op::del;
  std::size_t pos = 0;
  std::string payload;  // inserted/substituted token, or the whole text for set_text
  bool operator==(const EditRecord&) const = default;
};

std::string_view to_string(EditRecord::Op op);
EditRecord::Op edit_op_from_string(std::string_view name);

struct NoisedHypothesis {
  std::string sample_id;
  std::string text;
  NoiseSpec spec;
  std::vector<EditRecord> edits;
  bool skipped = false;               // noise was inapplicable; text == gold
  std::vector<std::string> notes;     // unknown verb forms, unmatched sentences, ...
};

// Exact n-gram counts over a corpus's gold hypotheses.
struct NgramTable {
  std::size_t n = 0;
  std::map<std::string, std::size_t> counts;  // key: space-joined tokens

  // Top-k by frequency, ties broken lexicographically.
  std::vector<std::string> top(std::size_t k) const;
};

NgramTable collect_ngrams(const Corpus& corpus, std::size_t n);

// Sorted distinct tokens over a corpus's gold hypotheses (positioned_error's
// vocabulary pool).
std::vector<std::string> corpus_vocabulary(const Corpus& corpus);

// Context some kinds need beyond the sample itself.
struct PerturbContext {
  const Corpus* donor = nullptr;              // sentence_replace, injection append
  const NgramTable* ngrams = nullptr;         // freq_ngram
  const std::vector<std::string>* vocab = nullptr;  // positioned_error mode=random
  CandidateProvider* candidates = nullptr;    // bert_diverge
};

// Applies one noise to one sample.  Deterministic under spec.seed, which is
// chained with the kind name and sample id so per-sample streams are
// independent of scheduling.  Throws validation_error on bad specs or
// missing prerequisites.
NoisedHypothesis apply_noise(const Sample& sample, const AnnotatedText& at,
                             const NoiseSpec& spec, const PerturbContext& ctx = {});

// Replays an edit log against the gold text; the result must equal the
// recorded noised text (edit-log soundness contract).
std::string replay_edits(const std::string& gold, std::span<const EditRecord> edits);

// The five shipped injection templates, keyed inj1..inj5.
const std::map<std::string, std::string>& injection_templates();

// Lemma lookup used by verb_lemmatization and negation's do-support:
// irregular-verb dictionary plus -s/-ed/-ing stripping.  Returns nullopt for
// forms none of the rules recognize.
std::optional<std::string> lemmatize_verb(const std::string& token);

}  // namespace stresslab

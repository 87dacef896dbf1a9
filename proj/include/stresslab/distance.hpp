#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stresslab/corpus.hpp"
#include "stresslab/noise_kind.hpp"

namespace stresslab {

// Minimal insert/delete/substitute edit count between token lists, unit costs.
std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b);

struct SampleRatio {
  std::string id;
  std::size_t levenshtein = 0;
  std::size_t len_gold = 0;
  double ratio = 0.0;  // halved already for switching kinds
};

struct NoiseRatioReport {
  std::vector<SampleRatio> per_sample;
  double mean_ratio = 0.0;
  bool switching_halved = false;
};

// Mean over samples of levenshtein(h', h) / len(h), tokenized with the module
// tokenizer; halved for switching kinds.  Sets are aligned by sample id; a
// noised id missing from gold is a validation error.
NoiseRatioReport noise_ratio(const Corpus& gold, const Corpus& noised, NoiseKind kind);

}  // namespace stresslab

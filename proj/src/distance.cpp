#include "stresslab/distance.hpp"

#include <algorithm>
#include <unordered_map>

#include "stresslab/annotate.hpp"
#include "stresslab/error.hpp"

namespace stresslab {

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) return levenshtein(b, a);  // keep the rows short
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

NoiseRatioReport noise_ratio(const Corpus& gold, const Corpus& noised, NoiseKind kind) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const Sample& s : gold.samples) by_id[s.id] = &s;

  NoiseRatioReport report;
  report.switching_halved = is_switching_kind(kind);
  double divisor = report.switching_halved ? 2.0 : 1.0;

  for (const Sample& n : noised.samples) {
    auto it = by_id.find(n.id);
    if (it == by_id.end())
      throw validation_error("noise_ratio: noised sample '" + n.id + "' missing from gold set");
    std::vector<std::string> gold_tokens = tokenize(it->second->gold).tokens;
    std::vector<std::string> noised_tokens = tokenize(n.gold).tokens;
    if (gold_tokens.empty())
      throw validation_error("noise_ratio: gold sample '" + n.id + "' has no tokens");
    SampleRatio sr;
    sr.id = n.id;
    sr.levenshtein = levenshtein(noised_tokens, gold_tokens);
    sr.len_gold = gold_tokens.size();
    sr.ratio = static_cast<double>(sr.levenshtein) / static_cast<double>(sr.len_gold) / divisor;
    report.per_sample.push_back(std::move(sr));
  }
  if (report.per_sample.empty())
    throw validation_error("noise_ratio: noised set is empty");

  double sum = 0.0;
  for (const SampleRatio& sr : report.per_sample) sum += sr.ratio;
  report.mean_ratio = sum / static_cast<double>(report.per_sample.size());
  return report;
}

}  // namespace stresslab

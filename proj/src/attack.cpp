#include "stresslab/attack.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "stresslab/annotate.hpp"
#include "stresslab/distance.hpp"
#include "stresslab/error.hpp"
#include "stresslab/metrics.hpp"

namespace stresslab {

using json = nlohmann::json;

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_title_case(const std::string& t) {
  return !t.empty() && std::isupper(static_cast<unsigned char>(t[0]));
}

std::string capitalized(std::string t) {
  if (!t.empty()) t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  return t;
}

const std::unordered_map<std::string, std::vector<std::string>>& confusion_table() {
  static const std::unordered_map<std::string, std::vector<std::string>> table = {
      {"a", {"an"}},
      {"an", {"a"}},
      {"this", {"these"}},
      {"these", {"this"}},
      {"that", {"those"}},
      {"those", {"that"}},
      {"he", {"she", "it", "they"}},
      {"she", {"he", "it", "they"}},
      {"it", {"he", "she", "they"}},
      {"they", {"he", "she", "it"}},
      // word numbers map one step up only
      {"one", {"two"}},
      {"two", {"three"}},
      {"three", {"four"}},
      {"four", {"five"}},
      {"five", {"six"}},
      {"six", {"seven"}},
      {"seven", {"eight"}},
      {"eight", {"nine"}},
      {"nine", {"ten"}},
      {"ten", {"eleven"}},
      {"eleven", {"twelve"}},
      {"twelve", {"thirteen"}},
  };
  return table;
}

}  // namespace

std::vector<std::string> ConfusionProvider::candidates(const std::vector<std::string>& tokens,
                                                       std::size_t position) {
  const std::string& tok = tokens[position];
  auto it = confusion_table().find(lower(tok));
  if (it == confusion_table().end()) return {};
  std::vector<std::string> out = it->second;
  if (is_title_case(tok))
    for (std::string& c : out) c = capitalized(c);
  return out;
}

ExternalCandidateProvider::ExternalCandidateProvider(std::vector<std::string> command,
                                                     double timeout_s)
    : proc_(std::make_unique<LineProcess>(command)), timeout_s_(timeout_s) {}

std::vector<std::string> ExternalCandidateProvider::candidates(
    const std::vector<std::string>& tokens, std::size_t position) {
  nlohmann::ordered_json req;
  req["tokens"] = tokens;
  req["position"] = position;
  proc_->send_line(req.dump());
  auto line = proc_->read_line(timeout_s_);
  if (!line)
    throw runtime_failure("candidate provider [" + proc_->command_line() +
                          "] exited mid-conversation");
  json reply = json::parse(*line, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("candidates") ||
      !reply["candidates"].is_array())
    throw runtime_failure("candidate provider [" + proc_->command_line() +
                          "] sent a malformed reply: " + *line);
  std::vector<std::string> out;
  for (const auto& c : reply["candidates"]) {
    std::string token = c.get<std::string>();
    if (std::find(out.begin(), out.end(), token) == out.end()) out.push_back(token);
  }
  return out;
}

AttackScorer make_attack_scorer(const std::string& metric, const Sample& sample) {
  BuiltinMetric m = make_builtin_metric(metric);
  // App-style target: score(source, h', gold-as-reference); the sample's own
  // reference list is deliberately not consulted.
  Sample target;
  target.id = sample.id;
  target.source = sample.source;
  target.references = {sample.gold};
  target.gold = sample.gold;
  return [m = std::move(m), target = std::move(target)](const std::vector<std::string>& tokens) {
    return m.score(detokenize(tokens), target);
  };
}

namespace {

bool pure_punctuation(const std::string& token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](unsigned char c) {
    return std::ispunct(c);
  });
}

bool case_only_difference(const std::string& a, const std::string& b) {
  return a != b && lower(a) == lower(b);
}

struct BestEdit {
  bool found = false;
  double score = 0.0;
  bool is_delete = false;
  std::size_t pos = 0;
  std::string token;
};

}  // namespace

AttackResult greedy_attack(const Sample& sample, const AttackScorer& score,
                           const AttackConfig& cfg) {
  if (cfg.providers.empty()) throw validation_error("attack needs at least one provider");
  std::vector<std::string> gold_tokens = tokenize(sample.gold).tokens;
  if (gold_tokens.empty()) throw validation_error("attack: sample has no tokens");
  std::vector<std::string> tokens = gold_tokens;

  auto ratio_of = [&](const std::vector<std::string>& t) {
    return static_cast<double>(levenshtein(t, gold_tokens)) /
           static_cast<double>(gold_tokens.size());
  };

  AttackResult result;
  result.sample_id = sample.id;
  result.score = score(tokens);
  result.ratio = 0.0;

  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    if (result.ratio >= cfg.min_noise_ratio) break;  // also catches min_noise_ratio == 0

    BestEdit best;
    bool any_candidate = false;
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      if (tokens.size() > 1) {
        any_candidate = true;
        std::vector<std::string> trial = tokens;
        trial.erase(trial.begin() + static_cast<long>(pos));
        double s = score(trial);
        if (!best.found || s > best.score) best = {true, s, true, pos, ""};
      }
      std::vector<std::string> cands;
      for (CandidateProvider* provider : cfg.providers)
        for (const std::string& c : provider->candidates(tokens, pos))
          if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
      std::sort(cands.begin(), cands.end());
      for (const std::string& c : cands) {
        if (c == tokens[pos] || case_only_difference(c, tokens[pos]) || pure_punctuation(c))
          continue;
        any_candidate = true;
        std::vector<std::string> trial = tokens;
        trial[pos] = c;
        double s = score(trial);
        // Strict > keeps the first maximum: lowest position, delete before
        // substitution, lexicographically first candidate.
        if (!best.found || s > best.score) best = {true, s, false, pos, c};
      }
    }
    if (!any_candidate || !best.found)
      throw validation_error("attack: no applicable edit for sample " + sample.id +
                             " (no candidates and deletion would empty the text)");

    if (best.is_delete)
      tokens.erase(tokens.begin() + static_cast<long>(best.pos));
    else
      tokens[best.pos] = best.token;
    result.score = best.score;
    result.ratio = ratio_of(tokens);
    result.trajectory.push_back({iter, best.is_delete ? "del" : "sub", best.pos, best.token,
                                 best.score, result.ratio});
  }
  // Zero iterations leaves the gold bytes untouched.
  result.text = result.trajectory.empty() ? sample.gold : detokenize(tokens);
  result.reached_min_ratio = result.ratio >= cfg.min_noise_ratio;
  return result;
}

}  // namespace stresslab

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "stresslab/annotate.hpp"
#include "stresslab/attack.hpp"
#include "stresslab/error.hpp"
#include "stresslab/metrics.hpp"

using namespace stresslab;

namespace {

Sample make_sample(std::string gold, std::string id = "s1") {
  Sample s;
  s.id = std::move(id);
  s.gold = std::move(gold);
  return s;
}

// Offers only candidates the attack must filter out.
struct UselessProvider : CandidateProvider {
  std::string name() const override { return "useless"; }
  std::vector<std::string> candidates(const std::vector<std::string>& toks,
                                      std::size_t pos) override {
    std::string cased = toks[pos];
    if (!cased.empty() && std::islower(static_cast<unsigned char>(cased[0])))
      cased[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cased[0])));
    return {toks[pos], cased, "!!!", "..."};
  }
};

std::string provider_script() { return std::string(ADAPTER_DIR) + "/candidate_provider.py"; }

// Mirror of the documented enumeration order, written independently: for each
// position, try delete first, then the filtered lexicographic candidate list;
// keep the first strict maximum.
struct OracleEdit {
  bool is_delete = false;
  std::size_t pos = 0;
  std::string token;
  double score = 0.0;
};

OracleEdit best_single_edit(const std::vector<std::string>& tokens, const AttackScorer& score,
                            CandidateProvider& provider) {
  OracleEdit best;
  bool found = false;
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    if (tokens.size() > 1) {
      std::vector<std::string> trial = tokens;
      trial.erase(trial.begin() + static_cast<long>(pos));
      double s = score(trial);
      if (!found || s > best.score) {
        best = {true, pos, "", s};
        found = true;
      }
    }
    std::vector<std::string> cands = provider.candidates(tokens, pos);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (const std::string& c : cands) {
      bool case_only = c != tokens[pos] && lower(c) == lower(tokens[pos]);
      bool punct = !c.empty() && std::all_of(c.begin(), c.end(), [](unsigned char ch) {
        return std::ispunct(ch);
      });
      if (c == tokens[pos] || case_only || punct) continue;
      std::vector<std::string> trial = tokens;
      trial[pos] = c;
      double s = score(trial);
      if (!found || s > best.score) {
        best = {false, pos, c, s};
        found = true;
      }
    }
  }
  REQUIRE(found);
  return best;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("confusion table values") {
  ConfusionProvider p;
  auto at = [&](std::vector<std::string> toks, std::size_t pos) {
    return p.candidates(toks, pos);
  };
  CHECK(at({"a", "car"}, 0) == std::vector<std::string>{"an"});
  CHECK(at({"an", "egg"}, 0) == std::vector<std::string>{"a"});
  CHECK(at({"seven", "birds"}, 0) == std::vector<std::string>{"eight"});
  CHECK(at({"twelve"}, 0) == std::vector<std::string>{"thirteen"});
  CHECK(at({"thirteen"}, 0).empty());  // numbers map one step up only
  CHECK(at({"office"}, 0).empty());
  CHECK(at({"they", "ran"}, 0) == std::vector<std::string>{"he", "she", "it"});
  // title case carries over
  CHECK(at({"This", "works"}, 0) == std::vector<std::string>{"These"});
  CHECK(at({"A", "car"}, 0) == std::vector<std::string>{"An"});
}

TEST_CASE("attack scorer binds gold as the only reference") {
  Sample s = make_sample("The committee met on Monday.");
  s.references = {"completely unrelated reference text"};
  auto scorer = make_attack_scorer("overlap-f", s);
  // scoring the untouched gold yields the metric maximum even though the
  // sample's own references share nothing with it
  CHECK(scorer(tokenize(s.gold).tokens) == doctest::Approx(1.0));
  auto worse = scorer(std::vector<std::string>{"other", "words"});
  CHECK(worse < 1.0);
}

TEST_CASE("min_noise_ratio of zero returns the gold bytes untouched") {
  Sample s = make_sample("Odd   spacing  preserved.");
  ConfusionProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.0;
  cfg.providers = {&provider};
  auto scorer = make_attack_scorer("overlap-f", s);
  AttackResult result = greedy_attack(s, scorer, cfg);
  CHECK(result.text == s.gold);  // byte-identical, not re-detokenized
  CHECK(result.trajectory.empty());
  CHECK(result.reached_min_ratio);
  CHECK(result.ratio == doctest::Approx(0.0));
  CHECK(result.score == doctest::Approx(1.0));
}

TEST_CASE("constant metric falls back to the canonical tie-break") {
  Sample s = make_sample("alpha beta gamma delta epsilon");
  ConfusionProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.5;
  cfg.max_iters = 10;
  cfg.providers = {&provider};
  AttackScorer constant = [](const std::vector<std::string>&) { return 0.5; };
  AttackResult result = greedy_attack(s, constant, cfg);
  // every edit ties, so the first enumerated edit (delete at position 0) wins
  REQUIRE(result.trajectory.size() == 3);  // ratios 0.2, 0.4, 0.6
  for (const auto& step : result.trajectory) {
    CHECK(step.op == "del");
    CHECK(step.pos == 0);
  }
  CHECK(result.reached_min_ratio);
  CHECK(result.ratio == doctest::Approx(0.6));
  CHECK(result.text == "delta epsilon");
}

TEST_CASE("single-token samples substitute when the table allows") {
  Sample s = make_sample("one");
  ConfusionProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.5;
  cfg.max_iters = 4;
  cfg.providers = {&provider};
  AttackScorer constant = [](const std::vector<std::string>&) { return 0.5; };
  AttackResult result = greedy_attack(s, constant, cfg);
  REQUIRE_FALSE(result.trajectory.empty());
  CHECK(result.trajectory[0].op == "sub");
  CHECK(result.trajectory[0].token == "two");
}

TEST_CASE("identity, case-only and punctuation candidates are filtered") {
  UselessProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.4;
  cfg.providers = {&provider};
  AttackScorer constant = [](const std::vector<std::string>&) { return 0.5; };

  // with two tokens the delete op remains available
  AttackResult two = greedy_attack(make_sample("red car"), constant, cfg);
  REQUIRE_FALSE(two.trajectory.empty());
  CHECK(two.trajectory[0].op == "del");

  // with one token nothing is applicable
  CHECK_THROWS_AS(greedy_attack(make_sample("word"), constant, cfg), validation_error);
}

TEST_CASE("attack requires a provider") {
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.1;
  AttackScorer constant = [](const std::vector<std::string>&) { return 0.5; };
  CHECK_THROWS_AS(greedy_attack(make_sample("a b"), constant, cfg), validation_error);
}

TEST_CASE("max_iters bounds the trajectory and reports unreached ratios") {
  Sample s = make_sample("this one red car drove away");
  ConfusionProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.9;
  cfg.max_iters = 2;
  cfg.providers = {&provider};
  auto scorer = make_attack_scorer("overlap-f", s);
  AttackResult result = greedy_attack(s, scorer, cfg);
  CHECK(result.trajectory.size() == 2);
  CHECK_FALSE(result.reached_min_ratio);
  CHECK(result.ratio < 0.9);
  for (std::size_t i = 0; i < result.trajectory.size(); ++i)
    CHECK(result.trajectory[i].iteration == i + 1);
}

TEST_CASE("first greedy step matches an independent exhaustive search") {
  ConfusionProvider provider;
  for (const char* gold : {"a red car", "this old man walks", "seven birds flew home",
                           "the one true path", "she saw it", "an apple a day"}) {
    CAPTURE(gold);
    Sample s = make_sample(gold);
    auto scorer = make_attack_scorer("overlap-f", s);
    OracleEdit oracle = best_single_edit(tokenize(s.gold).tokens, scorer, provider);

    AttackConfig cfg;
    cfg.min_noise_ratio = 0.01;  // exactly one edit
    cfg.max_iters = 1;
    cfg.providers = {&provider};
    AttackResult result = greedy_attack(s, scorer, cfg);
    REQUIRE(result.trajectory.size() == 1);
    const AttackStep& step = result.trajectory[0];
    CHECK(step.op == (oracle.is_delete ? "del" : "sub"));
    CHECK(step.pos == oracle.pos);
    CHECK(step.token == oracle.token);
    CHECK(step.score == doctest::Approx(oracle.score));
  }
}

TEST_CASE("greedy attack monotonically raises the ratio") {
  Sample s = make_sample("this one red car drove seven miles to a town");
  ConfusionProvider provider;
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.3;
  cfg.max_iters = 16;
  cfg.providers = {&provider};
  auto scorer = make_attack_scorer("rougeL", s);
  AttackResult result = greedy_attack(s, scorer, cfg);
  CHECK(result.reached_min_ratio);
  double prev = 0.0;
  for (const auto& step : result.trajectory) {
    CHECK(step.ratio >= prev);
    prev = step.ratio;
  }
  CHECK(result.ratio >= 0.3);
}

TEST_CASE("external candidate provider speaks the line protocol") {
  std::vector<std::string> tokens{"alpha", "bravo", "charlie"};

  ExternalCandidateProvider fixed({"python3", provider_script(), "fixed"});
  auto cands = fixed.candidates(tokens, 1);
  // provider-side list is ["alpha","beta",token,"alpha"]; duplicates collapse
  CHECK(cands == std::vector<std::string>{"alpha", "beta", "bravo"});

  ExternalCandidateProvider empty({"python3", provider_script(), "empty"});
  CHECK(empty.candidates(tokens, 0).empty());

  ExternalCandidateProvider reverse({"python3", provider_script(), "reverse"});
  CHECK(reverse.candidates(tokens, 2) == std::vector<std::string>{"eilrahc"});

  ExternalCandidateProvider malformed({"python3", provider_script(), "malformed"});
  CHECK_THROWS_AS(malformed.candidates(tokens, 0), runtime_failure);
}

TEST_CASE("external provider feeds the greedy attack") {
  Sample s = make_sample("alpha bravo charlie delta");
  ExternalCandidateProvider provider({"python3", provider_script(), "fixed"});
  AttackConfig cfg;
  cfg.min_noise_ratio = 0.25;
  cfg.max_iters = 4;
  cfg.providers = {&provider};
  AttackScorer count_beta = [](const std::vector<std::string>& toks) {
    return static_cast<double>(std::count(toks.begin(), toks.end(), "beta"));
  };
  AttackResult result = greedy_attack(s, count_beta, cfg);
  REQUIRE_FALSE(result.trajectory.empty());
  CHECK(result.trajectory[0].op == "sub");
  CHECK(result.trajectory[0].token == "beta");
  CHECK(result.reached_min_ratio);
}

}  // TEST_SUITE

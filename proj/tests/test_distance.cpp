#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stresslab/corpus.hpp"
#include "stresslab/distance.hpp"
#include "stresslab/error.hpp"
#include "stresslab/noise_kind.hpp"
#include "stresslab/rng.hpp"

using namespace stresslab;

namespace {

using Toks = std::vector<std::string>;

// Independent oracle: textbook recursive definition with memoization.  The
// production code uses an iterative DP table; agreement between the two is
// the correctness evidence.
std::size_t lev_oracle(const Toks& a, const Toks& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> rec = [&](std::size_t i,
                                                                 std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::size_t best;
    if (a[i] == b[j]) {
      best = rec(i + 1, j + 1);
    } else {
      std::size_t del = rec(i + 1, j) + 1;
      std::size_t ins = rec(i, j + 1) + 1;
      std::size_t sub = rec(i + 1, j + 1) + 1;
      best = std::min({del, ins, sub});
    }
    memo[key] = best;
    return best;
  };
  return rec(0, 0);
}

Toks random_tokens(Rng& rng, std::size_t max_len) {
  static const char* alphabet[] = {"a", "b", "c", "d"};
  Toks t(rng.below(max_len + 1));
  for (auto& tok : t) tok = alphabet[rng.below(4)];
  return t;
}

Corpus one_sample(const std::string& gold) {
  Corpus c;
  c.samples.push_back({"s1", std::nullopt, {}, gold});
  return c;
}

}  // namespace

TEST_SUITE("distance") {

TEST_CASE("hand-checked edit distances") {
  CHECK(levenshtein(Toks{"a", "b", "c"}, Toks{"a", "b", "c"}) == 0);
  CHECK(levenshtein(Toks{"a", "b"}, Toks{"a", "c"}) == 1);
  CHECK(levenshtein(Toks{}, Toks{"x", "y"}) == 2);
  CHECK(levenshtein(Toks{"x", "y", "z"}, Toks{}) == 3);
  // the classic character example lifted to tokens: 3 edits
  CHECK(levenshtein(Toks{"k", "i", "t", "t", "e", "n"},
                    Toks{"s", "i", "t", "t", "i", "n", "g"}) == 3);
  // pure transposition costs 2 under ins/del/sub
  CHECK(levenshtein(Toks{"a", "b"}, Toks{"b", "a"}) == 2);
}

TEST_CASE("matches the recursive oracle on random pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    Toks a = random_tokens(rng, 8), b = random_tokens(rng, 8);
    CAPTURE(trial);
    CHECK(levenshtein(a, b) == lev_oracle(a, b));
  }
}

TEST_CASE("metric axioms on random triples") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    Toks a = random_tokens(rng, 7), b = random_tokens(rng, 7), c = random_tokens(rng, 7);
    std::size_t ab = levenshtein(a, b), ba = levenshtein(b, a);
    std::size_t ac = levenshtein(a, c), cb = levenshtein(c, b);
    CHECK(ab == ba);                       // symmetry
    CHECK(ab <= ac + cb);                  // triangle inequality
    CHECK(levenshtein(a, a) == 0);         // identity
    if (a != b) CHECK(ab > 0);             // separation
  }
}

TEST_CASE("noise_ratio divides by gold token length") {
  Corpus gold = one_sample("a b c d");
  Corpus noised = one_sample("a b");
  auto rep = noise_ratio(gold, noised, NoiseKind::truncation);
  REQUIRE(rep.per_sample.size() == 1);
  CHECK(rep.per_sample[0].levenshtein == 2);
  CHECK(rep.per_sample[0].len_gold == 4);
  CHECK(rep.per_sample[0].ratio == doctest::Approx(0.5));
  CHECK(rep.mean_ratio == doctest::Approx(0.5));
  CHECK_FALSE(rep.switching_halved);
}

TEST_CASE("switching kinds halve the ratio") {
  Corpus gold = one_sample("a b c d");
  Corpus noised = one_sample("c d a b");  // raw distance 4 on 4 tokens
  for (NoiseKind kind : {NoiseKind::sentence_switch, NoiseKind::entity_switch,
                         NoiseKind::verb_switch, NoiseKind::noun_switch, NoiseKind::local_swap,
                         NoiseKind::middle_swap}) {
    CAPTURE(to_string(kind));
    auto rep = noise_ratio(gold, noised, kind);
    CHECK(rep.switching_halved);
    CHECK(rep.per_sample[0].ratio == doctest::Approx(0.5));  // 4/4 halved
  }
  auto plain = noise_ratio(gold, noised, NoiseKind::token_drop);
  CHECK(plain.per_sample[0].ratio == doctest::Approx(1.0));
}

TEST_CASE("mean is over the noised samples") {
  Corpus gold;
  gold.samples.push_back({"s1", std::nullopt, {}, "a b c d"});
  gold.samples.push_back({"s2", std::nullopt, {}, "x y"});
  Corpus noised;
  noised.samples.push_back({"s1", std::nullopt, {}, "a b c"});  // 1/4
  noised.samples.push_back({"s2", std::nullopt, {}, "x"});      // 1/2
  auto rep = noise_ratio(gold, noised, NoiseKind::truncation);
  CHECK(rep.mean_ratio == doctest::Approx(0.375));
}

TEST_CASE("noised id missing from gold is a validation error") {
  Corpus gold = one_sample("a b");
  Corpus noised;
  noised.samples.push_back({"mystery", std::nullopt, {}, "a"});
  CHECK_THROWS_AS(noise_ratio(gold, noised, NoiseKind::truncation), validation_error);
}

}  // TEST_SUITE

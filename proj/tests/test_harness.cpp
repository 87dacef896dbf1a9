#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stresslab/error.hpp"
#include "stresslab/harness.hpp"
#include "stresslab/rng.hpp"

using namespace stresslab;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("stresslab_test_" + std::to_string(Rng(std::random_device{}()).next_u64() % 100000000));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }
};

// A small summarization-style corpus with enough structure for several kinds.
std::string demo_corpus_text() {
  return
      R"({"record":"meta","task":"summarization"})" "\n"
      R"({"id":"a1","source":"The committee met on Monday to debate the budget. They argued for hours about spending.","references":["The committee debated the budget on Monday."],"gold":"The committee met on Monday and debated the annual budget for hours."})" "\n"
      R"({"id":"a2","source":"A storm swept the coast overnight. Fishing boats stayed in the harbor until morning.","references":["A storm kept the fishing boats in the harbor."],"gold":"A heavy storm swept the coast and kept all the fishing boats in the harbor."})" "\n"
      R"({"id":"a3","source":"The museum opened a new wing for modern art. Visitors praised the bright galleries.","references":["The museum opened a modern art wing that visitors praised."],"gold":"The museum opened a bright new wing for modern art and visitors praised it."})" "\n";
}

std::string plan_header(const std::string& corpus_name) {
  return std::string(R"({"record":"plan","corpus":")") + corpus_name +
         R"(","master_seed":42,"seeds":3})" "\n";
}

AggregatedLevel level_of(double mean, std::size_t index) {
  AggregatedLevel lv;
  lv.level = 0.1 * static_cast<double>(index);
  lv.level_index = index;
  lv.mean = mean;
  return lv;
}

TestVerdict verdict_of(std::vector<double> means, double tie_tol = 1e-9) {
  AggregatedLevel gold = level_of(means.at(0), 0);
  std::vector<AggregatedLevel> rest;
  for (std::size_t i = 1; i < means.size(); ++i) rest.push_back(level_of(means[i], i));
  return rank_verdict("m", "k", gold, rest, tie_tol);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("mean_and_std uses population variance") {
  auto [m, sd] = mean_and_std({0.4, 0.6});
  CHECK(m == doctest::Approx(0.5));
  CHECK(sd == doctest::Approx(0.1));
  auto [m1, sd1] = mean_and_std({0.7});
  CHECK(m1 == doctest::Approx(0.7));
  CHECK(sd1 == doctest::Approx(0.0));
  auto [mc, sdc] = mean_and_std({0.3, 0.3, 0.3});
  CHECK(mc == doctest::Approx(0.3));
  CHECK(sdc == doctest::Approx(0.0));
}

TEST_CASE("rank_verdict passes only strictly decreasing sequences") {
  auto pass = verdict_of({0.9, 0.8, 0.7, 0.6});
  CHECK(pass.pass);
  CHECK_FALSE(pass.first_violation.has_value());

  auto bump = verdict_of({0.9, 0.85, 0.86, 0.5});
  CHECK_FALSE(bump.pass);
  REQUIRE(bump.first_violation.has_value());
  CHECK(*bump.first_violation == 2);

  auto above_gold = verdict_of({0.9, 0.95, 0.5});
  CHECK_FALSE(above_gold.pass);
  CHECK(*above_gold.first_violation == 1);

  auto tie = verdict_of({0.9, 0.9, 0.5});
  CHECK_FALSE(tie.pass);
  CHECK(*tie.first_violation == 1);

  // a drop smaller than tie_tol counts as a tie
  auto micro = verdict_of({0.9, 0.9 - 1e-12, 0.5});
  CHECK_FALSE(micro.pass);
  CHECK(*micro.first_violation == 1);

  // exactly tie_tol is still a tie; just above it passes
  auto at_tol = verdict_of({0.9, 0.9 - 1e-9, 0.8});
  CHECK_FALSE(at_tol.pass);
  auto over_tol = verdict_of({0.9, 0.9 - 2e-9, 0.8});
  CHECK(over_tol.pass);
}

TEST_CASE("rank verdicts are invariant under monotone transforms") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> means;
    std::size_t n = 3 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i) means.push_back(rng.unit());
    auto base = verdict_of(means, 1e-12);
    std::vector<double> scaled;
    for (double v : means) scaled.push_back(2.0 * v + 1.0);
    auto affine = verdict_of(scaled, 1e-12);
    CHECK(base.pass == affine.pass);
    CHECK(base.first_violation == affine.first_violation);
  }
}

TEST_CASE("parse_plan reads records and validates them") {
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"rouge2"})" "\n"
                     R"({"record":"metric","name":"overlap-f"})" "\n"
                     R"({"record":"adapter","name":"ext","command":["python3","x.py"],"timeout_s":5,"batch_size":4})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.1,0.3]})" "\n"
                     R"({"record":"test","kind":"positioned_error","levels":[1],"options":{"span_len":3,"mode":"shuffle"}})" "\n";
  TestPlan plan = parse_plan(text, "/base");
  CHECK(plan.corpus_path == "/base/corpus.jsonl");
  CHECK(plan.master_seed == 42);
  CHECK(plan.seeds == 3);
  CHECK(plan.tie_tol == doctest::Approx(1e-9));
  CHECK(plan.metrics == std::vector<std::string>{"rouge2", "overlap-f"});
  REQUIRE(plan.adapters.size() == 1);
  CHECK(plan.adapters[0].timeout_s == doctest::Approx(5.0));
  CHECK(plan.adapters[0].batch_size == 4);
  REQUIRE(plan.tests.size() == 2);
  CHECK(plan.tests[0].kind == NoiseKind::truncation);
  CHECK(plan.tests[0].levels == std::vector<double>{0.1, 0.3});
  // non-string option values are stringified
  CHECK(plan.tests[1].options.at("span_len") == "3");
  CHECK(plan.tests[1].options.at("mode") == "shuffle");

  // absolute corpus paths stay untouched
  TestPlan abs = parse_plan(plan_header("/abs/c.jsonl") +
                                R"({"record":"metric","name":"bleu"})" "\n"
                                R"({"record":"test","kind":"truncation","levels":[0.1]})" "\n",
                            "/base");
  CHECK(abs.corpus_path == "/abs/c.jsonl");
}

TEST_CASE("parse_plan error cases") {
  std::string metric = R"({"record":"metric","name":"bleu"})" "\n";
  std::string test = R"({"record":"test","kind":"truncation","levels":[0.1]})" "\n";
  CHECK_THROWS_AS(parse_plan(metric + test, "."), validation_error);  // no plan record
  CHECK_THROWS_AS(parse_plan(plan_header("c") + plan_header("c") + metric + test, "."),
                  validation_error);  // duplicate plan record
  CHECK_THROWS_AS(parse_plan(plan_header("c") + test, "."), validation_error);  // no metrics
  CHECK_THROWS_AS(parse_plan(plan_header("c") + metric, "."), validation_error);  // no tests
  CHECK_THROWS_AS(parse_plan(plan_header("c") +
                                 R"({"record":"metric","name":"nope"})" "\n" + test,
                             "."),
                  validation_error);  // unknown metric
  CHECK_THROWS_AS(parse_plan(plan_header("c") + metric + metric + test, "."),
                  validation_error);  // duplicate metric
  CHECK_THROWS_AS(parse_plan(plan_header("c") + metric +
                                 R"({"record":"test","kind":"mystery","levels":[1]})" "\n",
                             "."),
                  validation_error);  // unknown noise kind
  CHECK_THROWS_AS(parse_plan(plan_header("c") + metric +
                                 R"({"record":"test","kind":"truncation","levels":[]})" "\n",
                             "."),
                  validation_error);  // empty levels
  CHECK_THROWS_AS(parse_plan(plan_header("c") + metric + test +
                                 R"({"record":"wat"})" "\n",
                             "."),
                  validation_error);  // unknown record
  CHECK_THROWS_AS(parse_plan("not json\n" + plan_header("c") + metric + test, "."),
                  validation_error);
}

TEST_CASE("plan_hash fingerprints the raw bytes") {
  std::string text = plan_header("c.jsonl") +
                     R"({"record":"metric","name":"bleu"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.1]})" "\n";
  TestPlan a = parse_plan(text, ".");
  TestPlan b = parse_plan(text, "/elsewhere");
  CHECK(plan_hash(a) == plan_hash(b));  // same bytes, same hash
  CHECK(plan_hash(a) == fnv1a(text));
  TestPlan c = parse_plan(text + "\n", ".");
  CHECK(plan_hash(a) != plan_hash(c));
}

TEST_CASE("run_plan produces one record per metric x level x seed plus gold") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"overlap-p"})" "\n"
                     R"({"record":"metric","name":"rougeL"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.2,0.4]})" "\n"
                     R"({"record":"test","kind":"repeated_token","levels":[0.5]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});

  // per metric: 1 gold + (2+1 levels) x 3 seeds = 10 records
  CHECK(result.records.size() == 20);
  std::size_t gold_records = 0;
  for (const auto& rec : result.records) {
    if (rec.kind == "gold") {
      ++gold_records;
      CHECK(rec.level_index == 0);
    } else {
      CHECK(rec.level_index >= 1);
    }
    CHECK(rec.per_sample.size() == 3);  // every corpus sample scored
  }
  CHECK(gold_records == 2);
}

TEST_CASE("run_plan verdicts cover every metric x test pair") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"overlap-r"})" "\n"
                     R"({"record":"metric","name":"rouge2"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.2,0.4]})" "\n"
                     R"({"record":"test","kind":"injection","levels":[1]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});
  REQUIRE(result.verdicts.size() == 4);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& v : result.verdicts) {
    seen.insert({v.metric, v.kind});
    REQUIRE_FALSE(v.levels.empty());
    CHECK(v.levels[0].level_index == 0);  // gold leads the sequence
    // levels after gold preserve plan order
    for (std::size_t i = 1; i < v.levels.size(); ++i)
      CHECK(v.levels[i].level_index == i);
  }
  CHECK(seen.count({"overlap-r", "truncation"}) == 1);
  CHECK(seen.count({"rouge2", "injection"}) == 1);

  // truncating a reference-overlapping gold strictly lowers recall
  for (const auto& v : result.verdicts)
    if (v.metric == "overlap-r" && v.kind == "truncation") CHECK(v.pass);
}

TEST_CASE("jobs=1 and jobs=4 produce identical results") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"overlap-f"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.2,0.4,0.6]})" "\n"
                     R"({"record":"test","kind":"token_drop","levels":[0.3,0.6]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunOptions serial, parallel;
  serial.jobs = 1;
  parallel.jobs = 4;
  RunResult a = run_plan(plan, serial);
  RunResult b = run_plan(plan, parallel);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].metric == b.records[i].metric);
    CHECK(a.records[i].kind == b.records[i].kind);
    CHECK(a.records[i].mean == b.records[i].mean);
    CHECK(a.records[i].per_sample == b.records[i].per_sample);
  }
  REQUIRE(a.noised.size() == b.noised.size());
  for (std::size_t i = 0; i < a.noised.size(); ++i) {
    CHECK(a.noised[i].seed == b.noised[i].seed);
    CHECK(a.noised[i].noise_ratio == b.noised[i].noise_ratio);
    REQUIRE(a.noised[i].hyps.size() == b.noised[i].hyps.size());
    for (std::size_t j = 0; j < a.noised[i].hyps.size(); ++j)
      CHECK(a.noised[i].hyps[j].text == b.noised[i].hyps[j].text);
  }
}

TEST_CASE("levels where every sample skips are dropped with a warning") {
  TempDir tmp;
  // no articles anywhere: article_removal can touch nothing
  tmp.file("corpus.jsonl",
           R"({"id":"b1","gold":"Foxes run fast ."})" "\n"
           R"({"id":"b2","gold":"Dogs bark loudly ."})" "\n");
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"rep4"})" "\n"
                     R"({"record":"test","kind":"article_removal","levels":[0.5]})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.5]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});
  CHECK_FALSE(result.warnings.empty());
  // the article_removal verdict disappears entirely; truncation survives
  REQUIRE(result.verdicts.size() == 1);
  CHECK(result.verdicts[0].kind == "truncation");
}

TEST_CASE("equal measured ratios across levels are rejected") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  // same level twice gives an equal (not increasing) measured-ratio grid
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"rouge2"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.3,0.3]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  CHECK_THROWS_AS(run_plan(plan, {}), validation_error);
}

TEST_CASE("adapters join the run via the plan") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string adapter_cmd = std::string(ADAPTER_DIR) + "/test_adapter.py";
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"rouge2"})" "\n" +
                     R"({"record":"adapter","name":"echo","command":["python3",")" +
                     adapter_cmd + R"(","echo"]})" "\n" +
                     R"({"record":"test","kind":"truncation","levels":[0.3]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});
  // 2 metrics x (1 gold + 1 level x 3 seeds) = 8 records
  CHECK(result.records.size() == 8);
  bool saw_adapter_records = false;
  for (const auto& rec : result.records)
    if (rec.metric == "echo") {
      saw_adapter_records = true;
      CHECK(rec.per_sample.size() == 3);
    }
  CHECK(saw_adapter_records);
  REQUIRE(result.verdicts.size() == 2);
  std::set<std::string> metrics;
  for (const auto& v : result.verdicts) metrics.insert(v.metric);
  CHECK(metrics == std::set<std::string>{"rouge2", "echo"});
}

TEST_CASE("set-scope adapters score each corpus once per set") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string adapter_cmd = std::string(ADAPTER_DIR) + "/test_adapter.py";
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"adapter","name":"setwise","command":["python3",")" +
                     adapter_cmd + R"(","set"]})" "\n" +
                     R"({"record":"test","kind":"truncation","levels":[0.3]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});
  for (const auto& rec : result.records) {
    REQUIRE(rec.per_sample.size() == 1);
    CHECK(rec.per_sample[0].first == "__set__");
  }
}

TEST_CASE("emit_report writes byte-stable artifacts") {
  TempDir tmp;
  tmp.file("corpus.jsonl", demo_corpus_text());
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"overlap-f"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.2,0.4]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  RunResult result = run_plan(plan, {});

  fs::path out1 = tmp.path / "out1";
  fs::path out2 = tmp.path / "out2";
  emit_report(out1.string(), plan, result);
  emit_report(out2.string(), plan, result);

  for (const char* name : {"scores.jsonl", "summary.jsonl", "verdicts.jsonl", "plot_data.tsv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(out1 / name));
    std::ifstream f1(out1 / name, std::ios::binary), f2(out2 / name, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    CHECK_FALSE(s1.str().empty());
  }

  // jsonl artifacts open with a meta record carrying the plan hash
  std::ifstream scores(out1 / "scores.jsonl");
  std::string first_line;
  std::getline(scores, first_line);
  json meta = json::parse(first_line);
  CHECK(meta["record"] == "meta");
  CHECK(meta["tool"] == "stresslab");
  CHECK(meta["master_seed"] == 42);
  CHECK(meta["plan_hash"].is_string());
  CHECK(meta["plan_hash"].get<std::string>().size() == 16);

  // verdict lines parse and carry gold-first level sequences
  std::ifstream verdicts(out1 / "verdicts.jsonl");
  std::string line;
  std::getline(verdicts, line);  // meta
  std::size_t verdict_lines = 0;
  while (std::getline(verdicts, line)) {
    json v = json::parse(line);
    CHECK(v["record"] == "verdict");
    CHECK((v["verdict"] == "PASS" || v["verdict"] == "FAIL"));
    REQUIRE(v["levels"].is_array());
    CHECK(v["levels"][0]["level_index"] == 0);
    ++verdict_lines;
  }
  CHECK(verdict_lines == 1);

  // noised sets land one file per (kind, level, seed)
  std::size_t noised_files = 0;
  for (const auto& entry : fs::directory_iterator(out1 / "noised")) {
    (void)entry;
    ++noised_files;
  }
  CHECK(noised_files == 6);  // 2 levels x 3 seeds
}

TEST_CASE("run_plan rejects an empty corpus") {
  TempDir tmp;
  tmp.file("corpus.jsonl", "\n");
  std::string text = plan_header("corpus.jsonl") +
                     R"({"record":"metric","name":"rouge2"})" "\n"
                     R"({"record":"test","kind":"truncation","levels":[0.3]})" "\n";
  TestPlan plan = parse_plan(text, tmp.path.string());
  CHECK_THROWS_AS(run_plan(plan, {}), validation_error);
}

}  // TEST_SUITE

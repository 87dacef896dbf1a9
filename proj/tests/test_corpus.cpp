#include <doctest.h>

#include <sstream>
#include <string>

#include "stresslab/corpus.hpp"
#include "stresslab/error.hpp"

using namespace stresslab;

namespace {
// Mirrors load_corpus: parse then validate.
Corpus parse(const std::string& text, std::optional<Task> task = {}) {
  std::istringstream in(text);
  Corpus c = parse_corpus(in, task, "<test>");
  validate_corpus(c);
  return c;
}
}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("parses samples with meta task line") {
  Corpus c = parse(
      R"({"record":"meta","task":"summarization"})" "\n"
      R"({"id":"s1","source":"Src one.","references":["Ref one."],"gold":"Gold one."})" "\n"
      "\n"  // blank lines are skipped
      R"({"id":"s2","source":null,"references":["Ref two."],"gold":"Gold two."})" "\n");
  CHECK(c.task == Task::summarization);
  REQUIRE(c.samples.size() == 2);
  CHECK(c.samples[0].id == "s1");
  CHECK(c.samples[0].source.has_value());
  CHECK(*c.samples[0].source == "Src one.");
  CHECK_FALSE(c.samples[1].source.has_value());
  CHECK(c.samples[1].references == std::vector<std::string>{"Ref two."});
  CHECK(c.samples[1].gold == "Gold two.");
}

TEST_CASE("task round-trip and unknown task") {
  CHECK(task_from_string("open_ended") == Task::open_ended);
  CHECK(task_from_string("translation") == Task::translation);
  CHECK(task_from_string("summarization") == Task::summarization);
  CHECK(to_string(Task::translation) == "translation");
  CHECK_THROWS_AS(task_from_string("poetry"), validation_error);
}

TEST_CASE("validation failures") {
  SUBCASE("duplicate id") {
    CHECK_THROWS_AS(parse(R"({"id":"s1","gold":"A."})" "\n" R"({"id":"s1","gold":"B."})" "\n"),
                    validation_error);
  }
  SUBCASE("empty gold") {
    CHECK_THROWS_AS(parse(R"({"id":"s1","gold":""})" "\n"), validation_error);
  }
  SUBCASE("missing id") {
    CHECK_THROWS_AS(parse(R"({"gold":"A."})" "\n"), validation_error);
  }
  SUBCASE("unknown record type") {
    CHECK_THROWS_AS(parse(R"({"record":"mystery"})" "\n"), validation_error);
  }
  SUBCASE("malformed json") {
    CHECK_THROWS_AS(parse("{nope\n"), validation_error);
  }
  SUBCASE("summarization requires references") {
    CHECK_THROWS_AS(parse(R"({"record":"meta","task":"summarization"})" "\n"
                          R"({"id":"s1","source":"S.","references":[],"gold":"G."})" "\n"),
                    validation_error);
  }
  SUBCASE("translation requires references") {
    CHECK_THROWS_AS(parse(R"({"id":"s1","gold":"G."})" "\n", Task::translation),
                    validation_error);
  }
  SUBCASE("caller task conflicts with meta task") {
    CHECK_THROWS_AS(parse(R"({"record":"meta","task":"summarization"})" "\n"
                          R"({"id":"s1","references":["R."],"gold":"G."})" "\n",
                          Task::translation),
                    validation_error);
  }
}

TEST_CASE("open_ended needs no references or source") {
  Corpus c = parse(R"({"id":"s1","gold":"Just a line."})" "\n");
  CHECK(c.task == Task::open_ended);
  CHECK(c.samples[0].references.empty());
}

TEST_CASE("write/parse round-trip preserves the corpus") {
  Corpus c;
  c.task = Task::summarization;
  c.metadata["name"] = "demo";
  c.samples.push_back({"s1", std::string("Src."), {"Ref a.", "Ref b."}, "Gold."});
  c.samples.push_back({"s2", std::nullopt, {"Only ref."}, "Other gold."});

  std::ostringstream out;
  write_corpus(c, out);
  Corpus back = parse(out.str());
  CHECK(back == c);
}

TEST_CASE("find locates samples by id") {
  Corpus c = parse(R"({"id":"s1","gold":"A."})" "\n" R"({"id":"s2","gold":"B."})" "\n");
  REQUIRE(c.find("s2") != nullptr);
  CHECK(c.find("s2")->gold == "B.");
  CHECK(c.find("zzz") == nullptr);
}

TEST_CASE("noised output reloads as a corpus") {
  // Harness artifacts alias their text field into the gold slot on reload.
  Corpus c = parse(
      R"({"record":"noise_set","kind":"truncation","level":0.3})" "\n"
      R"({"record":"noised","id":"s1","text":"Cut text","gold":"Original text.","skipped":false,"edits":[]})"
      "\n");
  REQUIRE(c.samples.size() == 1);
  CHECK(c.samples[0].gold == "Cut text");
}

TEST_CASE("clean_wikitext joins escape tokens and fixes spacing") {
  CHECK(clean_wikitext("foo @-@ bar .") == "foo-bar.");
  CHECK(clean_wikitext("a 3 @.@ 5 % rise .") == "a 3.5% rise.");
  CHECK(clean_wikitext("it 's good .") == "it's good.");
  CHECK(clean_wikitext(" Homarus gammarus , known as the European lobster , is a species "
                       "of clawed lobster .") ==
        "Homarus gammarus, known as the European lobster, is a species of clawed lobster.");
  CHECK(clean_wikitext("He said ( quietly ) \" yes \" .") == "He said (quietly) \"yes\".");
}

TEST_CASE("clean_wikitext truncates to whole sentences within the budget") {
  std::string raw = "One two three . Four five six . Seven eight nine .";
  CHECK(clean_wikitext(raw, 256) == "One two three. Four five six. Seven eight nine.");
  CHECK(clean_wikitext(raw, 8) == "One two three. Four five six.");
  CHECK(clean_wikitext(raw, 7) == "One two three.");
  CHECK_THROWS_AS(clean_wikitext(raw, 3), validation_error);
  CHECK_THROWS_AS(clean_wikitext("   "), validation_error);
}

TEST_CASE("clean_wikitext is idempotent") {
  for (const char* raw : {"foo @-@ bar .", "a 3 @.@ 5 % rise .", "it 's good .",
                          "One two three . Four five six ."}) {
    std::string once = clean_wikitext(raw);
    CHECK(clean_wikitext(once) == once);
  }
}

}  // TEST_SUITE

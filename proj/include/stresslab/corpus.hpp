#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stresslab {

enum class Task { open_ended, translation, summarization };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);  // throws validation_error

// One evaluation unit.  `gold` is the human-written hypothesis every noise
// operates on; `source` may be absent for open-ended generation.
struct Sample {
  std::string id;
  std::optional<std::string> source;
  std::vector<std::string> references;
  std::string gold;
  bool operator==(const Sample&) const = default;
};

struct Corpus {
  Task task = Task::open_ended;
  std::vector<Sample> samples;
  std::map<std::string, std::string> metadata;

  const Sample* find(std::string_view id) const;
  bool operator==(const Corpus&) const = default;
};

// Line-record IO.  Each line is one JSON object with fields id, source
// (string or null), references (string array) and gold; an optional leading
// {"record":"meta", "task":...} line carries the task profile.  Unknown
// fields are ignored so noised corpora reload as plain corpora.
Corpus load_corpus(const std::filesystem::path& path, std::optional<Task> task = {});
Corpus parse_corpus(std::istream& in, std::optional<Task> task, std::string_view origin);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

// Checks ids unique and non-empty, gold non-empty, and references ≥ 1 for
// translation/summarization profiles.  Throws validation_error.
void validate_corpus(const Corpus& corpus);

// WikiText-style markup cleanup: joins the "@.@" / "@-@" escape tokens,
// normalizes spacing around punctuation, parentheses, quotes, "'s" and "%",
// then truncates to the last full sentence within max_len tokens.
std::string clean_wikitext(std::string_view raw, std::size_t max_len = 256);

}  // namespace stresslab

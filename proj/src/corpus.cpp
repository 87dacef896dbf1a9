#include "stresslab/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "stresslab/annotate.hpp"
#include "stresslab/error.hpp"

namespace stresslab {

namespace {
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::open_ended: return "open_ended";
    case Task::translation: return "translation";
    case Task::summarization: return "summarization";
  }
  return "open_ended";
}

Task task_from_string(std::string_view name) {
  if (name == "open_ended") return Task::open_ended;
  if (name == "translation") return Task::translation;
  if (name == "summarization") return Task::summarization;
  throw validation_error("unknown task: " + std::string(name));
}

const Sample* Corpus::find(std::string_view id) const {
  for (const Sample& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

Corpus parse_corpus(std::istream& in, std::optional<Task> task, std::string_view origin) {
  Corpus corpus;
  std::optional<Task> header_task;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = std::string(origin) + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error(where + ": bad json: " + e.what());
    }
    bool noised_record = false;
    if (rec.contains("record")) {
      std::string type = rec["record"].get<std::string>();
      if (type == "meta") {
        if (rec.contains("task")) header_task = task_from_string(rec["task"].get<std::string>());
        if (rec.contains("metadata"))
          for (const auto& [k, v] : rec["metadata"].items())
            corpus.metadata[k] = v.get<std::string>();
        continue;
      }
      if (type == "noise_set") continue;  // per-set header in harness output
      if (type != "noised")
        throw validation_error(where + ": unknown record type '" + type + "'");
      noised_record = true;  // perturb/harness output: "text" plays the gold role
    }
    Sample s;
    if (!rec.contains("id") || !rec["id"].is_string())
      throw validation_error(where + ": sample record needs a string id");
    s.id = rec["id"].get<std::string>();
    if (rec.contains("source") && !rec["source"].is_null())
      s.source = rec["source"].get<std::string>();
    if (rec.contains("references"))
      for (const auto& r : rec["references"]) s.references.push_back(r.get<std::string>());
    const char* text_field = noised_record ? "text" : "gold";
    if (!rec.contains(text_field) || !rec[text_field].is_string())
      throw validation_error(where + ": sample record needs a string " +
                             std::string(text_field) + " field");
    s.gold = rec[text_field].get<std::string>();
    corpus.samples.push_back(std::move(s));
  }
  if (task && header_task && *task != *header_task)
    throw validation_error(std::string(origin) + ": task '" + std::string(to_string(*task)) +
                           "' conflicts with file header '" +
                           std::string(to_string(*header_task)) + "'");
  corpus.task = header_task ? *header_task : task.value_or(Task::open_ended);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, std::optional<Task> task) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open corpus: " + path.string());
  Corpus corpus = parse_corpus(in, task, path.string());
  validate_corpus(corpus);
  return corpus;
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  ordered_json meta;
  meta["record"] = "meta";
  meta["task"] = to_string(corpus.task);
  if (!corpus.metadata.empty()) meta["metadata"] = corpus.metadata;
  out << meta.dump() << "\n";
  for (const Sample& s : corpus.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    if (s.source)
      rec["source"] = *s.source;
    else
      rec["source"] = nullptr;
    rec["references"] = s.references;
    rec["gold"] = s.gold;
    out << rec.dump() << "\n";
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw runtime_failure("cannot write corpus: " + path.string());
  write_corpus(corpus, out);
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  for (const Sample& s : corpus.samples) {
    if (s.id.empty()) throw validation_error("sample with empty id");
    if (!seen.insert(s.id).second) throw validation_error("duplicate sample id: " + s.id);
    if (s.gold.empty()) throw validation_error("sample " + s.id + ": empty gold hypothesis");
    if ((corpus.task == Task::translation || corpus.task == Task::summarization) &&
        s.references.empty())
      throw validation_error("sample " + s.id + ": task profile '" +
                             std::string(to_string(corpus.task)) +
                             "' requires at least one reference");
  }
}

namespace {

// "foo @-@ bar" → "foo-bar", "3 @.@ 5" → "3.5".
std::string strip_at_escapes(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    bool dot = raw.compare(i, 3, "@.@") == 0;
    bool dash = raw.compare(i, 3, "@-@") == 0;
    if (dot || dash) {
      while (!out.empty() && (out.back() == ' ' || out.back() == '\t' || out.back() == '\n' ||
                              out.back() == '\r'))
        out.pop_back();
      out.push_back(dot ? '.' : '-');
      i += 3;
      while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      continue;
    }
    out.push_back(raw[i]);
    ++i;
  }
  return out;
}

// Spacing fixes the detokenizer cannot express because 's and % are not
// standalone tokens.
std::string fix_clitics(std::string s) {
  for (std::string_view pat : {" 's", " %"}) {
    std::size_t pos = 0;
    while ((pos = s.find(pat, pos)) != std::string::npos) s.erase(pos, 1);
  }
  return s;
}

}  // namespace

std::string clean_wikitext(std::string_view raw, std::size_t max_len) {
  AnnotatedText probe = tokenize(raw);
  if (probe.tokens.empty()) throw validation_error("clean_wikitext: empty text");

  std::string joined = strip_at_escapes(raw);
  AnnotatedText at = tokenize(joined);
  std::string full = fix_clitics(detokenize(at.tokens));

  AnnotatedText fat = tokenize(full);
  std::size_t kept_sentences = 0;
  std::size_t token_budget = 0;
  for (const Span& sent : fat.sentences) {
    std::size_t count = sent.end - sent.begin;
    if (token_budget + count > max_len) break;
    token_budget += count;
    ++kept_sentences;
  }
  if (kept_sentences == 0)
    throw validation_error("clean_wikitext: no sentence boundary within " +
                           std::to_string(max_len) + " tokens");
  if (kept_sentences == fat.sentences.size()) return full;
  std::size_t end = fat.sentences[kept_sentences - 1].end;
  return detokenize(std::span<const std::string>(fat.tokens.data(), end));
}

}  // namespace stresslab

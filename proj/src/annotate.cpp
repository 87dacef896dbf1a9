#include "stresslab/annotate.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "stresslab/error.hpp"

namespace stresslab {

namespace {

using json = nlohmann::json;

bool is_split_char(char c) {
  switch (c) {
    case '.': case ',': case '?': case '!': case ':': case ';':
    case '(': case ')': case '"':
      return true;
    default:
      return false;
  }
}

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Periods after these words do not end a sentence.
const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {
      "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "gen", "col",
      "sgt", "lt", "capt", "sen", "rep", "gov", "rev", "hon", "fig", "vol",
      "no", "op", "inc", "ltd", "co", "corp", "mt", "ft", "vs", "etc",
      "approx", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
      "sept", "oct", "nov", "dec"};
  return set;
}

const std::unordered_set<std::string>& article_words() {
  static const std::unordered_set<std::string> set = {"the", "a", "an"};
  return set;
}

const std::unordered_set<std::string>& preposition_words() {
  static const std::unordered_set<std::string> set = {
      "about", "above", "across", "after", "against", "along", "among",
      "around", "at", "before", "behind", "below", "beneath", "beside",
      "between", "beyond", "by", "despite", "down", "during", "except",
      "for", "from", "in", "inside", "into", "like", "near", "of", "off",
      "on", "onto", "out", "outside", "over", "past", "since", "through",
      "throughout", "till", "to", "toward", "towards", "under", "underneath",
      "until", "up", "upon", "with", "within", "without"};
  return set;
}

const std::unordered_set<std::string>& stopword_words() {
  static const std::unordered_set<std::string> set = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
      "your", "yours", "yourself", "he", "him", "his", "himself", "she",
      "her", "hers", "herself", "it", "its", "itself", "they", "them",
      "their", "theirs", "themselves", "what", "which", "who", "whom",
      "this", "that", "these", "those", "am", "is", "are", "was", "were",
      "be", "been", "being", "have", "has", "had", "having", "do", "does",
      "did", "doing", "and", "but", "if", "or", "because", "as", "while",
      "so", "than", "too", "very", "can", "will", "just", "should", "now",
      "then", "once", "here", "there", "when", "where", "why", "how", "all",
      "any", "both", "each", "few", "more", "most", "other", "some", "such",
      "not", "only", "own", "same", "also"};
  return set;
}

// The word right before position `pos` (which holds a '.'), for the
// abbreviation check.
std::string word_before(std::string_view text, std::size_t pos) {
  std::size_t end = pos;
  std::size_t begin = end;
  while (begin > 0 && std::isalpha(static_cast<unsigned char>(text[begin - 1]))) --begin;
  return lower(text.substr(begin, end - begin));
}

// True when the terminator at `pos` ends a sentence: followed by whitespace
// and a capital letter, or by nothing but whitespace.
bool is_sentence_end(std::string_view text, std::size_t pos) {
  char c = text[pos];
  if (c == '.' && abbreviations().count(word_before(text, pos)) > 0) return false;
  std::size_t next = pos + 1;
  if (next >= text.size()) return true;
  if (!is_space(text[next])) return false;
  while (next < text.size() && is_space(text[next])) ++next;
  if (next >= text.size()) return true;
  return is_upper(text[next]);
}

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::article: return "ARTICLE";
    case PosTag::preposition: return "PREPOSITION";
    case PosTag::stopword: return "STOPWORD";
    case PosTag::verb: return "VERB";
    case PosTag::noun: return "NOUN";
    case PosTag::punct: return "PUNCT";
    case PosTag::other: return "OTHER";
  }
  return "OTHER";
}

PosTag pos_from_string(std::string_view name) {
  static const std::array<PosTag, 7> tags = {
      PosTag::article, PosTag::preposition, PosTag::stopword, PosTag::verb,
      PosTag::noun,    PosTag::punct,       PosTag::other};
  for (PosTag t : tags)
    if (to_string(t) == name) return t;
  throw validation_error("unknown pos tag: " + std::string(name));
}

bool is_punct_token(std::string_view token) {
  return token.size() == 1 && is_split_char(token[0]);
}

bool is_stopword(std::string_view token) {
  std::string w = lower(token);
  return stopword_words().count(w) > 0 || article_words().count(w) > 0 ||
         preposition_words().count(w) > 0;
}

AnnotatedText tokenize(std::string_view text) {
  AnnotatedText at;
  std::size_t sentence_start = 0;  // token index where the current sentence began
  std::string current;

  auto flush_token = [&] {
    if (!current.empty()) {
      at.tokens.push_back(current);
      current.clear();
    }
  };
  auto flush_sentence = [&] {
    if (at.tokens.size() > sentence_start) {
      at.sentences.push_back({sentence_start, at.tokens.size()});
      sentence_start = at.tokens.size();
    }
  };

  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (is_space(c)) {
      flush_token();
      continue;
    }
    if (is_split_char(c)) {
      // Keep decimal points and digit-group commas inside number tokens
      // ("3.5", "1,000"); splitting them would corrupt the text on rejoin.
      bool numeric_interior = (c == '.' || c == ',') && !current.empty() &&
                              is_digit(current.back()) && i + 1 < text.size() &&
                              is_digit(text[i + 1]);
      if (!numeric_interior) {
        flush_token();
        at.tokens.push_back(std::string(1, c));
        if ((c == '.' || c == '?' || c == '!') && is_sentence_end(text, i)) flush_sentence();
        continue;
      }
    }
    current.push_back(c);
  }
  flush_token();
  flush_sentence();
  return at;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool quote_open = false;
  bool suppress_next_space = false;  // after '(' or an opening quote
  for (const std::string& tok : tokens) {
    bool no_space_before =
        tok.size() == 1 && (tok == "." || tok == "," || tok == "?" || tok == "!" ||
                            tok == ":" || tok == ";" || tok == ")");
    bool is_quote = tok == "\"";
    if (is_quote && quote_open) no_space_before = true;  // closing quote hugs left

    if (!out.empty() && !suppress_next_space && !no_space_before) out.push_back(' ');
    out += tok;

    suppress_next_space = (tok == "(") || (is_quote && !quote_open);
    if (is_quote) quote_open = !quote_open;
  }
  return out;
}

AnnotatedText annotate_rules(AnnotatedText at) {
  at.pos.resize(at.tokens.size());
  for (std::size_t i = 0; i < at.tokens.size(); ++i) {
    const std::string& tok = at.tokens[i];
    std::string w = lower(tok);
    if (is_punct_token(tok))
      at.pos[i] = PosTag::punct;
    else if (article_words().count(w) > 0)
      at.pos[i] = PosTag::article;
    else if (preposition_words().count(w) > 0)
      at.pos[i] = PosTag::preposition;
    else if (stopword_words().count(w) > 0)
      at.pos[i] = PosTag::stopword;
    else
      at.pos[i] = PosTag::other;
  }
  return at;
}

namespace {

ExternalAnnotation parse_annotation_record(const json& rec, const std::string& where) {
  ExternalAnnotation ann;
  if (!rec.contains("tokens") || !rec["tokens"].is_array())
    throw validation_error(where + ": annotation record needs a tokens array");
  for (const auto& t : rec["tokens"]) ann.tokens.push_back(t.get<std::string>());
  if (rec.contains("pos")) {
    for (const auto& p : rec["pos"]) ann.pos.push_back(pos_from_string(p.get<std::string>()));
    if (ann.pos.size() != ann.tokens.size())
      throw validation_error(where + ": pos length " + std::to_string(ann.pos.size()) +
                             " != token count " + std::to_string(ann.tokens.size()));
  }
  if (rec.contains("entities")) {
    for (const auto& e : rec["entities"]) {
      if (!e.is_array() || e.size() < 2)
        throw validation_error(where + ": entity must be [start, end] or [start, end, class]");
      Span span{e[0].get<std::size_t>(), e[1].get<std::size_t>()};
      ann.entities.push_back(span);
      ann.entity_classes.push_back(e.size() > 2 ? e[2].get<std::string>() : "");
    }
  }
  return ann;
}

}  // namespace

AnnotationFile parse_annotations(std::istream& in, std::string_view origin) {
  AnnotationFile file;
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
    if (rec.contains("record") && rec["record"] != "annotation") continue;  // skip meta lines
    if (!rec.contains("id")) throw validation_error(where + ": annotation record needs an id");
    std::string id = rec["id"].get<std::string>();
    if (file.count(id) > 0) throw validation_error(where + ": duplicate annotation id " + id);
    file[id] = parse_annotation_record(rec, where);
  }
  return file;
}

AnnotationFile load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open annotation file: " + path.string());
  return parse_annotations(in, path.string());
}

AnnotatedText merge_annotations(AnnotatedText at, const ExternalAnnotation& ann,
                                const std::string& sample_id) {
  if (ann.tokens.size() != at.tokens.size())
    throw validation_error("sample " + sample_id + ": annotation token count " +
                           std::to_string(ann.tokens.size()) + " != tokenizer count " +
                           std::to_string(at.tokens.size()));
  for (std::size_t i = 0; i < ann.tokens.size(); ++i) {
    if (ann.tokens[i] != at.tokens[i])
      throw validation_error("sample " + sample_id + ": annotation token " + std::to_string(i) +
                             " is '" + ann.tokens[i] + "' but tokenizer produced '" +
                             at.tokens[i] + "'");
  }
  if (at.pos.empty()) at = annotate_rules(std::move(at));
  if (!ann.pos.empty()) at.pos = ann.pos;  // file tags win

  if (!ann.entities.empty()) {
    std::vector<std::size_t> order(ann.entities.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ann.entities[a].begin < ann.entities[b].begin;
    });
    at.entities.clear();
    at.entity_classes.clear();
    for (std::size_t idx : order) {
      Span e = ann.entities[idx];
      if (e.begin >= e.end || e.end > at.tokens.size())
        throw validation_error("sample " + sample_id + ": entity span [" +
                               std::to_string(e.begin) + "," + std::to_string(e.end) +
                               ") out of range");
      if (!at.entities.empty() && e.begin < at.entities.back().end)
        throw validation_error("sample " + sample_id + ": overlapping entity spans");
      bool inside_one_sentence = std::any_of(
          at.sentences.begin(), at.sentences.end(),
          [&](const Span& s) { return e.begin >= s.begin && e.end <= s.end; });
      if (!inside_one_sentence)
        throw validation_error("sample " + sample_id + ": entity span [" +
                               std::to_string(e.begin) + "," + std::to_string(e.end) +
                               ") crosses a sentence boundary");
      at.entities.push_back(e);
      at.entity_classes.push_back(ann.entity_classes[idx]);
    }
  }
  at.merged = true;
  return at;
}

}  // namespace stresslab

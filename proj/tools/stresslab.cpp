#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stresslab/attack.hpp"
#include "stresslab/distance.hpp"
#include "stresslab/error.hpp"
#include "stresslab/harness.hpp"
#include "stresslab/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace stresslab;

namespace {

// "k=v,k2=v2" -> options map
std::map<std::string, std::string> parse_options(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw validation_error("bad --options entry (want key=value): " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

// Shell-style split for --provider external:"cmd arg arg".
std::vector<std::string> split_command(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string part;
  while (ss >> part) out.push_back(part);
  if (out.empty()) throw validation_error("empty provider command");
  return out;
}

std::unique_ptr<std::ofstream> open_output(const std::string& path) {
  auto out = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*out) throw runtime_failure("cannot write " + path);
  return out;
}

std::ostream& pick_stream(std::unique_ptr<std::ofstream>& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file = open_output(path);
  return *file;
}

int cmd_corpus_validate(const std::string& path, const std::string& task) {
  std::optional<Task> t;
  if (!task.empty()) t = task_from_string(task);
  Corpus corpus = load_corpus(path, t);
  std::cout << "ok: " << corpus.samples.size() << " samples, task "
            << to_string(corpus.task) << "\n";
  return 0;
}

int cmd_clean_wikitext(const std::string& in_path, const std::string& out_path,
                       std::size_t max_len, const std::string& task) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + in_path);
  Corpus corpus;
  corpus.task = task.empty() ? Task::open_ended : task_from_string(task);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s;
    s.id = "wt" + std::to_string(lineno);
    s.gold = clean_wikitext(line, max_len);
    corpus.samples.push_back(std::move(s));
  }
  validate_corpus(corpus);
  save_corpus(corpus, out_path);
  std::cout << "wrote " << corpus.samples.size() << " cleaned samples to " << out_path << "\n";
  return 0;
}

int cmd_annotate(const std::string& corpus_path, const std::string& annotations,
                 const std::string& out_path) {
  Corpus corpus = load_corpus(corpus_path);
  AnnotationFile file;
  if (!annotations.empty()) file = load_annotations(annotations);
  std::unique_ptr<std::ofstream> out_file;
  std::ostream& out = pick_stream(out_file, out_path);
  for (const Sample& s : corpus.samples) {
    AnnotatedText at = annotate_rules(tokenize(s.gold));
    auto it = file.find(s.id);
    if (it != file.end()) at = merge_annotations(std::move(at), it->second, s.id);
    ordered_json j;
    j["record"] = "annotation";
    j["id"] = s.id;
    j["tokens"] = at.tokens;
    ordered_json pos = ordered_json::array();
    for (PosTag t : at.pos) pos.push_back(std::string(to_string(t)));
    j["pos"] = std::move(pos);
    ordered_json sents = ordered_json::array();
    for (const Span& sp : at.sentences) sents.push_back({sp.begin, sp.end});
    j["sentences"] = std::move(sents);
    ordered_json ents = ordered_json::array();
    for (std::size_t e = 0; e < at.entities.size(); ++e)
      ents.push_back({at.entities[e].begin, at.entities[e].end, at.entity_classes[e]});
    j["entities"] = std::move(ents);
    out << j.dump() << '\n';
  }
  return 0;
}

std::unique_ptr<CandidateProvider> make_provider(const std::string& spec) {
  if (spec == "confusion") return std::make_unique<ConfusionProvider>();
  if (spec.rfind("external:", 0) == 0)
    return std::make_unique<ExternalCandidateProvider>(split_command(spec.substr(9)));
  throw validation_error("unknown provider '" + spec + "' (want confusion or external:<cmd>)");
}

int cmd_perturb(const std::string& corpus_path, const std::string& kind_name, double level,
                std::uint64_t seed, const std::string& options_text,
                const std::string& annotations, const std::string& provider_spec,
                const std::string& out_path) {
  Corpus corpus = load_corpus(corpus_path);
  NoiseSpec spec;
  spec.kind = noise_kind_from_string(kind_name);
  spec.level = level;
  spec.seed = seed;
  spec.options = parse_options(options_text);

  AnnotationFile file;
  if (!annotations.empty()) file = load_annotations(annotations);

  PerturbContext ctx;
  ctx.donor = &corpus;
  NgramTable ngrams;
  std::vector<std::string> vocab;
  std::unique_ptr<CandidateProvider> provider;
  if (spec.kind == NoiseKind::freq_ngram) {
    std::size_t n = 4;
    auto it = spec.options.find("n");
    if (it != spec.options.end()) n = std::stoull(it->second);
    ngrams = collect_ngrams(corpus, n);
    ctx.ngrams = &ngrams;
  }
  if (spec.kind == NoiseKind::positioned_error) {
    vocab = corpus_vocabulary(corpus);
    ctx.vocab = &vocab;
  }
  if (!provider_spec.empty()) {
    provider = make_provider(provider_spec);
    ctx.candidates = provider.get();
  }

  std::unique_ptr<std::ofstream> out_file;
  std::ostream& out = pick_stream(out_file, out_path);
  ordered_json meta;
  meta["record"] = "meta";
  meta["tool"] = std::string(kToolName);
  meta["version"] = std::string(kToolVersion);
  meta["kind"] = kind_name;
  meta["level"] = level;
  meta["seed"] = seed;
  out << meta.dump() << '\n';
  for (const Sample& s : corpus.samples) {
    AnnotatedText at = annotate_rules(tokenize(s.gold));
    auto it = file.find(s.id);
    if (it != file.end()) at = merge_annotations(std::move(at), it->second, s.id);
    NoisedHypothesis h = apply_noise(s, at, spec, ctx);
    ordered_json j;
    j["record"] = "noised";
    j["id"] = h.sample_id;
    j["gold"] = s.gold;
    j["text"] = h.text;
    j["skipped"] = h.skipped;
    ordered_json edits = ordered_json::array();
    for (const EditRecord& e : h.edits) {
      ordered_json er;
      er["op"] = std::string(to_string(e.op));
      er["pos"] = e.pos;
      if (e.op != EditRecord::Op::del) er["payload"] = e.payload;
      edits.push_back(std::move(er));
    }
    j["edits"] = std::move(edits);
    if (!h.notes.empty()) j["notes"] = h.notes;
    out << j.dump() << '\n';
  }
  return 0;
}

int cmd_noise_ratio(const std::string& gold_path, const std::string& noised_path,
                    const std::string& kind_name, const std::string& out_path) {
  Corpus gold = load_corpus(gold_path);
  Corpus noised = load_corpus(noised_path);
  NoiseKind kind = noise_kind_from_string(kind_name);
  NoiseRatioReport report = noise_ratio(gold, noised, kind);
  std::unique_ptr<std::ofstream> out_file;
  std::ostream& out = pick_stream(out_file, out_path);
  ordered_json j;
  j["record"] = "noise_ratio";
  j["kind"] = kind_name;
  j["mean_ratio"] = report.mean_ratio;
  j["switching_halved"] = report.switching_halved;
  ordered_json per = ordered_json::array();
  for (const SampleRatio& r : report.per_sample) {
    ordered_json e;
    e["id"] = r.id;
    e["levenshtein"] = r.levenshtein;
    e["len_gold"] = r.len_gold;
    e["ratio"] = r.ratio;
    per.push_back(std::move(e));
  }
  j["per_sample"] = std::move(per);
  out << j.dump() << '\n';
  return 0;
}

int cmd_run(const std::string& plan_path, const std::string& out_dir, std::size_t jobs,
            const std::string& provider_spec) {
  TestPlan plan = load_plan(plan_path);
  if (const char* env = std::getenv("STRESSLAB_SEED")) {
    try {
      plan.master_seed = std::stoull(env);
    } catch (const std::exception&) {
      throw validation_error("STRESSLAB_SEED is not an integer: " + std::string(env));
    }
  }
  RunOptions opts;
  opts.jobs = jobs;
  std::unique_ptr<CandidateProvider> provider;
  if (!provider_spec.empty()) {
    provider = make_provider(provider_spec);
    opts.candidates = provider.get();
  }
  RunResult result = run_plan(plan, opts);
  emit_report(out_dir, plan, result);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::size_t fails = 0;
  for (const TestVerdict& v : result.verdicts)
    if (!v.pass) ++fails;
  std::cout << result.verdicts.size() << " verdicts (" << fails << " FAIL) written to "
            << out_dir << "\n";
  return 0;
}

int cmd_attack(const std::string& corpus_path, const std::string& metric, double min_ratio,
               std::size_t max_iters, const std::string& providers_text,
               const std::string& out_path) {
  Corpus corpus = load_corpus(corpus_path);
  std::vector<std::unique_ptr<CandidateProvider>> providers;
  std::istringstream ss(providers_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) providers.push_back(make_provider(item));
  }
  if (providers.empty()) throw validation_error("attack needs at least one provider");

  AttackConfig cfg;
  cfg.min_noise_ratio = min_ratio;
  cfg.max_iters = max_iters;
  for (auto& p : providers) cfg.providers.push_back(p.get());

  std::unique_ptr<std::ofstream> out_file;
  std::ostream& out = pick_stream(out_file, out_path);
  for (const Sample& s : corpus.samples) {
    AttackScorer scorer = make_attack_scorer(metric, s);
    AttackResult r = greedy_attack(s, scorer, cfg);
    ordered_json j;
    j["record"] = "attack";
    j["id"] = r.sample_id;
    j["metric"] = metric;
    j["text"] = r.text;
    j["score"] = r.score;
    j["ratio"] = r.ratio;
    j["reached_min_ratio"] = r.reached_min_ratio;
    ordered_json steps = ordered_json::array();
    for (const AttackStep& st : r.trajectory) {
      ordered_json e;
      e["iteration"] = st.iteration;
      e["op"] = st.op;
      e["pos"] = st.pos;
      if (st.op == "sub") e["token"] = st.token;
      e["score"] = st.score;
      e["ratio"] = st.ratio;
      steps.push_back(std::move(e));
    }
    j["trajectory"] = std::move(steps);
    out << j.dump() << '\n';
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "verdicts.jsonl", std::ios::binary);
  if (!in) throw validation_error("no verdicts.jsonl under " + dir);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("record", "") != "verdict") continue;
    std::cout << j["verdict"].get<std::string>() << "  " << j["metric"].get<std::string>()
              << " / " << j["kind"].get<std::string>();
    if (!j["first_violation"].is_null())
      std::cout << "  (first violation at level index " << j["first_violation"].get<int>()
                << ")";
    std::cout << "\n    gold";
    for (const auto& lv : j["levels"]) {
      if (lv["level_index"].get<int>() == 0) {
        std::cout << " mean=" << lv["mean"].get<double>();
        continue;
      }
      std::cout << " | L" << lv["level_index"].get<int>() << " ratio="
                << lv["noise_ratio"].get<double>() << " mean=" << lv["mean"].get<double>()
                << "±" << lv["std"].get<double>();
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stresslab: stress-test text-generation metrics with synthetic noise"};
  app.require_subcommand(1);

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "corpus utilities");
  corpus_cmd->require_subcommand(1);
  std::string cv_path, cv_task;
  auto* validate_cmd = corpus_cmd->add_subcommand("validate", "validate a corpus file");
  validate_cmd->add_option("corpus", cv_path)->required();
  validate_cmd->add_option("--task", cv_task, "open_ended|translation|summarization");
  std::string cw_in, cw_out, cw_task;
  std::size_t cw_max_len = 256;
  auto* clean_cmd =
      corpus_cmd->add_subcommand("clean-wikitext", "build a corpus from raw wikitext lines");
  clean_cmd->add_option("input", cw_in)->required();
  clean_cmd->add_option("output", cw_out)->required();
  clean_cmd->add_option("--max-len", cw_max_len, "sentence-budget token cap (default 256)");
  clean_cmd->add_option("--task", cw_task);

  // annotate
  std::string an_corpus, an_file, an_out;
  auto* annotate_cmd = app.add_subcommand("annotate", "emit token/pos/entity annotations");
  annotate_cmd->add_option("corpus", an_corpus)->required();
  annotate_cmd->add_option("--annotations", an_file, "external annotation file to merge");
  annotate_cmd->add_option("--out", an_out);

  // perturb
  std::string pt_corpus, pt_kind, pt_options, pt_annotations, pt_provider, pt_out;
  double pt_level = 0.0;
  std::uint64_t pt_seed = 0;
  auto* perturb_cmd = app.add_subcommand("perturb", "apply one noise kind to a corpus");
  perturb_cmd->add_option("corpus", pt_corpus)->required();
  perturb_cmd->add_option("--kind", pt_kind)->required();
  perturb_cmd->add_option("--level", pt_level)->required();
  perturb_cmd->add_option("--seed", pt_seed);
  perturb_cmd->add_option("--options", pt_options, "kind options as k=v,k2=v2");
  perturb_cmd->add_option("--annotations", pt_annotations);
  perturb_cmd->add_option("--provider", pt_provider, "confusion or external:<cmd>");
  perturb_cmd->add_option("--out", pt_out);

  // noise-ratio
  std::string nr_gold, nr_noised, nr_kind, nr_out;
  auto* ratio_cmd = app.add_subcommand("noise-ratio", "measure noise-ratio vs gold");
  ratio_cmd->add_option("gold", nr_gold)->required();
  ratio_cmd->add_option("noised", nr_noised)->required();
  ratio_cmd->add_option("--kind", nr_kind)->required();
  ratio_cmd->add_option("--out", nr_out);

  // run
  std::string run_plan_path, run_out, run_provider;
  std::size_t run_jobs = 1;
  auto* run_cmd = app.add_subcommand("run", "execute a test plan");
  run_cmd->add_option("plan", run_plan_path)->required();
  run_cmd->add_option("--out", run_out)->required();
  run_cmd->add_option("--jobs", run_jobs, "parallel perturb/score workers (default 1)");
  run_cmd->add_option("--provider", run_provider, "candidate provider for bert_diverge");

  // attack
  std::string at_corpus, at_metric, at_providers = "confusion", at_out;
  double at_min_ratio = 0.1;
  std::size_t at_max_iters = 32;
  auto* attack_cmd = app.add_subcommand("attack", "greedy per-sample metric attack");
  attack_cmd->add_option("corpus", at_corpus)->required();
  attack_cmd->add_option("--metric", at_metric)->required();
  attack_cmd->add_option("--min-ratio", at_min_ratio);
  attack_cmd->add_option("--max-iters", at_max_iters);
  attack_cmd->add_option("--providers", at_providers, "comma list: confusion,external:<cmd>");
  attack_cmd->add_option("--out", at_out);

  // report
  std::string rp_dir;
  auto* report_cmd = app.add_subcommand("report", "print verdicts from a run directory");
  report_cmd->add_option("dir", rp_dir)->required();

  try {
    app.parse(argc, argv);
    if (validate_cmd->parsed()) return cmd_corpus_validate(cv_path, cv_task);
    if (clean_cmd->parsed()) return cmd_clean_wikitext(cw_in, cw_out, cw_max_len, cw_task);
    if (annotate_cmd->parsed()) return cmd_annotate(an_corpus, an_file, an_out);
    if (perturb_cmd->parsed())
      return cmd_perturb(pt_corpus, pt_kind, pt_level, pt_seed, pt_options, pt_annotations,
                         pt_provider, pt_out);
    if (ratio_cmd->parsed()) return cmd_noise_ratio(nr_gold, nr_noised, nr_kind, nr_out);
    if (run_cmd->parsed()) return cmd_run(run_plan_path, run_out, run_jobs, run_provider);
    if (attack_cmd->parsed())
      return cmd_attack(at_corpus, at_metric, at_min_ratio, at_max_iters, at_providers, at_out);
    if (report_cmd->parsed()) return cmd_report(rp_dir);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const runtime_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

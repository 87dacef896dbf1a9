#include "stresslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stresslab/distance.hpp"
#include "stresslab/error.hpp"
#include "stresslab/rng.hpp"
#include "stresslab/version.hpp"

namespace stresslab {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

std::string option_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

TestPlan parse_plan(const std::string& text, const std::string& base_dir) {
  TestPlan plan;
  plan.raw_bytes = text;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool saw_plan = false;
  std::set<std::string> metric_names;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw validation_error("plan line " + std::to_string(lineno) + " is not a JSON object");
    std::string kind = rec.value("record", "");
    if (kind == "plan") {
      if (saw_plan)
        throw validation_error("plan line " + std::to_string(lineno) + ": duplicate plan record");
      saw_plan = true;
      if (!rec.contains("corpus") || !rec["corpus"].is_string())
        throw validation_error("plan record needs a corpus path");
      plan.corpus_path = resolve_path(rec["corpus"].get<std::string>(), base_dir);
      if (rec.contains("annotations"))
        plan.annotations_path = resolve_path(rec["annotations"].get<std::string>(), base_dir);
      if (rec.contains("master_seed")) plan.master_seed = rec["master_seed"].get<std::uint64_t>();
      if (rec.contains("seeds")) plan.seeds = rec["seeds"].get<std::size_t>();
      if (rec.contains("tie_tol")) plan.tie_tol = rec["tie_tol"].get<double>();
      if (plan.seeds < 1) throw validation_error("plan seeds must be >= 1");
      if (plan.tie_tol < 0) throw validation_error("plan tie_tol must be >= 0");
    } else if (kind == "metric") {
      std::string name = rec.value("name", "");
      if (!is_builtin_metric(name))
        throw validation_error("plan line " + std::to_string(lineno) +
                               ": unknown built-in metric '" + name + "'");
      if (!metric_names.insert(name).second)
        throw validation_error("duplicate metric name in plan: " + name);
      plan.metrics.push_back(name);
    } else if (kind == "adapter") {
      AdapterConfig cfg;
      cfg.name = rec.value("name", "");
      if (cfg.name.empty())
        throw validation_error("plan line " + std::to_string(lineno) + ": adapter needs a name");
      if (!rec.contains("command") || !rec["command"].is_array() || rec["command"].empty())
        throw validation_error("adapter '" + cfg.name + "' needs a non-empty command array");
      for (const auto& part : rec["command"]) cfg.command.push_back(part.get<std::string>());
      if (rec.contains("timeout_s")) cfg.timeout_s = rec["timeout_s"].get<double>();
      if (rec.contains("batch_size")) cfg.batch_size = rec["batch_size"].get<std::size_t>();
      if (cfg.batch_size < 1) throw validation_error("adapter batch_size must be >= 1");
      if (!metric_names.insert(cfg.name).second)
        throw validation_error("duplicate metric name in plan: " + cfg.name);
      plan.adapters.push_back(std::move(cfg));
    } else if (kind == "test") {
      NoiseTest test;
      test.kind = noise_kind_from_string(rec.value("kind", ""));
      if (!rec.contains("levels") || !rec["levels"].is_array() || rec["levels"].empty())
        throw validation_error("test record for " + std::string(to_string(test.kind)) +
                               " needs a non-empty levels array");
      for (const auto& lv : rec["levels"]) test.levels.push_back(lv.get<double>());
      if (rec.contains("options"))
        for (const auto& [k, v] : rec["options"].items())
          test.options[k] = option_to_string(v);
      plan.tests.push_back(std::move(test));
    } else {
      throw validation_error("plan line " + std::to_string(lineno) +
                             ": unknown record type '" + kind + "'");
    }
  }
  if (!saw_plan) throw validation_error("plan file has no plan record");
  if (plan.metrics.empty() && plan.adapters.empty())
    throw validation_error("plan declares no metrics");
  if (plan.tests.empty()) throw validation_error("plan declares no tests");
  return plan;
}

TestPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open plan file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_plan(buf.str(), fs::path(path).parent_path().string());
}

std::uint64_t plan_hash(const TestPlan& plan) { return fnv1a(plan.raw_bytes); }

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());  // population std over seeds
  return {mean, std::sqrt(var)};
}

TestVerdict rank_verdict(const std::string& metric, const std::string& kind,
                         const AggregatedLevel& gold, std::vector<AggregatedLevel> levels,
                         double tie_tol) {
  TestVerdict v;
  v.metric = metric;
  v.kind = kind;
  v.levels.push_back(gold);
  for (auto& lv : levels) v.levels.push_back(std::move(lv));
  v.pass = true;
  for (std::size_t i = 1; i < v.levels.size(); ++i) {
    if (!(v.levels[i - 1].mean - v.levels[i].mean > tie_tol)) {
      v.pass = false;
      v.first_violation = i;  // gold counts as index 0
      break;
    }
  }
  return v;
}

namespace {

struct Unit {
  std::size_t test_idx = 0;
  std::size_t level_index = 0;  // 1-based; 0 is reserved for gold
  std::size_t seed_index = 0;
};

NoisedSet make_noised_set(const TestPlan& plan, const Corpus& corpus,
                          const std::vector<AnnotatedText>& ats, const PerturbContext& ctx,
                          const Unit& unit) {
  const NoiseTest& test = plan.tests[unit.test_idx];
  NoisedSet set;
  set.kind = test.kind;
  set.level = test.levels[unit.level_index - 1];
  set.level_index = unit.level_index;
  set.seed_index = unit.seed_index;
  set.seed = chain_seed(chain_seed(chain_seed(plan.master_seed, to_string(test.kind)),
                                   static_cast<std::uint64_t>(unit.level_index)),
                        static_cast<std::uint64_t>(unit.seed_index));
  NoiseSpec spec;
  spec.kind = test.kind;
  spec.level = set.level;
  spec.seed = set.seed;
  spec.options = test.options;
  set.hyps.reserve(corpus.samples.size());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i)
    set.hyps.push_back(apply_noise(corpus.samples[i], ats[i], spec, ctx));
  set.all_skipped =
      std::all_of(set.hyps.begin(), set.hyps.end(), [](const NoisedHypothesis& h) { return h.skipped; });

  Corpus noised;
  noised.task = corpus.task;
  for (const NoisedHypothesis& h : set.hyps)
    noised.samples.push_back({h.sample_id, std::nullopt, {}, h.text});
  set.noise_ratio = noise_ratio(corpus, noised, test.kind).mean_ratio;
  return set;
}

ScoreRecord score_builtin_set(const BuiltinMetric& metric, const Corpus& corpus,
                              const NoisedSet& set) {
  ScoreRecord rec;
  rec.metric = metric.descriptor.name;
  rec.kind = std::string(to_string(set.kind));
  rec.level = set.level;
  rec.level_index = set.level_index;
  rec.seed_index = set.seed_index;
  double sum = 0.0;
  for (std::size_t i = 0; i < set.hyps.size(); ++i) {
    double s = metric.score(set.hyps[i].text, corpus.samples[i]);
    rec.per_sample.emplace_back(set.hyps[i].sample_id, s);
    sum += s;
  }
  rec.mean = sum / static_cast<double>(set.hyps.size());
  return rec;
}

ScoreRecord score_builtin_gold(const BuiltinMetric& metric, const Corpus& corpus) {
  ScoreRecord rec;
  rec.metric = metric.descriptor.name;
  rec.kind = "gold";
  double sum = 0.0;
  for (const Sample& s : corpus.samples) {
    double v = metric.score(s.gold, s);
    rec.per_sample.emplace_back(s.id, v);
    sum += v;
  }
  rec.mean = sum / static_cast<double>(corpus.samples.size());
  return rec;
}

std::vector<ScoreItem> to_score_items(const Corpus& corpus, const NoisedSet* set) {
  std::vector<ScoreItem> items;
  items.reserve(corpus.samples.size());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    items.push_back({s.id, set ? set->hyps[i].text : s.gold, s.source, s.references});
  }
  return items;
}

ScoreRecord score_adapter_set(AdapterProcess& adapter, const Corpus& corpus,
                              const NoisedSet* set) {
  ScoreRecord rec;
  rec.metric = adapter.config().name;
  if (set) {
    rec.kind = std::string(to_string(set->kind));
    rec.level = set->level;
    rec.level_index = set->level_index;
    rec.seed_index = set->seed_index;
  } else {
    rec.kind = "gold";
  }
  std::vector<ScoreResult> scores = adapter.score_batch(to_score_items(corpus, set));
  double sum = 0.0;
  for (const ScoreResult& r : scores) {
    rec.per_sample.emplace_back(r.id, r.score);
    sum += r.score;
  }
  rec.mean = scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
  return rec;
}

}  // namespace

RunResult run_plan(const TestPlan& plan, const RunOptions& opts) {
  Corpus corpus = load_corpus(plan.corpus_path);
  if (corpus.samples.empty()) throw validation_error("plan corpus is empty");

  std::vector<AnnotatedText> ats;
  ats.reserve(corpus.samples.size());
  for (const Sample& s : corpus.samples) ats.push_back(annotate_rules(tokenize(s.gold)));
  if (plan.annotations_path) {
    AnnotationFile file = load_annotations(*plan.annotations_path);
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
      auto it = file.find(corpus.samples[i].id);
      if (it != file.end())
        ats[i] = merge_annotations(std::move(ats[i]), it->second, corpus.samples[i].id);
    }
  }

  std::vector<BuiltinMetric> builtins;
  for (const std::string& name : plan.metrics) builtins.push_back(make_builtin_metric(name));

  // Shared kind prerequisites, built once.
  std::map<std::size_t, NgramTable> ngram_tables;  // keyed by test index
  bool need_vocab = false;
  for (std::size_t t = 0; t < plan.tests.size(); ++t) {
    const NoiseTest& test = plan.tests[t];
    if (test.kind == NoiseKind::freq_ngram) {
      std::size_t n = 4;
      auto it = test.options.find("n");
      if (it != test.options.end()) n = std::stoull(it->second);
      ngram_tables.emplace(t, collect_ngrams(corpus, n));
    }
    if (test.kind == NoiseKind::positioned_error) {
      auto it = test.options.find("mode");
      if (it == test.options.end() || it->second == "random") need_vocab = true;
    }
  }
  std::vector<std::string> vocab;
  if (need_vocab) vocab = corpus_vocabulary(corpus);

  std::vector<Unit> units;
  for (std::size_t t = 0; t < plan.tests.size(); ++t)
    for (std::size_t l = 1; l <= plan.tests[t].levels.size(); ++l)
      for (std::size_t s = 0; s < plan.seeds; ++s) units.push_back({t, l, s});

  std::vector<NoisedSet> sets(units.size());
  std::vector<std::vector<ScoreRecord>> builtin_records(units.size());
  std::vector<std::exception_ptr> failures(units.size());

  auto process_unit = [&](std::size_t u) {
    PerturbContext ctx;
    ctx.donor = &corpus;
    auto ng = ngram_tables.find(units[u].test_idx);
    if (ng != ngram_tables.end()) ctx.ngrams = &ng->second;
    if (!vocab.empty()) ctx.vocab = &vocab;
    ctx.candidates = opts.candidates;
    sets[u] = make_noised_set(plan, corpus, ats, ctx, units[u]);
    for (const BuiltinMetric& m : builtins)
      builtin_records[u].push_back(score_builtin_set(m, corpus, sets[u]));
  };

  std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
  if (jobs == 1) {
    for (std::size_t u = 0; u < units.size(); ++u) {
      try {
        process_unit(u);
      } catch (...) {
        failures[u] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t u = cursor.fetch_add(1);
          if (u >= units.size()) return;
          try {
            process_unit(u);
          } catch (...) {
            failures[u] = std::current_exception();
          }
        }
      });
    for (std::thread& th : pool) th.join();
  }
  // Deterministic error propagation: first failing unit in plan order wins.
  for (const std::exception_ptr& e : failures)
    if (e) std::rethrow_exception(e);

  RunResult result;

  // Drop levels where every seed produced an all-skipped set.
  std::set<std::pair<std::size_t, std::size_t>> dropped;  // (test_idx, level_index)
  for (std::size_t t = 0; t < plan.tests.size(); ++t) {
    for (std::size_t l = 1; l <= plan.tests[t].levels.size(); ++l) {
      bool all = true;
      for (std::size_t u = 0; u < units.size(); ++u)
        if (units[u].test_idx == t && units[u].level_index == l && !sets[u].all_skipped)
          all = false;
      if (all) {
        dropped.insert({t, l});
        result.warnings.push_back("kind " + std::string(to_string(plan.tests[t].kind)) +
                                  " level " + std::to_string(plan.tests[t].levels[l - 1]) +
                                  ": no eligible targets in any seed; level dropped");
      }
    }
  }

  // Gold records, one per metric (built-ins now, adapters after spawn).
  for (const BuiltinMetric& m : builtins) result.records.push_back(score_builtin_gold(m, corpus));

  // Adapter scoring is serialized per adapter, in plan order.
  std::vector<ScoreRecord> adapter_gold;
  std::vector<std::vector<ScoreRecord>> adapter_unit_records(units.size());
  for (const AdapterConfig& cfg : plan.adapters) {
    AdapterProcess adapter(cfg);
    if (adapter.config().name != cfg.name)
      throw runtime_failure("adapter '" + cfg.name + "' introduced itself as '" +
                            adapter.config().name + "'");
    adapter_gold.push_back(score_adapter_set(adapter, corpus, nullptr));
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (dropped.count({units[u].test_idx, units[u].level_index})) continue;
      adapter_unit_records[u].push_back(score_adapter_set(adapter, corpus, &sets[u]));
    }
  }
  for (ScoreRecord& rec : adapter_gold) result.records.push_back(std::move(rec));

  // Noised-set score records in plan order.
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (dropped.count({units[u].test_idx, units[u].level_index})) continue;
    for (ScoreRecord& rec : builtin_records[u]) result.records.push_back(std::move(rec));
    for (ScoreRecord& rec : adapter_unit_records[u]) result.records.push_back(std::move(rec));
    result.noised.push_back(std::move(sets[u]));
  }

  // Aggregate per (metric, test, level) and validate the level grids.
  std::vector<std::string> metric_order = plan.metrics;
  for (const AdapterConfig& cfg : plan.adapters) metric_order.push_back(cfg.name);

  auto find_gold_mean = [&](const std::string& metric) {
    for (const ScoreRecord& rec : result.records)
      if (rec.kind == "gold" && rec.metric == metric) return rec.mean;
    throw runtime_failure("missing gold record for metric " + metric);
  };

  for (std::size_t t = 0; t < plan.tests.size(); ++t) {
    const NoiseTest& test = plan.tests[t];
    std::string kind_name(to_string(test.kind));

    // Mean measured ratio per surviving level, for grid validation.
    std::vector<std::pair<std::size_t, double>> level_ratios;
    for (std::size_t l = 1; l <= test.levels.size(); ++l) {
      if (dropped.count({t, l})) continue;
      std::vector<double> ratios;
      for (const NoisedSet& set : result.noised)
        if (set.kind == test.kind && set.level_index == l &&
            std::fabs(set.level - test.levels[l - 1]) < 1e-12)
          ratios.push_back(set.noise_ratio);
      if (!ratios.empty()) level_ratios.emplace_back(l, mean_and_std(ratios).first);
    }
    for (std::size_t i = 1; i < level_ratios.size(); ++i) {
      if (!(level_ratios[i].second > level_ratios[i - 1].second)) {
        std::ostringstream msg;
        msg << "level grid for " << kind_name
            << " is not strictly increasing in measured noise-ratio:";
        for (const auto& [l, r] : level_ratios)
          msg << " L" << l << "=" << r;
        throw validation_error(msg.str());
      }
    }
    if (level_ratios.empty()) continue;  // every level dropped

    for (const std::string& metric : metric_order) {
      std::vector<AggregatedLevel> levels;
      for (const auto& [l, ratio] : level_ratios) {
        std::vector<double> means;
        for (const ScoreRecord& rec : result.records)
          if (rec.metric == metric && rec.kind == kind_name && rec.level_index == l)
            means.push_back(rec.mean);
        auto [mean, sd] = mean_and_std(means);
        AggregatedLevel agg;
        agg.level = test.levels[l - 1];
        agg.level_index = l;
        agg.noise_ratio = ratio;
        agg.mean = mean;
        agg.std_dev = sd;
        agg.seeds = means.size();
        levels.push_back(agg);
      }
      AggregatedLevel gold;
      gold.mean = find_gold_mean(metric);
      result.verdicts.push_back(
          rank_verdict(metric, kind_name, gold, std::move(levels), plan.tie_tol));
    }
  }
  return result;
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ojson meta_record(const TestPlan& plan) {
  ojson meta;
  meta["record"] = "meta";
  meta["tool"] = std::string(kToolName);
  meta["version"] = std::string(kToolVersion);
  meta["master_seed"] = plan.master_seed;
  meta["plan_hash"] = hash_hex(plan_hash(plan));
  return meta;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw runtime_failure("cannot write " + path.string());
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

ojson edits_to_json(const std::vector<EditRecord>& edits) {
  ojson arr = ojson::array();
  for (const EditRecord& e : edits) {
    ojson rec;
    rec["op"] = std::string(to_string(e.op));
    rec["pos"] = e.pos;
    if (e.op != EditRecord::Op::del) rec["payload"] = e.payload;
    arr.push_back(std::move(rec));
  }
  return arr;
}

}  // namespace

void emit_report(const std::string& out_dir, const TestPlan& plan, const RunResult& result) {
  fs::create_directories(fs::path(out_dir) / "noised");
  const ojson meta = meta_record(plan);

  {
    std::ofstream out = open_out(fs::path(out_dir) / "scores.jsonl");
    out << meta.dump() << '\n';
    for (const ScoreRecord& rec : result.records) {
      ojson j;
      j["record"] = "score";
      j["metric"] = rec.metric;
      j["kind"] = rec.kind;
      j["level"] = rec.level;
      j["level_index"] = rec.level_index;
      j["seed_index"] = rec.seed_index;
      j["mean"] = rec.mean;
      ojson per = ojson::object();
      for (const auto& [id, score] : rec.per_sample) per[id] = score;
      j["per_sample"] = std::move(per);
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "summary.jsonl");
    out << meta.dump() << '\n';
    std::set<std::string> gold_done;
    for (const TestVerdict& v : result.verdicts) {
      for (const AggregatedLevel& lv : v.levels) {
        if (lv.level_index == 0) {
          if (!gold_done.insert(v.metric).second) continue;
          ojson j;
          j["record"] = "summary";
          j["metric"] = v.metric;
          j["kind"] = "gold";
          j["level"] = 0.0;
          j["level_index"] = 0;
          j["noise_ratio"] = 0.0;
          j["mean"] = lv.mean;
          j["std"] = 0.0;
          j["seeds"] = 1;
          out << j.dump() << '\n';
          continue;
        }
        ojson j;
        j["record"] = "summary";
        j["metric"] = v.metric;
        j["kind"] = v.kind;
        j["level"] = lv.level;
        j["level_index"] = lv.level_index;
        j["noise_ratio"] = lv.noise_ratio;
        j["mean"] = lv.mean;
        j["std"] = lv.std_dev;
        j["seeds"] = lv.seeds;
        out << j.dump() << '\n';
      }
    }
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "verdicts.jsonl");
    out << meta.dump() << '\n';
    for (const TestVerdict& v : result.verdicts) {
      ojson j;
      j["record"] = "verdict";
      j["metric"] = v.metric;
      j["kind"] = v.kind;
      j["verdict"] = v.pass ? "PASS" : "FAIL";
      if (v.first_violation)
        j["first_violation"] = *v.first_violation;
      else
        j["first_violation"] = nullptr;
      ojson levels = ojson::array();
      for (const AggregatedLevel& lv : v.levels) {
        ojson l;
        l["level"] = lv.level;
        l["level_index"] = lv.level_index;
        l["noise_ratio"] = lv.noise_ratio;
        l["mean"] = lv.mean;
        l["std"] = lv.std_dev;
        levels.push_back(std::move(l));
      }
      j["levels"] = std::move(levels);
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "plot_data.tsv");
    out << "# " << kToolName << " " << kToolVersion << " master_seed=" << plan.master_seed
        << " plan_hash=" << hash_hex(plan_hash(plan)) << '\n';
    out << "metric\tkind\tlevel_index\tnoise_ratio\tmean\tband_lo\tband_hi\n";
    for (const TestVerdict& v : result.verdicts)
      for (const AggregatedLevel& lv : v.levels)
        out << v.metric << '\t' << v.kind << '\t' << lv.level_index << '\t'
            << format_number(lv.noise_ratio) << '\t' << format_number(lv.mean) << '\t'
            << format_number(lv.mean - lv.std_dev) << '\t'
            << format_number(lv.mean + lv.std_dev) << '\n';
  }
  for (const NoisedSet& set : result.noised) {
    std::string name = std::string(to_string(set.kind)) + "_L" +
                       std::to_string(set.level_index) + "_S" +
                       std::to_string(set.seed_index) + ".jsonl";
    std::ofstream out = open_out(fs::path(out_dir) / "noised" / name);
    out << meta.dump() << '\n';
    ojson head;
    head["record"] = "noise_set";
    head["kind"] = std::string(to_string(set.kind));
    head["level"] = set.level;
    head["level_index"] = set.level_index;
    head["seed_index"] = set.seed_index;
    head["seed"] = set.seed;
    head["noise_ratio"] = set.noise_ratio;
    out << head.dump() << '\n';
    for (const NoisedHypothesis& h : set.hyps) {
      ojson j;
      j["record"] = "noised";
      j["id"] = h.sample_id;
      j["text"] = h.text;
      j["skipped"] = h.skipped;
      j["edits"] = edits_to_json(h.edits);
      if (!h.notes.empty()) j["notes"] = h.notes;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace stresslab

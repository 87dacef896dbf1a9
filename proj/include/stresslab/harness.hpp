#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stresslab/adapter.hpp"
#include "stresslab/corpus.hpp"
#include "stresslab/noise_kind.hpp"
#include "stresslab/perturb.hpp"

namespace stresslab {

struct NoiseTest {
  NoiseKind kind = NoiseKind::truncation;
  std::vector<double> levels;
  std::map<std::string, std::string> options;
};

struct TestPlan {
  std::string corpus_path;
  std::optional<std::string> annotations_path;
  std::uint64_t master_seed = 0;
  std::size_t seeds = 5;
  double tie_tol = 1e-9;
  std::vector<std::string> metrics;        // built-in names
  std::vector<AdapterConfig> adapters;
  std::vector<NoiseTest> tests;
  std::string raw_bytes;                   // exact plan file contents, hashed into artifacts
};

// Parses the line-record plan format; relative paths resolve against the
// plan file's directory.
TestPlan load_plan(const std::string& path);
TestPlan parse_plan(const std::string& text, const std::string& base_dir);
std::uint64_t plan_hash(const TestPlan& plan);

struct ScoreRecord {
  std::string metric;
  std::string kind;                // noise kind name, or "gold"
  double level = 0.0;              // 0 for gold
  std::size_t level_index = 0;     // 0 = gold, 1.. = plan levels
  std::size_t seed_index = 0;
  std::vector<std::pair<std::string, double>> per_sample;
  double mean = 0.0;
};

struct AggregatedLevel {
  double level = 0.0;
  std::size_t level_index = 0;     // 0 = gold
  double noise_ratio = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t seeds = 1;
};

struct TestVerdict {
  std::string metric;
  std::string kind;
  std::vector<AggregatedLevel> levels;  // gold first, then surviving plan levels
  bool pass = false;
  std::optional<std::size_t> first_violation;  // index into levels (gold = 0)
};

struct NoisedSet {
  NoiseKind kind = NoiseKind::truncation;
  double level = 0.0;
  std::size_t level_index = 0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  double noise_ratio = 0.0;
  std::vector<NoisedHypothesis> hyps;
  bool all_skipped = false;
};

struct RunResult {
  std::vector<ScoreRecord> records;
  std::vector<TestVerdict> verdicts;
  std::vector<NoisedSet> noised;           // surviving (kind, level, seed) sets
  std::vector<std::string> warnings;
};

struct RunOptions {
  std::size_t jobs = 1;
  CandidateProvider* candidates = nullptr;  // for bert_diverge plans
};

// Per-seed means collapse to mean and population standard deviation.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

TestVerdict rank_verdict(const std::string& metric, const std::string& kind,
                         const AggregatedLevel& gold, std::vector<AggregatedLevel> levels,
                         double tie_tol);

RunResult run_plan(const TestPlan& plan, const RunOptions& opts);

// Writes scores.jsonl, summary.jsonl, verdicts.jsonl, plot_data.tsv and
// noised/<kind>_L<level>_S<seed>.jsonl under out_dir. Artifacts are
// byte-stable: no timestamps, fixed ordering.
void emit_report(const std::string& out_dir, const TestPlan& plan, const RunResult& result);

}  // namespace stresslab

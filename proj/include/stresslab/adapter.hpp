#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stresslab/line_process.hpp"
#include "stresslab/metrics.hpp"

namespace stresslab {

struct AdapterConfig {
  std::string name;                   // registry name used in plans/reports
  std::vector<std::string> command;   // argv for the child process
  MetricDescriptor::Scope scope = MetricDescriptor::Scope::sample;
  bool needs_source = false;
  bool needs_references = false;
  double timeout_s = 30.0;
  std::size_t batch_size = 32;
};

struct ScoreItem {
  std::string id;
  std::string hypothesis;
  std::optional<std::string> source;
  std::vector<std::string> references;
};

struct ScoreResult {
  std::string id;
  double score = 0.0;
};

// One external metric process. The child prints a capability line first:
//   {"name": ..., "scope": "sample"|"set", "needs": ["source","references"]}
// then answers request lines {"id","hypothesis","source","references"} with
// {"id","score"}. Set-scope children score everything after {"record":"end_set"}
// and answer once under id "__set__".
class AdapterProcess {
 public:
  explicit AdapterProcess(AdapterConfig cfg);

  // Handshake-resolved view of the adapter (scope/needs come from the child).
  const AdapterConfig& config() const { return cfg_; }
  MetricDescriptor descriptor() const;

  std::vector<ScoreResult> score_batch(const std::vector<ScoreItem>& items);

 private:
  std::string encode_request(const ScoreItem& item) const;
  AdapterConfig cfg_;
  std::unique_ptr<LineProcess> proc_;
};

}  // namespace stresslab

#include "stresslab/adapter.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "stresslab/error.hpp"

namespace stresslab {

using json = nlohmann::json;

namespace {

json parse_reply(const std::string& line, const std::string& who) {
  json reply = json::parse(line, nullptr, false);
  if (reply.is_discarded() || !reply.is_object())
    throw runtime_failure("adapter [" + who + "] sent a malformed line: " + line);
  return reply;
}

double extract_score(const json& reply, const std::string& line, const std::string& who) {
  if (!reply.contains("score") || !reply["score"].is_number())
    throw runtime_failure("adapter [" + who + "] reply lacks a numeric score: " + line);
  double score = reply["score"].get<double>();
  if (!std::isfinite(score))
    throw runtime_failure("adapter [" + who + "] returned a non-finite score: " + line);
  return score;
}

}  // namespace

AdapterProcess::AdapterProcess(AdapterConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) throw validation_error("adapter command must be non-empty");
  if (cfg_.batch_size == 0) throw validation_error("adapter batch_size must be >= 1");
  if (const char* env = std::getenv("STRESSLAB_ADAPTER_TIMEOUT")) {
    try {
      cfg_.timeout_s = std::stod(env);
    } catch (const std::exception&) {
      throw validation_error("STRESSLAB_ADAPTER_TIMEOUT is not a number: " + std::string(env));
    }
  }
  proc_ = std::make_unique<LineProcess>(cfg_.command);

  auto line = proc_->read_line(cfg_.timeout_s);
  if (!line)
    throw runtime_failure("adapter [" + proc_->command_line() +
                          "] exited before sending its capability line");
  json hello = parse_reply(*line, proc_->command_line());
  if (hello.contains("name") && hello["name"].is_string() && cfg_.name.empty())
    cfg_.name = hello["name"].get<std::string>();
  if (hello.contains("scope")) {
    std::string scope = hello["scope"].get<std::string>();
    if (scope == "sample")
      cfg_.scope = MetricDescriptor::Scope::sample;
    else if (scope == "set")
      cfg_.scope = MetricDescriptor::Scope::set;
    else
      throw runtime_failure("adapter [" + proc_->command_line() +
                            "] declared unknown scope: " + scope);
  }
  if (hello.contains("needs")) {
    cfg_.needs_source = false;
    cfg_.needs_references = false;
    for (const auto& need : hello["needs"]) {
      std::string n = need.get<std::string>();
      if (n == "source")
        cfg_.needs_source = true;
      else if (n == "references")
        cfg_.needs_references = true;
      else
        throw runtime_failure("adapter [" + proc_->command_line() +
                              "] declared unknown need: " + n);
    }
  }
}

MetricDescriptor AdapterProcess::descriptor() const {
  MetricDescriptor d;
  d.name = cfg_.name;
  d.higher_is_better = true;  // protocol contract: adapters negate if needed
  d.scope = cfg_.scope;
  d.needs_source = cfg_.needs_source;
  d.needs_references = cfg_.needs_references;
  return d;
}

std::string AdapterProcess::encode_request(const ScoreItem& item) const {
  nlohmann::ordered_json req;
  req["id"] = item.id;
  req["hypothesis"] = item.hypothesis;
  if (cfg_.needs_source) {
    if (!item.source)
      throw validation_error("adapter '" + cfg_.name + "' needs a source but sample '" +
                             item.id + "' has none");
    req["source"] = *item.source;
  }
  if (cfg_.needs_references) req["references"] = item.references;
  return req.dump();
}

std::vector<ScoreResult> AdapterProcess::score_batch(const std::vector<ScoreItem>& items) {
  if (items.empty()) return {};
  const std::string& who = proc_->command_line();

  if (cfg_.scope == MetricDescriptor::Scope::set) {
    for (const ScoreItem& item : items) proc_->send_line(encode_request(item));
    proc_->send_line(R"({"record":"end_set"})");
    auto line = proc_->read_line(cfg_.timeout_s);
    if (!line)
      throw runtime_failure("adapter [" + who + "] exited before scoring the set");
    json reply = parse_reply(*line, who);
    if (!reply.contains("id") || reply["id"] != "__set__")
      throw runtime_failure("adapter [" + who + "] set reply must use id \"__set__\": " + *line);
    return {{"__set__", extract_score(reply, *line, who)}};
  }

  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!slot.emplace(items[i].id, i).second)
      throw validation_error("duplicate id in score batch: " + items[i].id);
  }
  std::vector<ScoreResult> results(items.size());
  std::set<std::string> outstanding;
  std::size_t next = 0, done = 0;
  auto pump = [&] {
    while (next < items.size() && outstanding.size() < cfg_.batch_size) {
      proc_->send_line(encode_request(items[next]));
      outstanding.insert(items[next].id);
      ++next;
    }
  };
  auto list_outstanding = [&] {
    std::string missing;
    for (const std::string& id : outstanding) {
      if (!missing.empty()) missing += ", ";
      missing += id;
    }
    return missing;
  };
  pump();
  while (done < items.size()) {
    std::optional<std::string> line;
    try {
      line = proc_->read_line(cfg_.timeout_s);
    } catch (const runtime_failure& e) {
      throw runtime_failure(std::string(e.what()) + "; unscored ids: " + list_outstanding());
    }
    if (!line)
      throw runtime_failure("adapter [" + who +
                            "] exited without scoring: " + list_outstanding());
    json reply = parse_reply(*line, who);
    if (!reply.contains("id") || !reply["id"].is_string())
      throw runtime_failure("adapter [" + who + "] reply lacks an id: " + *line);
    std::string id = reply["id"].get<std::string>();
    auto it = slot.find(id);
    if (it == slot.end())
      throw runtime_failure("adapter [" + who + "] replied with unknown id: " + *line);
    if (outstanding.erase(id) == 0)
      throw runtime_failure("adapter [" + who + "] replied twice for id: " + id);
    results[it->second] = {id, extract_score(reply, *line, who)};
    ++done;
    pump();
  }
  return results;
}

}  // namespace stresslab

#include "propsel/engine.hpp"

#include <chrono>

namespace propsel {

namespace {

constexpr const char* kFormatReminder =
    "Reminder: reply with the line \"Best Proposal: #X\" (X = candidate number), a short "
    "justification, then the golden proposal under the headings \"## Problem\", "
    "\"## Root Cause\", and \"## Solution\".";

}  // namespace

Decision decide(const ManagerInstance& instance, Backend& backend,
                const ManagerRunConfig& config) {
  validate_instance(instance);
  const PromptText prompt = render_manager_prompt(instance);
  const std::string model = config.model.empty() ? backend.default_model() : config.model;

  Decision decision;
  decision.instance_id = instance.issue.id;
  decision.model = model;

  ChatRequest request = single_user_request(model, prompt.text, config.temperature,
                                            config.max_tokens);
  const auto started = std::chrono::steady_clock::now();
  std::string last_error = "BackendFailure";
  const int max_attempts = 1 + std::max(config.max_parse_retries, 0);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    decision.attempts = attempt;
    std::string content;
    try {
      content = backend.complete(request).content;
    } catch (const BackendError& e) {
      last_error = "BackendFailure";
      (void)e;
      break;
    }
    const ManagerParse parse = parse_manager_output(content, prompt.n_candidates);
    if (parse.ok()) {
      decision.output = parse.to_output();
      break;
    }
    last_error = to_string(parse.status);
    request.messages.push_back({"assistant", content});
    request.messages.push_back({"user", kFormatReminder});
  }
  decision.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
  if (!decision.output) decision.error = last_error;
  return decision;
}

std::vector<Decision> decide_batch(const std::vector<ManagerInstance>& instances,
                                   const BackendPtr& backend, const ManagerRunConfig& config,
                                   int parallelism) {
  std::vector<Decision> decisions(instances.size());
  parallel_for(instances.size(), parallelism, [&](std::size_t i) {
    try {
      decisions[i] = decide(instances[i], *backend, config);
    } catch (const std::exception& e) {
      Decision failed;
      failed.instance_id = instances[i].issue.id;
      failed.error = "BackendFailure";
      failed.model = config.model.empty() ? backend->default_model() : config.model;
      (void)e;
      decisions[i] = failed;
    }
  });
  return decisions;
}

json decision_to_json(const Decision& decision, bool include_timing) {
  json record;
  record["instance_id"] = decision.instance_id;
  if (decision.output) {
    record["selected_id"] = decision.output->selected_id;
    record["justification"] = decision.output->justification;
    record["golden"] = golden_to_json(decision.output->golden);
    record["raw_text"] = decision.output->raw_text;
  } else {
    record["error"] = decision.error.value_or("BackendFailure");
    record["raw_text"] = "";
  }
  record["latency_ms"] = include_timing ? decision.latency_ms : 0;
  record["attempts"] = decision.attempts;
  record["model"] = decision.model;
  return record;
}

Decision decision_from_json(const json& record) {
  Decision decision;
  decision.instance_id = record.at("instance_id").get<std::string>();
  decision.latency_ms = record.value("latency_ms", 0LL);
  decision.attempts = record.value("attempts", 1);
  decision.model = record.value("model", "");
  if (record.contains("error") && !record["error"].is_null()) {
    decision.error = record["error"].get<std::string>();
    return decision;
  }
  ManagerOutput output;
  output.selected_id = record.at("selected_id").get<int>();
  output.justification = record.value("justification", "");
  output.golden = golden_from_json(record.at("golden"));
  output.raw_text = record.value("raw_text", "");
  decision.output = std::move(output);
  return decision;
}

void write_decision_log(const std::filesystem::path& path, const std::vector<Decision>& decisions,
                        bool include_timing) {
  std::vector<json> records;
  records.reserve(decisions.size());
  for (const Decision& d : decisions) records.push_back(decision_to_json(d, include_timing));
  write_jsonl(path, records);
}

std::vector<Decision> read_decision_log(const std::filesystem::path& path) {
  std::vector<Decision> decisions;
  for (const json& record : read_jsonl(path)) decisions.push_back(decision_from_json(record));
  return decisions;
}

}  // namespace propsel

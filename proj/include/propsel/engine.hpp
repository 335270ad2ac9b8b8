#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "propsel/core.hpp"
#include "propsel/llm.hpp"
#include "propsel/manager_io.hpp"

namespace propsel {

struct ManagerRunConfig {
  double temperature = 0.0;   // evaluation default; deterministic backends permitting
  int max_parse_retries = 2;
  int max_tokens = 4096;
  std::string model;          // empty -> backend's default model
};

/// Per-instance run record. Exactly one of output/error is set.
struct Decision {
  std::string instance_id;
  std::optional<ManagerOutput> output;
  std::optional<std::string> error;  // MissingSelection | SelectionOutOfRange |
                                     // MissingGolden | BackendFailure
  std::int64_t latency_ms = 0;
  int attempts = 1;
  std::string model;

  bool ok() const { return output.has_value(); }
};

/// Renders the review prompt as a single user message, completes it, and
/// parses the response. On a parse failure the completion is retried up to
/// config.max_parse_retries times, each retry appending the failed response
/// and a one-line reminder of the required format to the conversation.
/// Backend failures are not retried here; the HTTP client already retries
/// transient faults internally.
Decision decide(const ManagerInstance& instance, Backend& backend,
                const ManagerRunConfig& config);

/// Fans out decide() over up to `parallelism` workers. Results are ordered by
/// input index and per-instance failures never abort the batch.
std::vector<Decision> decide_batch(const std::vector<ManagerInstance>& instances,
                                   const BackendPtr& backend, const ManagerRunConfig& config,
                                   int parallelism);

// Decision log JSONL:
//   {"instance_id": str, "selected_id": int?, "justification": str?,
//    "golden": {...}?, "error": str?, "raw_text": str, "latency_ms": int,
//    "attempts": int, "model": str}
// With include_timing=false, latency_ms is written as 0 so logs from reruns
// compare byte-identical.
json decision_to_json(const Decision& decision, bool include_timing = true);
Decision decision_from_json(const json& record);
void write_decision_log(const std::filesystem::path& path, const std::vector<Decision>& decisions,
                        bool include_timing = true);
std::vector<Decision> read_decision_log(const std::filesystem::path& path);

}  // namespace propsel

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "propsel/agents.hpp"
#include "propsel/bench.hpp"
#include "propsel/core.hpp"
#include "propsel/engine.hpp"
#include "propsel/llm.hpp"

namespace propsel {

/// Three-role pipeline configuration: k proposal drafters (k >= 2, the review
/// grammar needs at least two candidates), one review/synthesis backend, one
/// implementation backend.
struct P2AConfig {
  std::vector<BackendPtr> proposal_backends;
  BackendPtr manager_backend;
  BackendPtr implementation_backend;
  AgentLimits agent_limits;
  ManagerRunConfig manager_config;
  double proposal_temperature = 0.0;
  double implementation_temperature = 0.0;
  /// Pool order is backend configuration order by default; set a seed to
  /// shuffle the pool (per instance, derived from this seed and the issue id)
  /// before review.
  std::optional<std::uint64_t> pool_shuffle_seed;
};

enum class P2AStatus { patched, pool_failed, manager_failed, impl_failed };
const char* to_string(P2AStatus status);

struct P2ATranscripts {
  std::vector<AgentTranscript> proposals;
  std::optional<AgentTranscript> implementation;
};

struct P2AResult {
  std::string instance_id;
  std::vector<Proposal> pool;
  std::optional<Decision> decision;
  std::optional<PatchArtifact> patch;  // present iff status == patched
  P2ATranscripts transcripts;
  P2AStatus status = P2AStatus::pool_failed;
  std::optional<std::string> failure;  // stage error detail, when not patched
};

/// Drafts a proposal pool, reviews it into a golden proposal, and implements
/// that golden proposal (never the raw selected candidate: a freshly drafted
/// pool can contain no correct candidate, and the synthesized plan is the
/// channel that survives that case). Stages short-circuit: nothing downstream
/// runs after a failed stage. Stage errors land in `status`, never throw.
P2AResult run_p2a(const IssueRecord& issue, const std::filesystem::path& workspace_dir,
                  const P2AConfig& config);

/// Order-stable batch over per-instance workspaces.
std::vector<P2AResult> run_p2a_batch(const std::vector<IssueRecord>& issues,
                                     const std::vector<std::filesystem::path>& workspaces,
                                     const P2AConfig& config, int parallelism);

/// Verdict skeletons for a downstream verifier: passed is null until filled.
std::vector<json> verdict_skeletons(const std::vector<IssueRecord>& issues);

/// Writes out_dir/results.jsonl, verdicts_skeleton.jsonl, diffs/<id>.diff and
/// transcripts/<id>/*.jsonl. Paths inside results.jsonl are relative to
/// out_dir, and no timing data is recorded, so identical runs produce
/// byte-identical output trees.
void write_p2a_outputs(const std::vector<P2AResult>& results,
                       const std::vector<IssueRecord>& issues,
                       const std::filesystem::path& out_dir);

json p2a_result_to_json(const P2AResult& result);

}  // namespace propsel

#include "propsel/p2a.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace propsel {

const char* to_string(P2AStatus status) {
  switch (status) {
    case P2AStatus::patched: return "patched";
    case P2AStatus::pool_failed: return "pool_failed";
    case P2AStatus::manager_failed: return "manager_failed";
    case P2AStatus::impl_failed: return "impl_failed";
  }
  return "unknown";
}

namespace {

void validate_config(const P2AConfig& config) {
  if (config.proposal_backends.size() < 2) {
    throw std::invalid_argument("P2A needs at least 2 proposal backends");
  }
  if (!config.manager_backend || !config.implementation_backend) {
    throw std::invalid_argument("P2A needs manager and implementation backends");
  }
  for (const BackendPtr& backend : config.proposal_backends) {
    if (!backend) throw std::invalid_argument("null proposal backend");
  }
}

}  // namespace

P2AResult run_p2a(const IssueRecord& issue, const std::filesystem::path& workspace_dir,
                  const P2AConfig& config) {
  validate_config(config);
  P2AResult result;
  result.instance_id = issue.id;

  PoolResult pool = build_proposal_pool(issue, workspace_dir, config.proposal_backends,
                                        config.agent_limits, config.proposal_temperature);
  result.pool = pool.proposals;
  if (config.pool_shuffle_seed) {
    std::mt19937_64 rng(*config.pool_shuffle_seed ^ fnv1a64(issue.id));
    std::shuffle(result.pool.begin(), result.pool.end(), rng);
    for (std::size_t i = 0; i < result.pool.size(); ++i) {
      result.pool[i].proposal_id = static_cast<int>(i) + 1;
    }
  }
  result.transcripts.proposals = std::move(pool.transcripts);
  if (result.pool.size() < 2) {
    result.status = P2AStatus::pool_failed;
    std::ostringstream detail;
    detail << result.pool.size() << " proposal(s) survived";
    for (const std::string& error : pool.errors) detail << "; " << error;
    result.failure = detail.str();
    return result;
  }

  // The pool becomes a synthetic review instance. There is no ground truth to
  // validate a selection against; the id is still logged for overlap analyses.
  ManagerInstance synthetic;
  synthetic.issue = issue;
  synthetic.proposals = result.pool;
  synthetic.ground_truth_id = std::nullopt;

  result.decision =
      decide(synthetic, *config.manager_backend, config.manager_config);
  if (!result.decision->ok()) {
    result.status = P2AStatus::manager_failed;
    result.failure = result.decision->error;
    return result;
  }

  ImplementationAgentResult impl = run_implementation_agent(
      issue, result.decision->output->golden, workspace_dir, *config.implementation_backend,
      config.agent_limits, config.implementation_temperature);
  result.transcripts.implementation = std::move(impl.transcript);
  if (!impl.patch) {
    result.status = P2AStatus::impl_failed;
    result.failure = impl.error;
    return result;
  }
  result.patch = std::move(impl.patch);
  result.status = P2AStatus::patched;
  return result;
}

std::vector<P2AResult> run_p2a_batch(const std::vector<IssueRecord>& issues,
                                     const std::vector<std::filesystem::path>& workspaces,
                                     const P2AConfig& config, int parallelism) {
  validate_config(config);
  if (issues.size() != workspaces.size()) {
    throw std::invalid_argument("one workspace per issue required: " +
                                std::to_string(issues.size()) + " issues, " +
                                std::to_string(workspaces.size()) + " workspaces");
  }
  std::vector<P2AResult> results(issues.size());
  parallel_for(issues.size(), parallelism, [&](std::size_t i) {
    try {
      results[i] = run_p2a(issues[i], workspaces[i], config);
    } catch (const std::exception& e) {
      P2AResult failed;
      failed.instance_id = issues[i].id;
      failed.status = P2AStatus::pool_failed;
      failed.failure = std::string("crash isolated: ") + e.what();
      results[i] = failed;
    }
  });
  return results;
}

std::vector<json> verdict_skeletons(const std::vector<IssueRecord>& issues) {
  std::vector<json> records;
  records.reserve(issues.size());
  for (const IssueRecord& issue : issues) {
    records.push_back(json{{"instance_id", issue.id},
                           {"passed", nullptr},
                           {"price_usd", issue.price.usd}});
  }
  return records;
}

json p2a_result_to_json(const P2AResult& result) {
  json record;
  record["instance_id"] = result.instance_id;
  record["status"] = to_string(result.status);
  json pool = json::array();
  for (const Proposal& p : result.pool) {
    pool.push_back(json{{"proposal_id", p.proposal_id}, {"raw_text", p.raw_text}});
  }
  record["pool"] = std::move(pool);
  if (result.decision) {
    json decision;
    decision["attempts"] = result.decision->attempts;
    decision["model"] = result.decision->model;
    if (result.decision->ok()) {
      decision["selected_id"] = result.decision->output->selected_id;
      decision["justification"] = result.decision->output->justification;
      decision["golden"] = golden_to_json(result.decision->output->golden);
    } else {
      decision["error"] = *result.decision->error;
    }
    record["decision"] = std::move(decision);
  }
  if (result.failure) record["failure"] = *result.failure;
  if (result.patch) record["files_touched"] = result.patch->files_touched;
  return record;
}

void write_p2a_outputs(const std::vector<P2AResult>& results,
                       const std::vector<IssueRecord>& issues,
                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<json> records;
  records.reserve(results.size());
  for (const P2AResult& result : results) {
    json record = p2a_result_to_json(result);
    json transcript_paths = json::array();
    for (std::size_t k = 0; k < result.transcripts.proposals.size(); ++k) {
      const std::string rel =
          "transcripts/" + result.instance_id + "/proposal_" + std::to_string(k + 1) + ".jsonl";
      write_transcript(out_dir / rel, result.transcripts.proposals[k]);
      transcript_paths.push_back(rel);
    }
    if (result.transcripts.implementation) {
      const std::string rel = "transcripts/" + result.instance_id + "/implementation.jsonl";
      write_transcript(out_dir / rel, *result.transcripts.implementation);
      transcript_paths.push_back(rel);
    }
    record["transcript_paths"] = std::move(transcript_paths);
    if (result.patch) {
      const std::string rel = "diffs/" + result.instance_id + ".diff";
      write_text_file(out_dir / rel, result.patch->diff_text);
      record["diff_path"] = rel;
    }
    records.push_back(std::move(record));
  }
  write_jsonl(out_dir / "results.jsonl", records);
  write_jsonl(out_dir / "verdicts_skeleton.jsonl", verdict_skeletons(issues));
}

}  // namespace propsel

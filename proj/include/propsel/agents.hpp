#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "propsel/core.hpp"
#include "propsel/llm.hpp"

namespace propsel {

struct AgentLimits {
  int max_steps = 50;
  double command_timeout_s = 60.0;
  std::size_t max_observation_chars = 10000;
};

/// Exit code reported for a command killed at the timeout.
inline constexpr int kTimeoutExitCode = 124;

/// Marker appended to a stream cut at max_observation_chars.
inline constexpr const char* kTruncationMarker = "…[truncated]";

class AgentError : public std::runtime_error {
 public:
  explicit AgentError(const std::string& detail) : std::runtime_error(detail) {}
};

struct ExecResult {
  std::string stdout_text;
  std::string stderr_text;
  int exit_code = 0;
  bool truncated = false;
  bool timed_out = false;
};

/// Runs `command` through /bin/sh -c with the workspace as working directory.
/// The process group is killed after command_timeout_s (a TimeoutKilled turn
/// with exit code kTimeoutExitCode, not an exception); each captured stream is
/// cut to max_observation_chars with a visible truncation marker. Throws
/// AgentError if the workspace does not exist.
ExecResult execute_command(const std::string& command, const std::filesystem::path& workspace_dir,
                           const AgentLimits& limits);

struct Turn {
  std::string command;  // "" for a protocol-violation turn, "FINAL_ANSWER" for submission
  std::string stdout_text;
  std::string stderr_text;
  int exit_code = 0;
  bool truncated = false;
};

enum class TerminalStatus { submitted, step_limit, aborted };
const char* to_string(TerminalStatus status);

struct AgentTranscript {
  std::vector<Turn> turns;  // never longer than max_steps
  TerminalStatus terminal_status = TerminalStatus::aborted;
};

json turn_to_json(const Turn& turn, int step);
void write_transcript(const std::filesystem::path& path, const AgentTranscript& transcript);

/// Loop protocol helpers; exposed so tests and operators can reconstruct the
/// exact conversations an episode produces.
std::string proposal_system_prompt(const IssueRecord& issue);
std::string implementation_system_prompt(const IssueRecord& issue, const GoldenProposal& golden);
std::string format_observation(const ExecResult& result);
inline constexpr const char* kInitialUserMessage = "Begin.";
inline constexpr const char* kSentinelLine = "FINAL_ANSWER";
inline constexpr const char* kNoCommandReminder =
    "No command found. Reply with exactly one shell command in a fenced code block, or finish "
    "with a line containing only FINAL_ANSWER.";

/// First fenced code block of a response (``` ... ```), language tag ignored.
std::optional<std::string> extract_command(std::string_view response);
/// Text after the first line that equals the sentinel, if any.
std::optional<std::string> extract_final_answer(std::string_view response);

struct ProposalAgentResult {
  std::optional<Proposal> proposal;  // proposal_id is 0 until pool assembly assigns it
  AgentTranscript transcript;
  std::optional<std::string> error;  // StepLimitNoAnswer | MalformedProposal | BackendFailure
};

/// Shell-agent episode that investigates the workspace and submits a proposal
/// in the ## Problem / ## Root Cause / ## Solution format after the sentinel.
ProposalAgentResult run_proposal_agent(const IssueRecord& issue,
                                       const std::filesystem::path& workspace_dir,
                                       Backend& backend, const AgentLimits& limits,
                                       double temperature = 0.0, int max_tokens = 4096);

struct PatchArtifact {
  std::string diff_text;                   // unified diff
  std::vector<std::string> files_touched;  // sorted path set from the diff headers
};

/// Paths named by "diff --git" / "---" / "+++" headers, a/ and b/ prefixes
/// stripped, /dev/null ignored.
std::vector<std::string> diff_files(std::string_view diff_text);

struct ImplementationAgentResult {
  std::optional<PatchArtifact> patch;
  AgentTranscript transcript;
  std::optional<std::string> error;  // StepLimitNoAnswer | EmptyPatch | BackendFailure
};

/// Same loop protocol, with the golden proposal embedded verbatim in the
/// system prompt. The patch is the workspace's git diff against a snapshot
/// taken at episode start, never text printed by the model.
ImplementationAgentResult run_implementation_agent(const IssueRecord& issue,
                                                   const GoldenProposal& golden,
                                                   const std::filesystem::path& workspace_dir,
                                                   Backend& backend, const AgentLimits& limits,
                                                   double temperature = 0.0,
                                                   int max_tokens = 4096);

struct PoolResult {
  std::vector<Proposal> proposals;  // ids reassigned 1..k in backend order
  std::vector<AgentTranscript> transcripts;
  std::vector<std::string> errors;  // one entry per failed backend, "<name>: <error>"
};

/// Runs one proposal agent per backend, each in a fresh copy of the workspace
/// so episodes stay independent. Failed runs are dropped with a warning on
/// stderr; the caller decides what a too-small pool means.
PoolResult build_proposal_pool(const IssueRecord& issue,
                               const std::filesystem::path& workspace_dir,
                               const std::vector<BackendPtr>& backends, const AgentLimits& limits,
                               double temperature = 0.0);

}  // namespace propsel

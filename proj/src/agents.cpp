#include "propsel/agents.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iostream>
#include <set>
#include <sstream>

#include "propsel/manager_io.hpp"

namespace propsel {

namespace {

// Reads from fd into out, keeping at most `cap` chars and counting the rest.
struct CappedStream {
  std::string data;
  std::size_t total_seen = 0;
  std::size_t cap;

  explicit CappedStream(std::size_t cap_chars) : cap(cap_chars) {}

  void feed(const char* buf, std::size_t n) {
    total_seen += n;
    if (data.size() < cap) {
      data.append(buf, std::min(n, cap - data.size()));
    }
  }

  bool truncated() const { return total_seen > cap; }

  std::string finish() const {
    if (!truncated()) return data;
    return data + kTruncationMarker;
  }
};

}  // namespace

ExecResult execute_command(const std::string& command, const std::filesystem::path& workspace_dir,
                           const AgentLimits& limits) {
  std::error_code ec;
  if (!std::filesystem::is_directory(workspace_dir, ec)) {
    throw AgentError("WorkspaceMissing: " + workspace_dir.string());
  }

  int out_pipe[2];
  int err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
    throw AgentError("pipe() failed: " + std::string(std::strerror(errno)));
  }

  const pid_t pid = fork();
  if (pid < 0) {
    throw AgentError("fork() failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    // Child: own process group so a timeout kill reaps grandchildren too.
    setpgid(0, 0);
    if (chdir(workspace_dir.c_str()) != 0) _exit(127);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  close(out_pipe[1]);
  close(err_pipe[1]);

  CappedStream out_stream(limits.max_observation_chars);
  CappedStream err_stream(limits.max_observation_chars);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(limits.command_timeout_s));

  bool timed_out = false;
  bool out_open = true;
  bool err_open = true;
  char buf[4096];
  while (out_open || err_open) {
    struct pollfd fds[2];
    nfds_t nfds = 0;
    if (out_open) fds[nfds++] = {out_pipe[0], POLLIN, 0};
    if (err_open) fds[nfds++] = {err_pipe[0], POLLIN, 0};

    int wait_ms = -1;
    if (!timed_out) {
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      wait_ms = static_cast<int>(std::max<long long>(remaining.count(), 0));
    }
    const int ready = poll(fds, nfds, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) {
      // Deadline hit: kill the whole process group, then drain to EOF.
      timed_out = true;
      kill(-pid, SIGKILL);
      continue;
    }
    for (nfds_t i = 0; i < nfds; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP))) continue;
      const bool is_out = fds[i].fd == out_pipe[0];
      const ssize_t n = read(fds[i].fd, buf, sizeof(buf));
      if (n > 0) {
        (is_out ? out_stream : err_stream).feed(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EINTR)) {
        close(fds[i].fd);
        (is_out ? out_open : err_open) = false;
      }
    }
  }
  if (out_open) close(out_pipe[0]);
  if (err_open) close(err_pipe[0]);

  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }

  ExecResult result;
  result.stdout_text = out_stream.finish();
  result.stderr_text = err_stream.finish();
  result.truncated = out_stream.truncated() || err_stream.truncated();
  result.timed_out = timed_out;
  if (timed_out) {
    result.exit_code = kTimeoutExitCode;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  } else {
    result.exit_code = -1;
  }
  return result;
}

const char* to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::submitted: return "submitted";
    case TerminalStatus::step_limit: return "step_limit";
    case TerminalStatus::aborted: return "aborted";
  }
  return "unknown";
}

json turn_to_json(const Turn& turn, int step) {
  return json{{"step", step},
              {"command", turn.command},
              {"exit_code", turn.exit_code},
              {"stdout", turn.stdout_text},
              {"stderr", turn.stderr_text},
              {"truncated", turn.truncated}};
}

void write_transcript(const std::filesystem::path& path, const AgentTranscript& transcript) {
  std::vector<json> records;
  records.reserve(transcript.turns.size());
  for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
    records.push_back(turn_to_json(transcript.turns[i], static_cast<int>(i + 1)));
  }
  write_jsonl(path, records);
}

// ---------------------------------------------------------------------------
// Loop protocol

namespace {

std::string issue_block(const IssueRecord& issue) {
  std::ostringstream out;
  out << "[ISSUE]\n";
  if (!issue.title.empty()) out << issue.title << "\n\n";
  out << issue.body << "\n[/ISSUE]\n";
  return out.str();
}

constexpr const char* kLoopProtocol =
    "Protocol:\n"
    "- Reply with exactly one shell command per turn, inside a fenced code block "
    "(``` ... ```). The command runs with the repository checkout as the working directory "
    "and you receive its output.\n";

}  // namespace

std::string proposal_system_prompt(const IssueRecord& issue) {
  std::ostringstream out;
  out << "You are a software engineer drafting a fix proposal for the GitHub issue below. "
         "You work in a shell inside a checkout of the repository.\n";
  out << issue_block(issue);
  out << kLoopProtocol;
  out << "- Investigate as needed. When ready, finish with a line containing only "
      << kSentinelLine << " followed by your proposal in exactly this format:\n"
      << "## Problem\n...\n## Root Cause\n...\n## Solution\n...\n";
  return out.str();
}

std::string implementation_system_prompt(const IssueRecord& issue, const GoldenProposal& golden) {
  std::ostringstream out;
  out << "You are a software engineer implementing an approved fix plan for the GitHub issue "
         "below. You work in a shell inside a checkout of the repository.\n";
  out << issue_block(issue);
  out << "The approved golden proposal to implement:\n"
      << "## Problem\n"
      << golden.problem << "\n"
      << "## Root Cause\n"
      << golden.root_cause << "\n"
      << "## Solution\n"
      << golden.solution << "\n";
  out << kLoopProtocol;
  out << "- Edit files with shell commands. When the fix is complete, finish with a line "
         "containing only "
      << kSentinelLine
      << ". The patch is taken from the working tree; do not print a diff.\n";
  return out.str();
}

std::string format_observation(const ExecResult& result) {
  std::ostringstream out;
  out << "Command exited with code " << result.exit_code
      << (result.timed_out ? " (killed at timeout)" : "") << ".\n";
  out << "stdout:\n" << result.stdout_text << "\n";
  out << "stderr:\n" << result.stderr_text << "\n";
  return out.str();
}

std::optional<std::string> extract_command(std::string_view response) {
  const std::size_t open = response.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t content = open + 3;
  // Skip an optional language tag on the fence line.
  const std::size_t line_end = response.find('\n', content);
  const std::size_t close = response.find("```", content);
  if (close == std::string_view::npos) return std::nullopt;
  if (line_end != std::string_view::npos && line_end < close) {
    static const std::set<std::string> kShellTags = {"bash", "sh",      "shell",
                                                     "zsh",  "console", "terminal"};
    const std::string tag = to_lower(trim(response.substr(content, line_end - content)));
    if (tag.empty() || kShellTags.count(tag)) content = line_end + 1;
  }
  if (close < content) return std::nullopt;
  const std::string command = trim(response.substr(content, close - content));
  if (command.empty()) return std::nullopt;
  return command;
}

std::optional<std::string> extract_final_answer(std::string_view response) {
  std::size_t pos = 0;
  while (pos <= response.size()) {
    std::size_t end = response.find('\n', pos);
    if (end == std::string_view::npos) end = response.size();
    if (trim(response.substr(pos, end - pos)) == kSentinelLine) {
      return std::string(end < response.size() ? response.substr(end + 1) : "");
    }
    if (end == response.size()) break;
    pos = end + 1;
  }
  return std::nullopt;
}

namespace {

struct LoopOutcome {
  AgentTranscript transcript;
  std::string final_text;
};

LoopOutcome run_agent_loop(const std::string& system_prompt, Backend& backend,
                           const std::filesystem::path& workspace_dir, const AgentLimits& limits,
                           double temperature, int max_tokens) {
  LoopOutcome outcome;
  ChatRequest request;
  request.model = backend.default_model();
  request.temperature = temperature;
  request.max_tokens = max_tokens;
  request.messages.push_back({"system", system_prompt});
  request.messages.push_back({"user", kInitialUserMessage});

  for (int step = 0; step < limits.max_steps; ++step) {
    std::string response;
    try {
      response = backend.complete(request).content;
    } catch (const BackendError&) {
      outcome.transcript.terminal_status = TerminalStatus::aborted;
      return outcome;
    }
    if (const auto answer = extract_final_answer(response)) {
      outcome.transcript.turns.push_back(Turn{kSentinelLine, "", "", 0, false});
      outcome.transcript.terminal_status = TerminalStatus::submitted;
      outcome.final_text = *answer;
      return outcome;
    }
    request.messages.push_back({"assistant", response});
    if (const auto command = extract_command(response)) {
      const ExecResult exec = execute_command(*command, workspace_dir, limits);
      outcome.transcript.turns.push_back(
          Turn{*command, exec.stdout_text, exec.stderr_text, exec.exit_code, exec.truncated});
      request.messages.push_back({"user", format_observation(exec)});
    } else {
      outcome.transcript.turns.push_back(Turn{"", "", kNoCommandReminder, 1, false});
      request.messages.push_back({"user", kNoCommandReminder});
    }
  }
  outcome.transcript.terminal_status = TerminalStatus::step_limit;
  return outcome;
}

}  // namespace

ProposalAgentResult run_proposal_agent(const IssueRecord& issue,
                                       const std::filesystem::path& workspace_dir,
                                       Backend& backend, const AgentLimits& limits,
                                       double temperature, int max_tokens) {
  ProposalAgentResult result;
  LoopOutcome outcome = run_agent_loop(proposal_system_prompt(issue), backend, workspace_dir,
                                       limits, temperature, max_tokens);
  result.transcript = std::move(outcome.transcript);
  switch (result.transcript.terminal_status) {
    case TerminalStatus::aborted:
      result.error = "BackendFailure";
      return result;
    case TerminalStatus::step_limit:
      result.error = "StepLimitNoAnswer";
      return result;
    case TerminalStatus::submitted:
      break;
  }
  const GoldenParse sections = parse_golden_sections(outcome.final_text);
  if (!sections.ok()) {
    result.error = "MalformedProposal";
    return result;
  }
  Proposal proposal;
  proposal.proposal_id = 0;
  proposal.raw_text = trim(outcome.final_text);
  proposal.problem = sections.golden->problem;
  proposal.root_cause = sections.golden->root_cause;
  proposal.solution = sections.golden->solution;
  result.proposal = std::move(proposal);
  return result;
}

// ---------------------------------------------------------------------------
// Patch extraction

namespace {

// Limits generous enough that git plumbing output is never cut.
AgentLimits git_limits() {
  AgentLimits limits;
  limits.command_timeout_s = 120.0;
  limits.max_observation_chars = 64ull * 1024 * 1024;
  return limits;
}

ExecResult run_git(const std::filesystem::path& workspace, const std::string& args) {
  return execute_command("git -c user.name=agent -c user.email=agent@localhost " + args,
                         workspace, git_limits());
}

// The workspace must be its own repository root; otherwise git would walk up
// and stage the episode's edits into an enclosing repository.
bool workspace_is_repo_root(const std::filesystem::path& workspace) {
  const ExecResult top = run_git(workspace, "rev-parse --show-toplevel");
  if (top.exit_code != 0) return false;
  std::error_code ec;
  const auto canonical_ws = std::filesystem::weakly_canonical(workspace, ec);
  return !ec && canonical_ws == std::filesystem::path(trim(top.stdout_text));
}

std::string git_snapshot(const std::filesystem::path& workspace) {
  if (!workspace_is_repo_root(workspace)) {
    if (run_git(workspace, "init -q").exit_code != 0) {
      throw AgentError("git init failed in " + workspace.string());
    }
  }
  run_git(workspace, "add -A .");
  run_git(workspace, "commit -q --allow-empty -m \"episode baseline\"");
  const ExecResult head = run_git(workspace, "rev-parse HEAD");
  if (head.exit_code != 0) {
    throw AgentError("cannot snapshot workspace state: " + head.stderr_text);
  }
  return trim(head.stdout_text);
}

std::string git_diff_since(const std::filesystem::path& workspace, const std::string& baseline) {
  run_git(workspace, "add -A .");
  const ExecResult diff = run_git(workspace, "diff --cached " + baseline);
  if (diff.exit_code != 0) {
    throw AgentError("git diff failed: " + diff.stderr_text);
  }
  return diff.stdout_text;
}

}  // namespace

std::vector<std::string> diff_files(std::string_view diff_text) {
  std::set<std::string> files;
  std::size_t pos = 0;
  while (pos <= diff_text.size()) {
    std::size_t end = diff_text.find('\n', pos);
    if (end == std::string_view::npos) end = diff_text.size();
    const std::string_view line = diff_text.substr(pos, end - pos);
    auto add_path = [&files](std::string_view path) {
      if (path == "/dev/null" || path.empty()) return;
      if (path.size() > 2 && (path.substr(0, 2) == "a/" || path.substr(0, 2) == "b/")) {
        path.remove_prefix(2);
      }
      files.insert(std::string(path));
    };
    if (line.rfind("diff --git ", 0) == 0) {
      std::string_view rest = line.substr(11);
      const std::size_t space = rest.find(' ');
      if (space != std::string_view::npos) {
        add_path(rest.substr(0, space));
        add_path(rest.substr(space + 1));
      }
    } else if (line.rfind("--- ", 0) == 0 || line.rfind("+++ ", 0) == 0) {
      add_path(trim(line.substr(4)));
    }
    if (end == diff_text.size()) break;
    pos = end + 1;
  }
  return std::vector<std::string>(files.begin(), files.end());
}

ImplementationAgentResult run_implementation_agent(const IssueRecord& issue,
                                                   const GoldenProposal& golden,
                                                   const std::filesystem::path& workspace_dir,
                                                   Backend& backend, const AgentLimits& limits,
                                                   double temperature, int max_tokens) {
  ImplementationAgentResult result;
  std::error_code ec;
  if (!std::filesystem::is_directory(workspace_dir, ec)) {
    throw AgentError("WorkspaceMissing: " + workspace_dir.string());
  }
  const std::string baseline = git_snapshot(workspace_dir);
  LoopOutcome outcome = run_agent_loop(implementation_system_prompt(issue, golden), backend,
                                       workspace_dir, limits, temperature, max_tokens);
  result.transcript = std::move(outcome.transcript);
  switch (result.transcript.terminal_status) {
    case TerminalStatus::aborted:
      result.error = "BackendFailure";
      return result;
    case TerminalStatus::step_limit:
      result.error = "StepLimitNoAnswer";
      return result;
    case TerminalStatus::submitted:
      break;
  }
  PatchArtifact patch;
  patch.diff_text = git_diff_since(workspace_dir, baseline);
  if (trim(patch.diff_text).empty()) {
    result.error = "EmptyPatch";
    return result;
  }
  patch.files_touched = diff_files(patch.diff_text);
  result.patch = std::move(patch);
  return result;
}

PoolResult build_proposal_pool(const IssueRecord& issue,
                               const std::filesystem::path& workspace_dir,
                               const std::vector<BackendPtr>& backends, const AgentLimits& limits,
                               double temperature) {
  if (backends.empty()) throw std::invalid_argument("build_proposal_pool: no backends");
  std::error_code ec;
  if (!std::filesystem::is_directory(workspace_dir, ec)) {
    throw AgentError("WorkspaceMissing: " + workspace_dir.string());
  }
  PoolResult result;
  for (std::size_t k = 0; k < backends.size(); ++k) {
    const std::filesystem::path copy =
        workspace_dir.parent_path() /
        (workspace_dir.filename().string() + ".prop" + std::to_string(k + 1));
    std::filesystem::remove_all(copy);
    std::filesystem::copy(workspace_dir, copy,
                          std::filesystem::copy_options::recursive |
                              std::filesystem::copy_options::copy_symlinks);
    ProposalAgentResult run =
        run_proposal_agent(issue, copy, *backends[k], limits, temperature);
    std::filesystem::remove_all(copy);
    result.transcripts.push_back(std::move(run.transcript));
    if (run.proposal) {
      Proposal proposal = std::move(*run.proposal);
      proposal.proposal_id = static_cast<int>(result.proposals.size()) + 1;
      result.proposals.push_back(std::move(proposal));
    } else {
      const std::string warning =
          backends[k]->name() + ": " + run.error.value_or("unknown failure");
      result.errors.push_back(warning);
      std::cerr << "[warn] proposal agent dropped for issue '" << issue.id << "': " << warning
                << "\n";
    }
  }
  return result;
}

}  // namespace propsel

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "propsel/core.hpp"
#include "propsel/engine.hpp"
#include "propsel/llm.hpp"
#include "propsel/reward.hpp"

namespace propsel {

enum class CurateErrorCode {
  invalid_margin,
  invalid_confidence,
  empty_dataset,
  teacher_format_failure,
  teacher_disagreement,
  unknown_criterion,
};

const char* to_string(CurateErrorCode code);

class CurateError : public std::runtime_error {
 public:
  CurateError(CurateErrorCode code, const std::string& detail);
  CurateErrorCode code() const { return code_; }

 private:
  CurateErrorCode code_;
};

/// Finite-population sample size: n = ceil(X*N / (X + N - 1)) with
/// X = z^2 * p(1-p) / e^2, p = 0.5 and z in {1.645, 1.960, 2.576} for 90/95/99%
/// confidence. Margin e must lie in (0,1).
int required_sample_size(long long population, double margin, double confidence);

/// Identity keys under which a training instance counts as a benchmark leak.
struct LeakageKeys {
  std::set<std::string> ids;
  std::set<std::pair<std::string, int>> repo_issues;

  static LeakageKeys from_instances(const std::vector<ManagerInstance>& instances);
  static LeakageKeys from_issues(const std::vector<IssueRecord>& issues);
  void merge(const LeakageKeys& other);
};

struct LeakageReport {
  std::vector<std::string> removed_ids;
  std::size_t n_kept = 0;
};

/// Removes every training instance whose id or (repo, issue_number) appears in
/// the benchmark keys. Idempotent.
std::pair<std::vector<ManagerInstance>, LeakageReport> filter_leakage(
    const std::vector<ManagerInstance>& train, const LeakageKeys& benchmark_keys);

json leakage_report_to_json(const LeakageReport& report);

// ---------------------------------------------------------------------------
// Teacher annotation: decision-consistent supervision targets.

struct AnnotatedInstance {
  ManagerInstance instance;
  ReferenceAnnotation reference;
  std::string teacher_model;
};

/// Prompts the teacher with the issue, all proposals, and the ground-truth id,
/// requesting the standard parseable output. Responses that fail to parse, or
/// that carry an empty think/justification, retry as TeacherFormatFailure;
/// well-formed responses selecting a different id retry as TeacherDisagreement.
/// Retries follow the engine policy (corrective reminder appended, up to
/// config.max_parse_retries extra completions).
AnnotatedInstance build_sft_target(const ManagerInstance& instance, Backend& teacher,
                                   const ManagerRunConfig& config);

std::vector<AnnotatedInstance> build_sft_targets(const std::vector<ManagerInstance>& instances,
                                                 const BackendPtr& teacher,
                                                 const ManagerRunConfig& config, int parallelism,
                                                 std::vector<std::string>* failed_ids = nullptr);

// Annotated JSONL: the instance record plus
//   "reference": {"think", "justification", "golden": {...}}, "teacher_model": str
json annotated_to_json(const AnnotatedInstance& annotated);
AnnotatedInstance annotated_from_json(const json& record);
void write_annotated(const std::filesystem::path& path,
                     const std::vector<AnnotatedInstance>& annotated);
std::vector<AnnotatedInstance> read_annotated(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Prompt-length statistics.

struct TokenLengthStats {
  double mean = 0.0;
  double median = 0.0;  // midpoint convention: mean of the two middles for even n
  double p90 = 0.0;     // nearest-rank: value at index ceil(0.9 * n)
};

using CountFn = std::function<std::size_t(const std::string&)>;

/// Length of each instance's rendered review prompt under count_fn
/// (whitespace tokens by default).
TokenLengthStats token_length_stats(const std::vector<ManagerInstance>& instances,
                                    const CountFn& count_fn = nullptr);

TokenLengthStats length_stats_from_values(std::vector<std::size_t> lengths);

// ---------------------------------------------------------------------------
// Selection-rationale taxonomy.

enum class RationaleTheme { risk_and_safety, fix_depth, maintainability, others };

enum class RationaleCriterion {
  minimal_verifiable_change,
  controlled_fix_scope,
  edge_case_robustness,
  time_critical_mitigation,
  root_cause_elimination,
  systematic_remediation,
  repo_constraint_conformance,
  future_extensibility,
  product_design_match,
  delivery_speed_tie_break,
};

RationaleTheme theme_of(RationaleCriterion criterion);
const char* to_string(RationaleTheme theme);
const char* to_string(RationaleCriterion criterion);
RationaleCriterion criterion_from_string(const std::string& name);

struct SelectionRationale {
  RationaleTheme theme;
  RationaleCriterion criterion;

  /// Throws if the criterion does not belong to the stated theme.
  static SelectionRationale make(RationaleCriterion criterion);
  static SelectionRationale make(RationaleTheme theme, RationaleCriterion criterion);
};

struct RationaleTally {
  std::map<RationaleCriterion, std::size_t> by_criterion;
  std::map<RationaleTheme, std::size_t> by_theme;
  std::size_t total = 0;
};

RationaleTally tally_rationales(const std::vector<SelectionRationale>& tags);
std::string render_tally(const RationaleTally& tally);
json tally_to_json(const RationaleTally& tally);

}  // namespace propsel

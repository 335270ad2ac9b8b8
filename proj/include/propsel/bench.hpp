#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "propsel/core.hpp"
#include "propsel/engine.hpp"

namespace propsel {

enum class BenchErrorCode {
  unknown_instance,
  duplicate_decision,
  missing_decision,
  mismatched_instance_sets,
  empty_run,
};

const char* to_string(BenchErrorCode code);

class BenchError : public std::runtime_error {
 public:
  BenchError(BenchErrorCode code, const std::string& detail);
  BenchErrorCode code() const { return code_; }

 private:
  BenchErrorCode code_;
};

struct ManagerScore {
  double match_pct = 0.0;   // 100 * n_match / n_total, exact double
  std::size_t n_match = 0;
  std::size_t n_total = 0;
  double earned_pct = 0.0;  // 100 * dollars_earned / dollars_total
  Money dollars_earned;
  Money dollars_total;
  std::size_t n_errors = 0;
};

struct ICScore {
  double pass_pct = 0.0;
  std::size_t n_pass = 0;
  std::size_t n_total = 0;
  double earned_pct = 0.0;
  Money dollars_earned;
  Money dollars_total;
};

/// One implementation-run outcome, filled in by an external verifier.
struct Verdict {
  std::string instance_id;
  bool passed = false;
  Money price;
};

struct ScoreOptions {
  /// When true, instances without a decision/verdict count as non-matches
  /// instead of raising MissingDecision. Off by default: silent partial
  /// scoring inflates the match rate.
  bool allow_partial = false;
};

/// Counts decisions whose selected id equals the instance's ground-truth id.
/// Error decisions count as non-matches and into n_errors. Earned dollars sum
/// instance prices over matches.
ManagerScore score_manager_run(const std::vector<Decision>& decisions,
                               const std::vector<ManagerInstance>& instances,
                               const ScoreOptions& options = {});

ICScore score_ic_run(const std::vector<Verdict>& verdicts,
                     const std::vector<IssueRecord>& instances,
                     const ScoreOptions& options = {});

struct BinRow {
  std::string bin_label;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
  std::optional<double> pct;  // absent when the bin is empty
};

struct BinReport {
  std::vector<BinRow> rows;
};

/// Accuracy grouped by candidate-pool size, bins {2, 3, 4, 5, 6+}.
BinReport bin_by_proposal_count(const std::vector<Decision>& decisions,
                                const std::vector<ManagerInstance>& instances,
                                const ScoreOptions& options = {});

/// Accuracy grouped by task price over half-open dollar intervals
/// [0,500), [500,1000), [1000,2000), [2000,inf).
BinReport bin_by_reward(const std::vector<Decision>& decisions,
                        const std::vector<ManagerInstance>& instances,
                        const ScoreOptions& options = {});

struct OverlapReport {
  std::size_t a_only = 0;
  std::size_t b_only = 0;
  std::size_t shared = 0;
  std::optional<double> a_only_fraction;  // |A \ B| / |A|; absent when A is empty
};

OverlapReport overlap_analysis(const std::set<std::string>& set_a,
                               const std::set<std::string>& set_b);

/// Overlap of the passed-instance sets of two runs over the same instances.
OverlapReport selector_overlap(const std::vector<Verdict>& run_a,
                               const std::vector<Verdict>& run_b);

// Report rendering. Manager match rate rounds half-up to 2 dp; manager earned
// rate truncates at 2 dp; IC rates round half-up to 1 dp; bin accuracies round
// half-up to 2 dp.
std::string render_manager_report(const ManagerScore& score);
std::string render_ic_report(const ICScore& score);
std::string render_bin_report(const BinReport& report);
std::string render_bin_report_csv(const BinReport& report);
std::string render_overlap_report(const OverlapReport& report);

json manager_score_to_json(const ManagerScore& score);
json ic_score_to_json(const ICScore& score);
json bin_report_to_json(const BinReport& report);
json overlap_to_json(const OverlapReport& report);

// Verdict JSONL: {"instance_id": str, "passed": bool, "price_usd": int}
json verdict_to_json(const Verdict& verdict);
Verdict verdict_from_json(const json& record);
std::vector<Verdict> read_verdicts(const std::filesystem::path& path);
void write_verdicts(const std::filesystem::path& path, const std::vector<Verdict>& verdicts);

}  // namespace propsel

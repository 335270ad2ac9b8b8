#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "propsel/util.hpp"

namespace propsel {

/// Whole US dollars. Task payouts and budgets are integral, so sums stay exact.
struct Money {
  long long usd = 0;

  static Money dollars(long long value);

  Money operator+(Money other) const { return Money{usd + other.usd}; }
  Money& operator+=(Money other) {
    usd += other.usd;
    return *this;
  }
  auto operator<=>(const Money&) const = default;
};

struct IssueRecord {
  std::string id;           // globally unique
  std::string repo;
  int issue_number = 0;
  std::string title;
  std::string body;         // reproduction steps, expected/actual behavior, platform
  Money price;
  json extra = json::object();  // unknown JSONL keys, preserved verbatim

  bool operator==(const IssueRecord&) const = default;
};

struct Proposal {
  int proposal_id = 0;      // 1-based index within its instance
  std::string raw_text;     // source of truth fed to prompts
  std::optional<std::string> problem;
  std::optional<std::string> root_cause;
  std::optional<std::string> solution;
  json extra = json::object();

  bool operator==(const Proposal&) const = default;
};

/// One issue plus its candidate proposals. ground_truth_id is absent for
/// instances assembled on the fly from freshly generated pools, where no
/// maintainer decision exists to check against.
struct ManagerInstance {
  IssueRecord issue;
  std::vector<Proposal> proposals;
  std::optional<int> ground_truth_id;
  json extra = json::object();

  bool operator==(const ManagerInstance&) const = default;
};

struct GoldenProposal {
  std::string problem;
  std::string root_cause;
  std::string solution;

  bool operator==(const GoldenProposal&) const = default;
};

/// Parsed model response for one manager decision.
struct ManagerOutput {
  std::string think;        // reasoning span; empty for non-reasoning backends
  int selected_id = 0;
  std::string justification;
  GoldenProposal golden;
  std::string raw_text;     // unmodified model output

  bool operator==(const ManagerOutput&) const = default;
};

enum class ValidationCode {
  too_few_proposals,
  non_contiguous_ids,
  ground_truth_out_of_range,
  empty_field,
  invalid_field,
  duplicate_key,
};

const char* to_string(ValidationCode code);

class ValidationError : public std::runtime_error {
 public:
  ValidationError(ValidationCode code, std::string instance_id, const std::string& detail);

  ValidationCode code() const { return code_; }
  const std::string& instance_id() const { return instance_id_; }

 private:
  ValidationCode code_;
  std::string instance_id_;
};

/// Returns the instance untouched iff every invariant holds; otherwise throws
/// ValidationError naming the violated invariant and the instance id.
const ManagerInstance& validate_instance(const ManagerInstance& instance);

/// Dataset-level checks on top of per-instance validation: unique ids and
/// unique (repo, issue_number) pairs.
void validate_dataset(const std::vector<ManagerInstance>& instances);

struct DatasetStats {
  std::size_t n_issues = 0;
  std::size_t n_proposals = 0;
  Money total_price;
  std::map<int, std::size_t> proposal_count_histogram;  // keyed by N

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats dataset_stats(const std::vector<ManagerInstance>& instances);

// JSONL record schema, one object per line:
//   {"id": str, "repo": str, "issue_number": int, "title": str, "body": str,
//    "price_usd": int, "proposals": [{"proposal_id": int, "raw_text": str,
//    "problem": str?, "root_cause": str?, "solution": str?}],
//    "ground_truth_id": int}
// Unknown keys round-trip through `extra`.
json instance_to_json(const ManagerInstance& instance);
ManagerInstance instance_from_json(const json& record);

std::vector<ManagerInstance> read_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path,
                     const std::vector<ManagerInstance>& instances);

// Issue-only records (the IC datasets): the same schema without proposals or
// ground_truth_id. A full instance record is accepted; its proposal fields
// ride along in `extra`.
json issue_to_json(const IssueRecord& issue);
IssueRecord issue_from_json(const json& record);
std::vector<IssueRecord> read_issues(const std::filesystem::path& path);
void write_issues(const std::filesystem::path& path, const std::vector<IssueRecord>& issues);

json golden_to_json(const GoldenProposal& golden);
GoldenProposal golden_from_json(const json& value);

}  // namespace propsel

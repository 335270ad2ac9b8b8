#include "propsel/core.hpp"

#include <set>
#include <unordered_set>

namespace propsel {

namespace {

long long require_int(const json& record, const char* key, const std::string& where) {
  if (!record.contains(key) || !record[key].is_number_integer()) {
    throw ValidationError(ValidationCode::invalid_field, where,
                          std::string("missing or non-integer field '") + key + "'");
  }
  return record[key].get<long long>();
}

std::string require_string(const json& record, const char* key, const std::string& where) {
  if (!record.contains(key) || !record[key].is_string()) {
    throw ValidationError(ValidationCode::invalid_field, where,
                          std::string("missing or non-string field '") + key + "'");
  }
  return record[key].get<std::string>();
}

std::optional<std::string> optional_string(const json& record, const char* key,
                                           const std::string& where) {
  if (!record.contains(key) || record[key].is_null()) return std::nullopt;
  if (!record[key].is_string()) {
    throw ValidationError(ValidationCode::invalid_field, where,
                          std::string("field '") + key + "' must be a string");
  }
  return record[key].get<std::string>();
}

json strip_keys(json record, std::initializer_list<const char*> keys) {
  for (const char* key : keys) record.erase(key);
  return record;
}

}  // namespace

Money Money::dollars(long long value) {
  if (value < 0) {
    throw ValidationError(ValidationCode::invalid_field, "",
                          "money amount must be non-negative, got " + std::to_string(value));
  }
  return Money{value};
}

const char* to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::too_few_proposals: return "TooFewProposals";
    case ValidationCode::non_contiguous_ids: return "NonContiguousIds";
    case ValidationCode::ground_truth_out_of_range: return "GroundTruthOutOfRange";
    case ValidationCode::empty_field: return "EmptyField";
    case ValidationCode::invalid_field: return "InvalidField";
    case ValidationCode::duplicate_key: return "DuplicateKey";
  }
  return "UnknownValidationCode";
}

ValidationError::ValidationError(ValidationCode code, std::string instance_id,
                                 const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) +
                         (instance_id.empty() ? "" : " [" + instance_id + "]") + ": " + detail),
      code_(code),
      instance_id_(std::move(instance_id)) {}

const ManagerInstance& validate_instance(const ManagerInstance& instance) {
  const std::string& id = instance.issue.id;
  if (trim(id).empty()) {
    throw ValidationError(ValidationCode::empty_field, id, "issue id is empty");
  }
  if (instance.issue.issue_number <= 0) {
    throw ValidationError(ValidationCode::invalid_field, id, "issue_number must be positive");
  }
  if (instance.issue.price.usd < 0) {
    throw ValidationError(ValidationCode::invalid_field, id, "price must be non-negative");
  }
  const int n = static_cast<int>(instance.proposals.size());
  if (n < 2) {
    throw ValidationError(ValidationCode::too_few_proposals, id,
                          "need at least 2 proposals, got " + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    const Proposal& p = instance.proposals[static_cast<std::size_t>(i)];
    if (p.proposal_id != i + 1) {
      throw ValidationError(ValidationCode::non_contiguous_ids, id,
                            "proposal_ids must be exactly 1.." + std::to_string(n) +
                                "; position " + std::to_string(i + 1) + " has id " +
                                std::to_string(p.proposal_id));
    }
    if (trim(p.raw_text).empty()) {
      throw ValidationError(ValidationCode::empty_field, id,
                            "proposal " + std::to_string(p.proposal_id) + " raw_text is empty");
    }
    for (const auto& [name, field] : {std::pair{"problem", &p.problem},
                                      std::pair{"root_cause", &p.root_cause},
                                      std::pair{"solution", &p.solution}}) {
      if (field->has_value() && trim(**field).empty()) {
        throw ValidationError(ValidationCode::empty_field, id,
                              "proposal " + std::to_string(p.proposal_id) + " field '" + name +
                                  "' is present but empty");
      }
    }
  }
  if (instance.ground_truth_id.has_value() &&
      (*instance.ground_truth_id < 1 || *instance.ground_truth_id > n)) {
    throw ValidationError(ValidationCode::ground_truth_out_of_range, id,
                          "ground_truth_id " + std::to_string(*instance.ground_truth_id) +
                              " outside 1.." + std::to_string(n));
  }
  return instance;
}

void validate_dataset(const std::vector<ManagerInstance>& instances) {
  std::unordered_set<std::string> ids;
  std::set<std::pair<std::string, int>> repo_issues;
  for (const ManagerInstance& instance : instances) {
    validate_instance(instance);
    if (!ids.insert(instance.issue.id).second) {
      throw ValidationError(ValidationCode::duplicate_key, instance.issue.id,
                            "duplicate instance id");
    }
    if (!repo_issues.emplace(instance.issue.repo, instance.issue.issue_number).second) {
      throw ValidationError(ValidationCode::duplicate_key, instance.issue.id,
                            "duplicate (repo, issue_number): " + instance.issue.repo + "#" +
                                std::to_string(instance.issue.issue_number));
    }
  }
}

DatasetStats dataset_stats(const std::vector<ManagerInstance>& instances) {
  DatasetStats stats;
  stats.n_issues = instances.size();
  for (const ManagerInstance& instance : instances) {
    stats.n_proposals += instance.proposals.size();
    stats.total_price += instance.issue.price;
    stats.proposal_count_histogram[static_cast<int>(instance.proposals.size())] += 1;
  }
  return stats;
}

json golden_to_json(const GoldenProposal& golden) {
  return json{{"problem", golden.problem},
              {"root_cause", golden.root_cause},
              {"solution", golden.solution}};
}

GoldenProposal golden_from_json(const json& value) {
  GoldenProposal golden;
  golden.problem = require_string(value, "problem", "golden");
  golden.root_cause = require_string(value, "root_cause", "golden");
  golden.solution = require_string(value, "solution", "golden");
  return golden;
}

json instance_to_json(const ManagerInstance& instance) {
  json record = instance.extra.is_object() ? instance.extra : json::object();
  record["id"] = instance.issue.id;
  record["repo"] = instance.issue.repo;
  record["issue_number"] = instance.issue.issue_number;
  record["title"] = instance.issue.title;
  record["body"] = instance.issue.body;
  record["price_usd"] = instance.issue.price.usd;
  json proposals = json::array();
  for (const Proposal& p : instance.proposals) {
    json entry = p.extra.is_object() ? p.extra : json::object();
    entry["proposal_id"] = p.proposal_id;
    entry["raw_text"] = p.raw_text;
    if (p.problem) entry["problem"] = *p.problem;
    if (p.root_cause) entry["root_cause"] = *p.root_cause;
    if (p.solution) entry["solution"] = *p.solution;
    proposals.push_back(std::move(entry));
  }
  record["proposals"] = std::move(proposals);
  if (instance.ground_truth_id) record["ground_truth_id"] = *instance.ground_truth_id;
  return record;
}

ManagerInstance instance_from_json(const json& record) {
  ManagerInstance instance;
  const std::string id =
      record.contains("id") && record["id"].is_string() ? record["id"].get<std::string>() : "";
  instance.issue.id = require_string(record, "id", id);
  instance.issue.repo = require_string(record, "repo", id);
  instance.issue.issue_number = static_cast<int>(require_int(record, "issue_number", id));
  instance.issue.title = require_string(record, "title", id);
  instance.issue.body = require_string(record, "body", id);
  instance.issue.price = Money::dollars(require_int(record, "price_usd", id));
  if (!record.contains("proposals") || !record["proposals"].is_array()) {
    throw ValidationError(ValidationCode::invalid_field, id, "missing 'proposals' array");
  }
  for (const json& entry : record["proposals"]) {
    Proposal p;
    p.proposal_id = static_cast<int>(require_int(entry, "proposal_id", id));
    p.raw_text = require_string(entry, "raw_text", id);
    p.problem = optional_string(entry, "problem", id);
    p.root_cause = optional_string(entry, "root_cause", id);
    p.solution = optional_string(entry, "solution", id);
    p.extra = strip_keys(entry, {"proposal_id", "raw_text", "problem", "root_cause", "solution"});
    instance.proposals.push_back(std::move(p));
  }
  if (record.contains("ground_truth_id") && !record["ground_truth_id"].is_null()) {
    instance.ground_truth_id = static_cast<int>(require_int(record, "ground_truth_id", id));
  }
  instance.extra = strip_keys(record, {"id", "repo", "issue_number", "title", "body", "price_usd",
                                       "proposals", "ground_truth_id"});
  return instance;
}

std::vector<ManagerInstance> read_instances(const std::filesystem::path& path) {
  std::vector<ManagerInstance> instances;
  for (const json& record : read_jsonl(path)) instances.push_back(instance_from_json(record));
  return instances;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<ManagerInstance>& instances) {
  std::vector<json> records;
  records.reserve(instances.size());
  for (const ManagerInstance& instance : instances) records.push_back(instance_to_json(instance));
  write_jsonl(path, records);
}

json issue_to_json(const IssueRecord& issue) {
  json record = issue.extra.is_object() ? issue.extra : json::object();
  record["id"] = issue.id;
  record["repo"] = issue.repo;
  record["issue_number"] = issue.issue_number;
  record["title"] = issue.title;
  record["body"] = issue.body;
  record["price_usd"] = issue.price.usd;
  return record;
}

IssueRecord issue_from_json(const json& record) {
  IssueRecord issue;
  const std::string id =
      record.contains("id") && record["id"].is_string() ? record["id"].get<std::string>() : "";
  issue.id = require_string(record, "id", id);
  issue.repo = require_string(record, "repo", id);
  issue.issue_number = static_cast<int>(require_int(record, "issue_number", id));
  issue.title = require_string(record, "title", id);
  issue.body = require_string(record, "body", id);
  issue.price = Money::dollars(require_int(record, "price_usd", id));
  issue.extra = strip_keys(record, {"id", "repo", "issue_number", "title", "body", "price_usd"});
  return issue;
}

std::vector<IssueRecord> read_issues(const std::filesystem::path& path) {
  std::vector<IssueRecord> issues;
  for (const json& record : read_jsonl(path)) issues.push_back(issue_from_json(record));
  return issues;
}

void write_issues(const std::filesystem::path& path, const std::vector<IssueRecord>& issues) {
  std::vector<json> records;
  records.reserve(issues.size());
  for (const IssueRecord& issue : issues) records.push_back(issue_to_json(issue));
  write_jsonl(path, records);
}

}  // namespace propsel

#include "propsel/curate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "propsel/manager_io.hpp"

namespace propsel {

const char* to_string(CurateErrorCode code) {
  switch (code) {
    case CurateErrorCode::invalid_margin: return "InvalidMargin";
    case CurateErrorCode::invalid_confidence: return "InvalidConfidence";
    case CurateErrorCode::empty_dataset: return "EmptyDataset";
    case CurateErrorCode::teacher_format_failure: return "TeacherFormatFailure";
    case CurateErrorCode::teacher_disagreement: return "TeacherDisagreement";
    case CurateErrorCode::unknown_criterion: return "UnknownCriterion";
  }
  return "UnknownCurateError";
}

CurateError::CurateError(CurateErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

int required_sample_size(long long population, double margin, double confidence) {
  if (population < 1) throw std::invalid_argument("population must be >= 1");
  if (!(margin > 0.0 && margin < 1.0)) {
    throw CurateError(CurateErrorCode::invalid_margin,
                      "margin must lie in (0,1), got " + std::to_string(margin));
  }
  double z = 0.0;
  if (std::fabs(confidence - 0.90) < 1e-12) z = 1.645;
  else if (std::fabs(confidence - 0.95) < 1e-12) z = 1.960;
  else if (std::fabs(confidence - 0.99) < 1e-12) z = 2.576;
  else {
    throw CurateError(CurateErrorCode::invalid_confidence,
                      "confidence must be one of 0.90, 0.95, 0.99");
  }
  const long double p = 0.5L;
  const long double x = static_cast<long double>(z) * z * p * (1.0L - p) /
                        (static_cast<long double>(margin) * margin);
  const long double n = x * static_cast<long double>(population) /
                        (x + static_cast<long double>(population) - 1.0L);
  return static_cast<int>(std::ceil(n));
}

LeakageKeys LeakageKeys::from_instances(const std::vector<ManagerInstance>& instances) {
  LeakageKeys keys;
  for (const ManagerInstance& instance : instances) {
    keys.ids.insert(instance.issue.id);
    keys.repo_issues.emplace(instance.issue.repo, instance.issue.issue_number);
  }
  return keys;
}

LeakageKeys LeakageKeys::from_issues(const std::vector<IssueRecord>& issues) {
  LeakageKeys keys;
  for (const IssueRecord& issue : issues) {
    keys.ids.insert(issue.id);
    keys.repo_issues.emplace(issue.repo, issue.issue_number);
  }
  return keys;
}

void LeakageKeys::merge(const LeakageKeys& other) {
  ids.insert(other.ids.begin(), other.ids.end());
  repo_issues.insert(other.repo_issues.begin(), other.repo_issues.end());
}

std::pair<std::vector<ManagerInstance>, LeakageReport> filter_leakage(
    const std::vector<ManagerInstance>& train, const LeakageKeys& benchmark_keys) {
  std::vector<ManagerInstance> kept;
  LeakageReport report;
  for (const ManagerInstance& instance : train) {
    const bool leaked =
        benchmark_keys.ids.count(instance.issue.id) > 0 ||
        benchmark_keys.repo_issues.count({instance.issue.repo, instance.issue.issue_number}) > 0;
    if (leaked) {
      report.removed_ids.push_back(instance.issue.id);
    } else {
      kept.push_back(instance);
    }
  }
  report.n_kept = kept.size();
  return {std::move(kept), std::move(report)};
}

json leakage_report_to_json(const LeakageReport& report) {
  return json{{"removed_ids", report.removed_ids},
              {"n_removed", report.removed_ids.size()},
              {"n_kept", report.n_kept}};
}

// ---------------------------------------------------------------------------
// Teacher annotation

namespace {

std::string teacher_prompt(const ManagerInstance& instance) {
  std::ostringstream out;
  out << render_manager_prompt(instance).text;
  out << "\nAnnotation context: the maintainers selected proposal #" << *instance.ground_truth_id
      << ". Reach that decision on its merits. Wrap your comparative reasoning in "
         "<think>...</think> before the selection line, and keep the justification concise.\n";
  return out.str();
}

constexpr const char* kTeacherReminder =
    "Reminder: open with <think>...</think>, then the line \"Best Proposal: #X\" matching the "
    "maintainer decision, a concise justification, and the golden proposal under \"## Problem\", "
    "\"## Root Cause\", \"## Solution\".";

}  // namespace

AnnotatedInstance build_sft_target(const ManagerInstance& instance, Backend& teacher,
                                   const ManagerRunConfig& config) {
  validate_instance(instance);
  if (!instance.ground_truth_id.has_value()) {
    throw CurateError(CurateErrorCode::teacher_disagreement,
                      "instance '" + instance.issue.id + "' has no ground_truth_id to anchor");
  }
  const int n_candidates = static_cast<int>(instance.proposals.size());
  const std::string model = config.model.empty() ? teacher.default_model() : config.model;
  ChatRequest request =
      single_user_request(model, teacher_prompt(instance), config.temperature, config.max_tokens);

  CurateErrorCode last_code = CurateErrorCode::teacher_format_failure;
  std::string last_detail = "no completion";
  const int max_attempts = 1 + std::max(config.max_parse_retries, 0);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::string content;
    try {
      content = teacher.complete(request).content;
    } catch (const BackendError& e) {
      last_code = CurateErrorCode::teacher_format_failure;
      last_detail = e.what();
      break;
    }
    const ManagerParse parse = parse_manager_output(content, n_candidates);
    if (!parse.ok()) {
      last_code = CurateErrorCode::teacher_format_failure;
      last_detail = to_string(parse.status);
    } else if (parse.think.empty() || parse.justification.empty()) {
      last_code = CurateErrorCode::teacher_format_failure;
      last_detail = "annotation requires non-empty think and justification";
    } else if (*parse.selected_id != *instance.ground_truth_id) {
      last_code = CurateErrorCode::teacher_disagreement;
      last_detail = "teacher selected #" + std::to_string(*parse.selected_id) +
                    ", ground truth is #" + std::to_string(*instance.ground_truth_id);
    } else {
      AnnotatedInstance annotated;
      annotated.instance = instance;
      annotated.reference.instance_id = instance.issue.id;
      annotated.reference.think = parse.think;
      annotated.reference.justification = parse.justification;
      annotated.reference.golden = *parse.golden;
      annotated.reference.ground_truth_id = *instance.ground_truth_id;
      annotated.teacher_model = model;
      return annotated;
    }
    request.messages.push_back({"assistant", content});
    request.messages.push_back({"user", kTeacherReminder});
  }
  throw CurateError(last_code, "instance '" + instance.issue.id + "': " + last_detail);
}

std::vector<AnnotatedInstance> build_sft_targets(const std::vector<ManagerInstance>& instances,
                                                 const BackendPtr& teacher,
                                                 const ManagerRunConfig& config, int parallelism,
                                                 std::vector<std::string>* failed_ids) {
  std::vector<std::optional<AnnotatedInstance>> slots(instances.size());
  parallel_for(instances.size(), parallelism, [&](std::size_t i) {
    try {
      slots[i] = build_sft_target(instances[i], *teacher, config);
    } catch (const std::exception&) {
      slots[i] = std::nullopt;
    }
  });
  std::vector<AnnotatedInstance> annotated;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      annotated.push_back(std::move(*slots[i]));
    } else if (failed_ids) {
      failed_ids->push_back(instances[i].issue.id);
    }
  }
  return annotated;
}

json annotated_to_json(const AnnotatedInstance& annotated) {
  json record = instance_to_json(annotated.instance);
  record["reference"] = json{{"think", annotated.reference.think},
                             {"justification", annotated.reference.justification},
                             {"golden", golden_to_json(annotated.reference.golden)}};
  record["teacher_model"] = annotated.teacher_model;
  return record;
}

AnnotatedInstance annotated_from_json(const json& record) {
  json instance_record = record;
  instance_record.erase("reference");
  instance_record.erase("teacher_model");
  AnnotatedInstance annotated;
  annotated.instance = instance_from_json(instance_record);
  const json& ref = record.at("reference");
  annotated.reference.instance_id = annotated.instance.issue.id;
  annotated.reference.think = ref.at("think").get<std::string>();
  annotated.reference.justification = ref.at("justification").get<std::string>();
  annotated.reference.golden = golden_from_json(ref.at("golden"));
  annotated.reference.ground_truth_id = annotated.instance.ground_truth_id.value_or(0);
  annotated.teacher_model = record.value("teacher_model", "");
  return annotated;
}

void write_annotated(const std::filesystem::path& path,
                     const std::vector<AnnotatedInstance>& annotated) {
  std::vector<json> records;
  records.reserve(annotated.size());
  for (const AnnotatedInstance& a : annotated) records.push_back(annotated_to_json(a));
  write_jsonl(path, records);
}

std::vector<AnnotatedInstance> read_annotated(const std::filesystem::path& path) {
  std::vector<AnnotatedInstance> annotated;
  for (const json& record : read_jsonl(path)) annotated.push_back(annotated_from_json(record));
  return annotated;
}

// ---------------------------------------------------------------------------
// Length statistics

TokenLengthStats length_stats_from_values(std::vector<std::size_t> lengths) {
  if (lengths.empty()) {
    throw CurateError(CurateErrorCode::empty_dataset, "no lengths to aggregate");
  }
  std::sort(lengths.begin(), lengths.end());
  TokenLengthStats stats;
  const double sum = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  stats.mean = sum / static_cast<double>(lengths.size());
  const std::size_t n = lengths.size();
  if (n % 2 == 1) {
    stats.median = static_cast<double>(lengths[n / 2]);
  } else {
    stats.median =
        (static_cast<double>(lengths[n / 2 - 1]) + static_cast<double>(lengths[n / 2])) / 2.0;
  }
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.9 * static_cast<double>(n)));  // 1-based nearest rank
  stats.p90 = static_cast<double>(lengths[std::max<std::size_t>(rank, 1) - 1]);
  return stats;
}

TokenLengthStats token_length_stats(const std::vector<ManagerInstance>& instances,
                                    const CountFn& count_fn) {
  if (instances.empty()) {
    throw CurateError(CurateErrorCode::empty_dataset, "token_length_stats over empty dataset");
  }
  const CountFn counter =
      count_fn ? count_fn : [](const std::string& text) { return whitespace_token_count(text); };
  std::vector<std::size_t> lengths;
  lengths.reserve(instances.size());
  for (const ManagerInstance& instance : instances) {
    lengths.push_back(counter(render_manager_prompt(instance).text));
  }
  return length_stats_from_values(std::move(lengths));
}

// ---------------------------------------------------------------------------
// Rationale taxonomy

RationaleTheme theme_of(RationaleCriterion criterion) {
  switch (criterion) {
    case RationaleCriterion::minimal_verifiable_change:
    case RationaleCriterion::controlled_fix_scope:
    case RationaleCriterion::edge_case_robustness:
    case RationaleCriterion::time_critical_mitigation:
      return RationaleTheme::risk_and_safety;
    case RationaleCriterion::root_cause_elimination:
    case RationaleCriterion::systematic_remediation:
      return RationaleTheme::fix_depth;
    case RationaleCriterion::repo_constraint_conformance:
    case RationaleCriterion::future_extensibility:
      return RationaleTheme::maintainability;
    case RationaleCriterion::product_design_match:
    case RationaleCriterion::delivery_speed_tie_break:
      return RationaleTheme::others;
  }
  throw std::invalid_argument("unknown criterion");
}

const char* to_string(RationaleTheme theme) {
  switch (theme) {
    case RationaleTheme::risk_and_safety: return "RiskAndSafety";
    case RationaleTheme::fix_depth: return "FixDepth";
    case RationaleTheme::maintainability: return "Maintainability";
    case RationaleTheme::others: return "Others";
  }
  return "UnknownTheme";
}

const char* to_string(RationaleCriterion criterion) {
  switch (criterion) {
    case RationaleCriterion::minimal_verifiable_change: return "minimal_verifiable_change";
    case RationaleCriterion::controlled_fix_scope: return "controlled_fix_scope";
    case RationaleCriterion::edge_case_robustness: return "edge_case_robustness";
    case RationaleCriterion::time_critical_mitigation: return "time_critical_mitigation";
    case RationaleCriterion::root_cause_elimination: return "root_cause_elimination";
    case RationaleCriterion::systematic_remediation: return "systematic_remediation";
    case RationaleCriterion::repo_constraint_conformance: return "repo_constraint_conformance";
    case RationaleCriterion::future_extensibility: return "future_extensibility";
    case RationaleCriterion::product_design_match: return "product_design_match";
    case RationaleCriterion::delivery_speed_tie_break: return "delivery_speed_tie_break";
  }
  return "unknown";
}

RationaleCriterion criterion_from_string(const std::string& name) {
  static const std::map<std::string, RationaleCriterion> lookup = {
      {"minimal_verifiable_change", RationaleCriterion::minimal_verifiable_change},
      {"controlled_fix_scope", RationaleCriterion::controlled_fix_scope},
      {"edge_case_robustness", RationaleCriterion::edge_case_robustness},
      {"time_critical_mitigation", RationaleCriterion::time_critical_mitigation},
      {"root_cause_elimination", RationaleCriterion::root_cause_elimination},
      {"systematic_remediation", RationaleCriterion::systematic_remediation},
      {"repo_constraint_conformance", RationaleCriterion::repo_constraint_conformance},
      {"future_extensibility", RationaleCriterion::future_extensibility},
      {"product_design_match", RationaleCriterion::product_design_match},
      {"delivery_speed_tie_break", RationaleCriterion::delivery_speed_tie_break},
  };
  const auto it = lookup.find(name);
  if (it == lookup.end()) {
    throw CurateError(CurateErrorCode::unknown_criterion, name);
  }
  return it->second;
}

SelectionRationale SelectionRationale::make(RationaleCriterion criterion) {
  return SelectionRationale{theme_of(criterion), criterion};
}

SelectionRationale SelectionRationale::make(RationaleTheme theme, RationaleCriterion criterion) {
  if (theme_of(criterion) != theme) {
    throw std::invalid_argument(std::string("criterion ") + to_string(criterion) +
                                " does not belong to theme " + to_string(theme));
  }
  return SelectionRationale{theme, criterion};
}

RationaleTally tally_rationales(const std::vector<SelectionRationale>& tags) {
  RationaleTally tally;
  for (const SelectionRationale& tag : tags) {
    ++tally.by_criterion[tag.criterion];
    ++tally.by_theme[theme_of(tag.criterion)];
    ++tally.total;
  }
  return tally;
}

std::string render_tally(const RationaleTally& tally) {
  std::ostringstream out;
  for (const RationaleTheme theme :
       {RationaleTheme::risk_and_safety, RationaleTheme::fix_depth,
        RationaleTheme::maintainability, RationaleTheme::others}) {
    const auto theme_it = tally.by_theme.find(theme);
    const std::size_t subtotal = theme_it == tally.by_theme.end() ? 0 : theme_it->second;
    out << to_string(theme) << " (subtotal " << subtotal << ")\n";
    for (const auto& [criterion, count] : tally.by_criterion) {
      if (theme_of(criterion) == theme) {
        out << "  " << to_string(criterion) << ": " << count << "\n";
      }
    }
  }
  out << "total: " << tally.total << "\n";
  return out.str();
}

json tally_to_json(const RationaleTally& tally) {
  json by_criterion = json::object();
  for (const auto& [criterion, count] : tally.by_criterion) {
    by_criterion[to_string(criterion)] = count;
  }
  json by_theme = json::object();
  for (const auto& [theme, count] : tally.by_theme) by_theme[to_string(theme)] = count;
  return json{{"by_criterion", by_criterion}, {"by_theme", by_theme}, {"total", tally.total}};
}

}  // namespace propsel

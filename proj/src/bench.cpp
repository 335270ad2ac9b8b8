#include "propsel/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace propsel {

const char* to_string(BenchErrorCode code) {
  switch (code) {
    case BenchErrorCode::unknown_instance: return "UnknownInstance";
    case BenchErrorCode::duplicate_decision: return "DuplicateDecision";
    case BenchErrorCode::missing_decision: return "MissingDecision";
    case BenchErrorCode::mismatched_instance_sets: return "MismatchedInstanceSets";
    case BenchErrorCode::empty_run: return "EmptyRun";
  }
  return "UnknownBenchError";
}

BenchError::BenchError(BenchErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

namespace {

// Pairs each instance with at most one decision, enforcing the run contract.
template <typename Row>
std::unordered_map<std::string, const Row*> index_run(
    const std::vector<Row>& rows, const std::function<std::string(const Row&)>& id_of,
    const std::unordered_set<std::string>& known, std::size_t n_instances,
    const ScoreOptions& options, const char* row_name) {
  std::unordered_map<std::string, const Row*> by_id;
  for (const Row& row : rows) {
    const std::string id = id_of(row);
    if (!known.count(id)) {
      throw BenchError(BenchErrorCode::unknown_instance,
                       std::string(row_name) + " references unknown instance '" + id + "'");
    }
    if (!by_id.emplace(id, &row).second) {
      throw BenchError(BenchErrorCode::duplicate_decision,
                       std::string("more than one ") + row_name + " for instance '" + id + "'");
    }
  }
  if (by_id.size() < n_instances && !options.allow_partial) {
    throw BenchError(BenchErrorCode::missing_decision,
                     std::to_string(n_instances - by_id.size()) + " instance(s) have no " +
                         row_name + " (pass allow_partial to score anyway)");
  }
  return by_id;
}

std::unordered_set<std::string> known_ids(const std::vector<ManagerInstance>& instances) {
  std::unordered_set<std::string> ids;
  for (const ManagerInstance& instance : instances) ids.insert(instance.issue.id);
  return ids;
}

bool decision_matches(const Decision& decision, const ManagerInstance& instance) {
  if (!instance.ground_truth_id.has_value()) {
    throw BenchError(BenchErrorCode::unknown_instance,
                     "instance '" + instance.issue.id + "' has no ground_truth_id to score against");
  }
  return decision.ok() && decision.output->selected_id == *instance.ground_truth_id;
}

}  // namespace

ManagerScore score_manager_run(const std::vector<Decision>& decisions,
                               const std::vector<ManagerInstance>& instances,
                               const ScoreOptions& options) {
  if (instances.empty()) throw BenchError(BenchErrorCode::empty_run, "no instances to score");
  const auto by_id = index_run<Decision>(
      decisions, [](const Decision& d) { return d.instance_id; }, known_ids(instances),
      instances.size(), options, "decision");

  ManagerScore score;
  score.n_total = instances.size();
  for (const ManagerInstance& instance : instances) {
    score.dollars_total += instance.issue.price;
    const auto it = by_id.find(instance.issue.id);
    if (it == by_id.end()) continue;  // allow_partial: counts as non-match
    const Decision& decision = *it->second;
    if (!decision.ok()) {
      ++score.n_errors;
      continue;
    }
    if (decision_matches(decision, instance)) {
      ++score.n_match;
      score.dollars_earned += instance.issue.price;
    }
  }
  score.match_pct = 100.0 * static_cast<double>(score.n_match) /
                    static_cast<double>(score.n_total);
  score.earned_pct = score.dollars_total.usd == 0
                         ? 0.0
                         : 100.0 * static_cast<double>(score.dollars_earned.usd) /
                               static_cast<double>(score.dollars_total.usd);
  return score;
}

ICScore score_ic_run(const std::vector<Verdict>& verdicts,
                     const std::vector<IssueRecord>& instances, const ScoreOptions& options) {
  if (instances.empty()) throw BenchError(BenchErrorCode::empty_run, "no instances to score");
  std::unordered_set<std::string> ids;
  for (const IssueRecord& issue : instances) ids.insert(issue.id);
  const auto by_id = index_run<Verdict>(
      verdicts, [](const Verdict& v) { return v.instance_id; }, ids, instances.size(), options,
      "verdict");

  ICScore score;
  score.n_total = instances.size();
  for (const IssueRecord& issue : instances) {
    score.dollars_total += issue.price;
    const auto it = by_id.find(issue.id);
    if (it == by_id.end()) continue;
    if (it->second->passed) {
      ++score.n_pass;
      score.dollars_earned += issue.price;
    }
  }
  score.pass_pct = 100.0 * static_cast<double>(score.n_pass) / static_cast<double>(score.n_total);
  score.earned_pct = score.dollars_total.usd == 0
                         ? 0.0
                         : 100.0 * static_cast<double>(score.dollars_earned.usd) /
                               static_cast<double>(score.dollars_total.usd);
  return score;
}

namespace {

BinReport bin_run(const std::vector<Decision>& decisions,
                  const std::vector<ManagerInstance>& instances, const ScoreOptions& options,
                  const std::vector<std::string>& labels,
                  const std::function<std::size_t(const ManagerInstance&)>& bin_of) {
  const auto by_id = index_run<Decision>(
      decisions, [](const Decision& d) { return d.instance_id; }, known_ids(instances),
      instances.size(), options, "decision");

  BinReport report;
  for (const std::string& label : labels) report.rows.push_back(BinRow{label, 0, 0, std::nullopt});
  for (const ManagerInstance& instance : instances) {
    BinRow& row = report.rows.at(bin_of(instance));
    ++row.n_total;
    const auto it = by_id.find(instance.issue.id);
    if (it != by_id.end() && decision_matches(*it->second, instance)) ++row.n_correct;
  }
  for (BinRow& row : report.rows) {
    if (row.n_total > 0) {
      row.pct = 100.0 * static_cast<double>(row.n_correct) / static_cast<double>(row.n_total);
    }
  }
  return report;
}

}  // namespace

BinReport bin_by_proposal_count(const std::vector<Decision>& decisions,
                                const std::vector<ManagerInstance>& instances,
                                const ScoreOptions& options) {
  return bin_run(decisions, instances, options, {"2", "3", "4", "5", "6+"},
                 [](const ManagerInstance& instance) -> std::size_t {
                   const std::size_t n = instance.proposals.size();
                   return n >= 6 ? 4 : n - 2;
                 });
}

BinReport bin_by_reward(const std::vector<Decision>& decisions,
                        const std::vector<ManagerInstance>& instances,
                        const ScoreOptions& options) {
  return bin_run(decisions, instances, options,
                 {"[$0,$500)", "[$500,$1000)", "[$1000,$2000)", "[$2000,inf)"},
                 [](const ManagerInstance& instance) -> std::size_t {
                   const long long usd = instance.issue.price.usd;
                   if (usd < 500) return 0;
                   if (usd < 1000) return 1;
                   if (usd < 2000) return 2;
                   return 3;
                 });
}

OverlapReport overlap_analysis(const std::set<std::string>& set_a,
                               const std::set<std::string>& set_b) {
  OverlapReport report;
  for (const std::string& id : set_a) {
    if (set_b.count(id)) {
      ++report.shared;
    } else {
      ++report.a_only;
    }
  }
  report.b_only = set_b.size() - report.shared;
  if (!set_a.empty()) {
    report.a_only_fraction =
        static_cast<double>(report.a_only) / static_cast<double>(set_a.size());
  }
  return report;
}

OverlapReport selector_overlap(const std::vector<Verdict>& run_a,
                               const std::vector<Verdict>& run_b) {
  std::set<std::string> ids_a, ids_b, passed_a, passed_b;
  for (const Verdict& v : run_a) {
    ids_a.insert(v.instance_id);
    if (v.passed) passed_a.insert(v.instance_id);
  }
  for (const Verdict& v : run_b) {
    ids_b.insert(v.instance_id);
    if (v.passed) passed_b.insert(v.instance_id);
  }
  if (ids_a != ids_b) {
    throw BenchError(BenchErrorCode::mismatched_instance_sets,
                     "the two runs cover different instance sets (" +
                         std::to_string(ids_a.size()) + " vs " + std::to_string(ids_b.size()) +
                         " ids)");
  }
  return overlap_analysis(passed_a, passed_b);
}

std::string render_manager_report(const ManagerScore& score) {
  std::ostringstream out;
  out << "manager run: " << score.n_total << " instances\n";
  out << "  match:  " << score.n_match << "/" << score.n_total << " ("
      << format_percent(static_cast<long long>(score.n_match),
                        static_cast<long long>(score.n_total), 2, RoundMode::half_up)
      << "%)\n";
  out << "  errors: " << score.n_errors << "\n";
  out << "  earned: " << format_dollars(score.dollars_earned.usd) << " / "
      << format_dollars(score.dollars_total.usd) << " ("
      << (score.dollars_total.usd == 0
              ? std::string("0.00")
              : format_percent(score.dollars_earned.usd, score.dollars_total.usd, 2,
                               RoundMode::floor))
      << "%)\n";
  return out.str();
}

std::string render_ic_report(const ICScore& score) {
  std::ostringstream out;
  out << "ic run: " << score.n_total << " instances\n";
  out << "  pass:   " << score.n_pass << "/" << score.n_total << " ("
      << format_percent(static_cast<long long>(score.n_pass),
                        static_cast<long long>(score.n_total), 1, RoundMode::half_up)
      << "%)\n";
  out << "  earned: " << format_dollars(score.dollars_earned.usd) << " / "
      << format_dollars(score.dollars_total.usd) << " ("
      << (score.dollars_total.usd == 0
              ? std::string("0.0")
              : format_percent(score.dollars_earned.usd, score.dollars_total.usd, 1,
                               RoundMode::half_up))
      << "%)\n";
  return out.str();
}

std::string render_bin_report(const BinReport& report) {
  std::size_t label_width = 5;
  for (const BinRow& row : report.rows) label_width = std::max(label_width, row.bin_label.size());
  std::ostringstream out;
  for (const BinRow& row : report.rows) {
    out << "  " << row.bin_label << std::string(label_width - row.bin_label.size() + 2, ' ')
        << row.n_correct << "/" << row.n_total;
    if (row.pct) {
      out << " ("
          << format_percent(static_cast<long long>(row.n_correct),
                            static_cast<long long>(row.n_total), 2, RoundMode::half_up)
          << "%)";
    } else {
      out << " (-)";
    }
    out << "\n";
  }
  return out.str();
}

std::string render_bin_report_csv(const BinReport& report) {
  std::ostringstream out;
  out << "bin,n_correct,n_total,pct\n";
  for (const BinRow& row : report.rows) {
    out << "\"" << row.bin_label << "\"," << row.n_correct << "," << row.n_total << ",";
    if (row.pct) {
      out << format_percent(static_cast<long long>(row.n_correct),
                            static_cast<long long>(row.n_total), 2, RoundMode::half_up);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_overlap_report(const OverlapReport& report) {
  std::ostringstream out;
  out << "  a_only: " << report.a_only << "\n";
  out << "  b_only: " << report.b_only << "\n";
  out << "  shared: " << report.shared << "\n";
  if (report.a_only_fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *report.a_only_fraction);
    out << "  a_only_fraction: " << buf << "\n";
  }
  return out.str();
}

json manager_score_to_json(const ManagerScore& score) {
  return json{{"n_total", score.n_total},
              {"n_match", score.n_match},
              {"n_errors", score.n_errors},
              {"match_pct", score.match_pct},
              {"dollars_earned", score.dollars_earned.usd},
              {"dollars_total", score.dollars_total.usd},
              {"earned_pct", score.earned_pct}};
}

json ic_score_to_json(const ICScore& score) {
  return json{{"n_total", score.n_total},
              {"n_pass", score.n_pass},
              {"pass_pct", score.pass_pct},
              {"dollars_earned", score.dollars_earned.usd},
              {"dollars_total", score.dollars_total.usd},
              {"earned_pct", score.earned_pct}};
}

json bin_report_to_json(const BinReport& report) {
  json rows = json::array();
  for (const BinRow& row : report.rows) {
    json entry = {{"bin", row.bin_label}, {"n_correct", row.n_correct}, {"n_total", row.n_total}};
    if (row.pct) entry["pct"] = *row.pct;
    rows.push_back(std::move(entry));
  }
  return json{{"bins", rows}};
}

json overlap_to_json(const OverlapReport& report) {
  json value = {{"a_only", report.a_only}, {"b_only", report.b_only}, {"shared", report.shared}};
  if (report.a_only_fraction) value["a_only_fraction"] = *report.a_only_fraction;
  return value;
}

json verdict_to_json(const Verdict& verdict) {
  return json{{"instance_id", verdict.instance_id},
              {"passed", verdict.passed},
              {"price_usd", verdict.price.usd}};
}

Verdict verdict_from_json(const json& record) {
  Verdict verdict;
  verdict.instance_id = record.at("instance_id").get<std::string>();
  if (!record.contains("passed") || !record["passed"].is_boolean()) {
    throw std::runtime_error("verdict for '" + verdict.instance_id +
                             "' has no boolean 'passed' field (unverified skeleton?)");
  }
  verdict.passed = record["passed"].get<bool>();
  verdict.price = Money::dollars(record.value("price_usd", 0LL));
  return verdict;
}

std::vector<Verdict> read_verdicts(const std::filesystem::path& path) {
  std::vector<Verdict> verdicts;
  for (const json& record : read_jsonl(path)) verdicts.push_back(verdict_from_json(record));
  return verdicts;
}

void write_verdicts(const std::filesystem::path& path, const std::vector<Verdict>& verdicts) {
  std::vector<json> records;
  records.reserve(verdicts.size());
  for (const Verdict& v : verdicts) records.push_back(verdict_to_json(v));
  write_jsonl(path, records);
}

}  // namespace propsel

#include "fixtures.hpp"

#include "propsel/manager_io.hpp"

namespace fixtures {

ManagerInstance make_instance(const std::string& id, int issue_number, long long price_usd,
                              int n_proposals, int ground_truth) {
  ManagerInstance instance;
  instance.issue.id = id;
  instance.issue.repo = "example/app";
  instance.issue.issue_number = issue_number;
  instance.issue.title = "Issue " + std::to_string(issue_number);
  instance.issue.body = "Steps to reproduce the defect in scenario " + std::to_string(issue_number);
  instance.issue.price = Money::dollars(price_usd);
  for (int k = 1; k <= n_proposals; ++k) {
    Proposal p;
    p.proposal_id = k;
    p.raw_text = "Candidate fix " + std::to_string(k) + " for issue " +
                 std::to_string(issue_number);
    instance.proposals.push_back(std::move(p));
  }
  instance.ground_truth_id = ground_truth;
  return instance;
}

namespace {

long long price_at(std::size_t i) {
  if (i <= 22) return 2200;
  if (i == 23) return 2275;
  if (i <= 139) return 850;
  if (i == 140) return 1275;
  if (i <= 263) return 900;
  return 1050;
}

int pool_size_at(std::size_t i) {
  if (i <= 28) return 2;
  if (i <= 66) return 3;
  if (i <= 83) return 4;
  if (i <= 112) return 5;
  if (i <= 140) return 6;
  if (i <= 150) return 2;
  if (i <= 173) return 3;
  if (i <= 192) return 4;
  if (i <= 220) return 5;
  if (i <= 250) return 6;
  return 7;
}

}  // namespace

bool matched_a(std::size_t index) { return index <= 140; }
bool matched_b(std::size_t index) { return index >= 24 && index <= 140; }

std::vector<ManagerInstance> manager_fixture_265() {
  std::vector<ManagerInstance> instances;
  instances.reserve(265);
  for (std::size_t i = 0; i < 265; ++i) {
    const int n = pool_size_at(i);
    const int gt = static_cast<int>(i * 7 % static_cast<std::size_t>(n)) + 1;
    char id[16];
    std::snprintf(id, sizeof(id), "m%04zu", i + 1);
    instances.push_back(
        make_instance(id, static_cast<int>(i + 1), price_at(i), n, gt));
  }
  return instances;
}

std::vector<IssueRecord> ic_fixture_198() {
  std::vector<IssueRecord> issues;
  issues.reserve(198);
  for (std::size_t i = 0; i < 198; ++i) {
    long long price = 0;
    if (i <= 108) price = 775;
    else if (i == 109) price = 2150;
    else if (i <= 196) price = 1150;
    else price = 2575;
    IssueRecord issue;
    char id[16];
    std::snprintf(id, sizeof(id), "ic%04zu", i + 1);
    issue.id = id;
    issue.repo = "example/app";
    issue.issue_number = static_cast<int>(i + 1);
    issue.title = "IC task " + std::to_string(i + 1);
    issue.body = "End-to-end issue " + std::to_string(i + 1);
    issue.price = Money::dollars(price);
    issues.push_back(std::move(issue));
  }
  return issues;
}

std::vector<Decision> decisions_for(const std::vector<ManagerInstance>& instances,
                                    const std::function<bool(std::size_t)>& matched) {
  std::vector<Decision> decisions;
  decisions.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const ManagerInstance& instance = instances[i];
    const int n = static_cast<int>(instance.proposals.size());
    const int gt = *instance.ground_truth_id;
    ManagerOutput output;
    output.think = "weighing scope and regression risk";
    output.selected_id = matched(i) ? gt : gt % n + 1;
    output.justification = "lowest-risk candidate that addresses the cause";
    output.golden = GoldenProposal{"restated problem", "underlying cause", "consolidated fix"};
    output.raw_text = render_manager_response(output);
    Decision decision;
    decision.instance_id = instance.issue.id;
    decision.output = std::move(output);
    decision.model = "fixture";
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

std::vector<Verdict> verdicts_for(const std::vector<IssueRecord>& issues,
                                  const std::function<bool(std::size_t)>& passed) {
  std::vector<Verdict> verdicts;
  verdicts.reserve(issues.size());
  for (std::size_t i = 0; i < issues.size(); ++i) {
    verdicts.push_back(Verdict{issues[i].id, passed(i), issues[i].price});
  }
  return verdicts;
}

std::vector<SelectionRationale> rationale_fixture_339() {
  const std::vector<std::pair<RationaleCriterion, int>> counts = {
      {RationaleCriterion::minimal_verifiable_change, 86},
      {RationaleCriterion::controlled_fix_scope, 32},
      {RationaleCriterion::edge_case_robustness, 20},
      {RationaleCriterion::time_critical_mitigation, 7},
      {RationaleCriterion::root_cause_elimination, 68},
      {RationaleCriterion::systematic_remediation, 31},
      {RationaleCriterion::repo_constraint_conformance, 42},
      {RationaleCriterion::future_extensibility, 13},
      {RationaleCriterion::product_design_match, 26},
      {RationaleCriterion::delivery_speed_tie_break, 14},
  };
  std::vector<SelectionRationale> tags;
  for (const auto& [criterion, count] : counts) {
    for (int k = 0; k < count; ++k) tags.push_back(SelectionRationale::make(criterion));
  }
  return tags;
}

namespace {

const char* kWords[] = {"null",   "crash",  "render", "cache",  "token",  "state",
                        "scroll", "avatar", "upload", "retry",  "parser", "offset",
                        "filter", "modal",  "badge",  "metric", "queue",  "flag"};

std::string random_word(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  return kWords[pick(rng)];
}

}  // namespace

std::string random_text(std::mt19937_64& rng, int min_words, int max_words) {
  std::uniform_int_distribution<int> n_words(min_words, max_words);
  const int n = n_words(rng);
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (i) text += " ";
    text += random_word(rng);
  }
  return text;
}

ManagerInstance random_instance(std::mt19937_64& rng, const std::string& id) {
  std::uniform_int_distribution<int> n_proposals(2, 6);
  std::uniform_int_distribution<long long> price(50, 4000);
  const int n = n_proposals(rng);
  ManagerInstance instance;
  instance.issue.id = id;
  instance.issue.repo = "example/app";
  instance.issue.issue_number = static_cast<int>(std::hash<std::string>{}(id) % 100000 + 1);
  instance.issue.title = random_text(rng, 2, 6);
  instance.issue.body = random_text(rng, 8, 40);
  instance.issue.price = Money::dollars(price(rng));
  for (int k = 1; k <= n; ++k) {
    Proposal p;
    p.proposal_id = k;
    p.raw_text = random_text(rng, 6, 30);
    instance.proposals.push_back(std::move(p));
  }
  std::uniform_int_distribution<int> gt(1, n);
  instance.ground_truth_id = gt(rng);
  return instance;
}

ManagerOutput random_output_for(const ManagerInstance& instance, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> id(1, static_cast<int>(instance.proposals.size()));
  ManagerOutput output;
  output.think = random_text(rng, 4, 20);
  output.selected_id = id(rng);
  output.justification = random_text(rng, 3, 15);
  output.golden.problem = random_text(rng, 3, 12);
  output.golden.root_cause = random_text(rng, 3, 12);
  output.golden.solution = random_text(rng, 3, 12);
  output.raw_text = render_manager_response(output);
  return output;
}

ReferenceAnnotation reference_for(const ManagerInstance& instance, std::mt19937_64& rng) {
  ReferenceAnnotation reference;
  reference.instance_id = instance.issue.id;
  reference.think = random_text(rng, 4, 20);
  reference.justification = random_text(rng, 3, 15);
  reference.golden.problem = random_text(rng, 3, 12);
  reference.golden.root_cause = random_text(rng, 3, 12);
  reference.golden.solution = random_text(rng, 3, 12);
  reference.ground_truth_id = *instance.ground_truth_id;
  return reference;
}

// ---------------------------------------------------------------------------
// Scripted pipeline episodes

namespace {

std::string proposal_body(const std::string& tag) {
  return "## Problem pool problem " + tag + "\n## Root Cause pool cause " + tag +
         "\n## Solution pool solution " + tag + "\n";
}

std::string digest_for(const std::string& model, const std::vector<ChatMessage>& messages) {
  ChatRequest request;
  request.model = model;
  request.messages = messages;
  return MockBackend::request_digest(request);
}

constexpr const char* kImplEditCommand = "printf 'patched\\n' >> src.txt";

}  // namespace

IssueRecord p2a_issue(int n) {
  IssueRecord issue;
  issue.id = "p2a-" + std::to_string(n);
  issue.repo = "example/app";
  issue.issue_number = n;
  issue.title = "Scroll position lost " + std::to_string(n);
  issue.body = "Reopening thread " + std::to_string(n) + " jumps to the top.";
  issue.price = Money::dollars(100 * n + 25);
  return issue;
}

ManagerOutput p2a_review_output() {
  ManagerOutput output;
  output.think = "contrast the three drafts";
  output.selected_id = 1;
  output.justification = "first draft is closest to the cause";
  output.golden = GoldenProposal{"synthesized problem", "synthesized cause", "synthesized plan"};
  output.raw_text = render_manager_response(output);
  return output;
}

std::string p2a_proposal_request_digest(const IssueRecord& issue, int backend_index) {
  return digest_for("prop" + std::to_string(backend_index + 1),
                    {{"system", proposal_system_prompt(issue)},
                     {"user", kInitialUserMessage}});
}

void script_p2a_issue(P2AScripts& scripts, const IssueRecord& issue,
                      const std::vector<std::string>& tags) {
  std::vector<Proposal> pool;
  for (std::size_t k = 0; k < tags.size() && k < 3; ++k) {
    scripts.proposals[k][p2a_proposal_request_digest(issue, static_cast<int>(k))] =
        std::string(kSentinelLine) + "\n" + proposal_body(tags[k]);
    Proposal p;
    p.proposal_id = static_cast<int>(k) + 1;
    p.raw_text = trim(proposal_body(tags[k]));
    p.problem = "pool problem " + tags[k];
    p.root_cause = "pool cause " + tags[k];
    p.solution = "pool solution " + tags[k];
    pool.push_back(std::move(p));
  }

  ManagerInstance synthetic;
  synthetic.issue = issue;
  synthetic.proposals = pool;
  scripts.manager[digest_for("mgr", {{"user", render_manager_prompt(synthetic).text}})] =
      p2a_review_output().raw_text;

  const std::vector<ChatMessage> conv0 = {
      {"system", implementation_system_prompt(issue, p2a_review_output().golden)},
      {"user", kInitialUserMessage}};
  const std::string edit = "```\n" + std::string(kImplEditCommand) + "\n```";
  scripts.implementation[digest_for("impl", conv0)] = edit;
  std::vector<ChatMessage> conv1 = conv0;
  conv1.push_back({"assistant", edit});
  conv1.push_back({"user", format_observation(ExecResult{"", "", 0, false, false})});
  scripts.implementation[digest_for("impl", conv1)] = std::string(kSentinelLine) + "\ndone";
}

std::filesystem::path make_p2a_workspace(const std::filesystem::path& root,
                                         const std::string& id) {
  const auto ws = root / id;
  std::filesystem::create_directories(ws);
  write_text_file(ws / "src.txt", "base\n");
  return ws;
}

}  // namespace fixtures

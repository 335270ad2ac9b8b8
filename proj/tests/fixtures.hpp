#pragma once

// Shared fixture builders for the unit and acceptance suites.

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "propsel/agents.hpp"
#include "propsel/bench.hpp"
#include "propsel/core.hpp"
#include "propsel/curate.hpp"
#include "propsel/engine.hpp"
#include "propsel/reward.hpp"

namespace fixtures {

using namespace propsel;

ManagerInstance make_instance(const std::string& id, int issue_number, long long price_usd,
                              int n_proposals, int ground_truth);

// 265 review instances totaling $264,500, with pool sizes distributed as
// 39/61/36/57/72 over bins {2,3,4,5,6+}. matched_a() marks 141 instances whose
// prices sum to $152,750; matched_b() marks a 117-instance subset summing to
// $99,875. Correct selections under matched_a() land 29/38/17/29/28 per bin.
std::vector<ManagerInstance> manager_fixture_265();
bool matched_a(std::size_t index);
bool matched_b(std::size_t index);

// 198 issues totaling $189,300. The first 110 prices sum to $86,625.
std::vector<IssueRecord> ic_fixture_198();

// One decision per instance: the ground-truth id where matched(index), a
// deterministic wrong id elsewhere. Well-formed outputs throughout.
std::vector<Decision> decisions_for(const std::vector<ManagerInstance>& instances,
                                    const std::function<bool(std::size_t)>& matched);

std::vector<Verdict> verdicts_for(const std::vector<IssueRecord>& issues,
                                  const std::function<bool(std::size_t)>& passed);

// Table-style rationale tag multiset: counts 86/32/20/7 | 68/31 | 42/13 | 26/14.
std::vector<SelectionRationale> rationale_fixture_339();

// Randomized-content helpers (plain word soup; never contains headings,
// sentinels, or selection markers).
std::string random_text(std::mt19937_64& rng, int min_words, int max_words);
ManagerInstance random_instance(std::mt19937_64& rng, const std::string& id);
ManagerOutput random_output_for(const ManagerInstance& instance, std::mt19937_64& rng);
ReferenceAnnotation reference_for(const ManagerInstance& instance, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Scripted end-to-end pipeline episodes: keyed-mock maps covering every
// conversation a draft/review/implement run produces for an issue, so full
// batches replay deterministically with no network.

struct P2AScripts {
  std::map<std::string, std::string> proposals[3];
  std::map<std::string, std::string> manager;
  std::map<std::string, std::string> implementation;
};

IssueRecord p2a_issue(int n);
ManagerOutput p2a_review_output();
void script_p2a_issue(P2AScripts& scripts, const IssueRecord& issue,
                      const std::vector<std::string>& tags);
std::string p2a_proposal_request_digest(const IssueRecord& issue, int backend_index);

/// Workspace seeded with one source file, ready for an implementation episode.
std::filesystem::path make_p2a_workspace(const std::filesystem::path& root,
                                         const std::string& id);

}  // namespace fixtures

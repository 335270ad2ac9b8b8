#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "propsel/core.hpp"

namespace propsel {

/// Weights of the composite reward. Must sum to 1 so the reward stays in [0,1].
struct RewardWeights {
  double w_sel = 0.4;
  double w_think = 0.2;
  double w_justi = 0.2;
  double w_gold = 0.2;

  /// Throws std::invalid_argument on a negative weight or a sum off 1 by more
  /// than 1e-9.
  void validate() const;
};

/// Reference texts a candidate output is scored against.
struct ReferenceAnnotation {
  std::string instance_id;
  std::string think;
  std::string justification;
  GoldenProposal golden;
  int ground_truth_id = 0;
};

struct RewardBreakdown {
  double r = 0.0;
  double r_sel = 0.0;    // exact indicator, 0 or 1
  double r_think = 0.0;
  double r_justi = 0.0;
  double r_gold = 0.0;
  int format_ok = 0;
};

/// Exact indicator: 1 iff the selected id equals the ground-truth id.
int selection_reward(int selected_id, int ground_truth_id);

/// Normalization used by the similarity scorer: lowercase, drop punctuation
/// characters, split on whitespace.
std::vector<std::string> normalize_tokens(std::string_view text);

/// Token-level longest-common-subsequence F1 in [0,1]. Both empty -> 1,
/// exactly one empty -> 0. Deterministic, model-free, order-sensitive.
double text_similarity(std::string_view candidate, std::string_view reference);

/// Pluggable similarity hook; defaults to text_similarity.
using SimilarityFn = double (*)(std::string_view, std::string_view);

double weighted_reward(const RewardWeights& weights, double r_sel, double r_think, double r_justi,
                       double r_gold);

/// Composite reward over a parsed output: the selection indicator plus
/// similarity scores for the think span, the justification, and the golden
/// proposal (mean of the three section similarities, so one verbose section
/// cannot compensate for a missing one).
RewardBreakdown composite_reward(const ManagerOutput& output, const ReferenceAnnotation& reference,
                                 const RewardWeights& weights = {},
                                 SimilarityFn similarity = &text_similarity);

/// Same, starting from raw response text. A response that fails to parse
/// scores zero on every component with format_ok = 0.
RewardBreakdown composite_reward_from_text(std::string_view raw_text, int n_candidates,
                                           const ReferenceAnnotation& reference,
                                           const RewardWeights& weights = {},
                                           SimilarityFn similarity = &text_similarity);

json reward_to_json(const RewardBreakdown& breakdown);
ReferenceAnnotation reference_from_json(const json& value);
json reference_to_json(const ReferenceAnnotation& reference);

}  // namespace propsel

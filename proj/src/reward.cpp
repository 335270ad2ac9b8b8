#include "propsel/reward.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "propsel/manager_io.hpp"

namespace propsel {

void RewardWeights::validate() const {
  for (double w : {w_sel, w_think, w_justi, w_gold}) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("reward weights must be non-negative finite values");
    }
  }
  const double sum = w_sel + w_think + w_justi + w_gold;
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("reward weights must sum to 1, got " + std::to_string(sum));
  }
}

int selection_reward(int selected_id, int ground_truth_id) {
  if (selected_id < 1 || ground_truth_id < 1) {
    throw std::invalid_argument("selection_reward: ids must be positive");
  }
  return selected_id == ground_truth_id ? 1 : 0;
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
      continue;
    }
    if (std::ispunct(c)) continue;
    current.push_back(static_cast<char>(std::tolower(c)));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

}  // namespace

double text_similarity(std::string_view candidate, std::string_view reference) {
  const std::vector<std::string> cand = normalize_tokens(candidate);
  const std::vector<std::string> ref = normalize_tokens(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(cand.size());
  const double recall = lcs / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

double weighted_reward(const RewardWeights& weights, double r_sel, double r_think, double r_justi,
                       double r_gold) {
  return weights.w_sel * r_sel + weights.w_think * r_think + weights.w_justi * r_justi +
         weights.w_gold * r_gold;
}

RewardBreakdown composite_reward(const ManagerOutput& output, const ReferenceAnnotation& reference,
                                 const RewardWeights& weights, SimilarityFn similarity) {
  weights.validate();
  RewardBreakdown breakdown;
  breakdown.format_ok = 1;
  breakdown.r_sel = selection_reward(output.selected_id, reference.ground_truth_id);
  breakdown.r_think = similarity(output.think, reference.think);
  breakdown.r_justi = similarity(output.justification, reference.justification);
  breakdown.r_gold = (similarity(output.golden.problem, reference.golden.problem) +
                      similarity(output.golden.root_cause, reference.golden.root_cause) +
                      similarity(output.golden.solution, reference.golden.solution)) /
                     3.0;
  breakdown.r = weighted_reward(weights, breakdown.r_sel, breakdown.r_think, breakdown.r_justi,
                                breakdown.r_gold);
  return breakdown;
}

RewardBreakdown composite_reward_from_text(std::string_view raw_text, int n_candidates,
                                           const ReferenceAnnotation& reference,
                                           const RewardWeights& weights,
                                           SimilarityFn similarity) {
  weights.validate();
  const ManagerParse parse = parse_manager_output(raw_text, n_candidates);
  if (!parse.ok()) {
    return RewardBreakdown{};  // zero reward: the output is not verifiable
  }
  return composite_reward(parse.to_output(), reference, weights, similarity);
}

json reward_to_json(const RewardBreakdown& breakdown) {
  return json{{"r", breakdown.r},           {"r_sel", breakdown.r_sel},
              {"r_think", breakdown.r_think}, {"r_justi", breakdown.r_justi},
              {"r_gold", breakdown.r_gold},   {"format_ok", breakdown.format_ok}};
}

ReferenceAnnotation reference_from_json(const json& value) {
  ReferenceAnnotation reference;
  reference.instance_id = value.value("instance_id", "");
  reference.think = value.at("think").get<std::string>();
  reference.justification = value.at("justification").get<std::string>();
  reference.golden = golden_from_json(value.at("golden"));
  reference.ground_truth_id = value.at("ground_truth_id").get<int>();
  if (reference.ground_truth_id < 1) {
    throw std::invalid_argument("reference ground_truth_id must be positive");
  }
  return reference;
}

json reference_to_json(const ReferenceAnnotation& reference) {
  json value = {{"think", reference.think},
                {"justification", reference.justification},
                {"golden", golden_to_json(reference.golden)},
                {"ground_truth_id", reference.ground_truth_id}};
  if (!reference.instance_id.empty()) value["instance_id"] = reference.instance_id;
  return value;
}

}  // namespace propsel

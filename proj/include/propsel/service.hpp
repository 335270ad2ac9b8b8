#pragma once

#include <memory>
#include <string>

#include "propsel/reward.hpp"

namespace propsel {

/// Pure request handlers behind the HTTP surface; they throw
/// std::invalid_argument / json exceptions on malformed input.
///
/// POST /score
///   {"raw_text": str, "n_candidates": int,
///    "reference": {"think", "justification", "golden": {...}, "ground_truth_id"},
///    "weights": {"w_sel", "w_think", "w_justi", "w_gold"}?}
///   -> {"r", "r_sel", "r_think", "r_justi", "r_gold", "format_ok"}
/// POST /score_batch: a JSON array of the same request objects -> array of results.
json handle_score(const json& request);
json handle_score_batch(const json& request);

/// Blocking HTTP scoring service. Stateless per request; safe under
/// concurrent load.
class RewardService {
 public:
  RewardService();
  ~RewardService();

  /// Binds host:port and serves until stop(); returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (for tests); serve() then blocks.
  int bind_any_port(const std::string& host);
  bool serve_bound();
  void stop();
  bool is_running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace propsel

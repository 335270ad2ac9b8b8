#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "propsel/core.hpp"

namespace propsel {

struct PromptText {
  std::string text;
  int n_candidates = 0;
};

/// Renders the manager review prompt: maintainer role preamble, the issue
/// inside [ISSUE]...[/ISSUE], each candidate inside [PROPOSAL k]...[/PROPOSAL k]
/// in id order, then the two-step answer instruction ("Best Proposal: #X"
/// followed by the ## Problem / ## Root Cause / ## Solution template).
/// Deterministic: equal instances render byte-identical text.
PromptText render_manager_prompt(const ManagerInstance& instance);

enum class ParseStatus {
  ok,
  missing_selection,
  selection_out_of_range,
  missing_golden,
};

const char* to_string(ParseStatus status);

struct GoldenParse {
  std::optional<GoldenProposal> golden;
  std::vector<std::string> missing;  // absent headings, e.g. {"Root Cause", "Solution"}

  bool ok() const { return golden.has_value(); }
};

/// Splits on the headings "## Problem", "## Root Cause", "## Solution", in that
/// order, case-insensitively and tolerant of extra spaces/tabs around the
/// heading words. Section content runs from the heading to the next found
/// heading (or end of text) and is trimmed; a heading whose content trims to
/// empty counts as missing.
GoldenParse parse_golden_sections(std::string_view text);

struct ManagerParse {
  ParseStatus status = ParseStatus::ok;
  std::string think;
  std::optional<int> selected_id;       // present whenever a selection line was found
  std::string justification;
  std::optional<GoldenProposal> golden;
  std::vector<std::string> missing_sections;
  std::string raw_text;

  bool ok() const { return status == ParseStatus::ok; }
  /// Requires ok(); assembles the validated ManagerOutput.
  ManagerOutput to_output() const;
};

/// Parses a model response. The first <think>...</think> span is captured and
/// excised before further parsing; the first "Best Proposal:" followed by an
/// optional '#' and an integer binds the selection; the prose between the
/// selection line and the first golden heading is the justification; the
/// remainder goes through parse_golden_sections.
ManagerParse parse_manager_output(std::string_view text, int n_candidates);

/// 1 iff parse_manager_output succeeds with no error.
int format_score(std::string_view text, int n_candidates);

/// Canonical response layout (the inverse of parse_manager_output for
/// well-formed content). Used to script mock backends and build fixtures.
std::string render_manager_response(const ManagerOutput& output);

}  // namespace propsel

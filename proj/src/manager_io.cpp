#include "propsel/manager_io.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace propsel {

namespace {

constexpr std::string_view kPreamble =
    "You are a senior open-source project maintainer responsible for reviewing multiple "
    "candidate proposals under a GitHub Issue, selecting the best proposal, and providing a "
    "golden proposal that synthesizes the strengths of all proposals. Your response should be "
    "well-structured, comprehensive in analysis, and practically implementable in engineering.";

constexpr std::string_view kInstructions =
    "1. First, select the best candidate proposal, and write it as: Best Proposal: #X\n"
    "2. Then, based on the Issue and all candidate proposals, write a Golden Proposal that "
    "synthesizes multiple excellent ideas. The structure must strictly follow this format:\n"
    "## Problem xx\n"
    "## Root Cause xx\n"
    "## Solution xx\n";

constexpr std::string_view kSelectionMarker = "Best Proposal:";

bool is_blank(char c) { return c == ' ' || c == '\t'; }

// Matches "##" then the space-separated heading words, case-insensitively,
// with arbitrary blanks after "##" and between words.
struct HeadingHit {
  std::size_t begin = 0;          // position of "##"
  std::size_t content_begin = 0;  // position right after the heading words
};

std::optional<HeadingHit> find_heading(std::string_view text,
                                       const std::vector<std::string_view>& words,
                                       std::size_t from) {
  for (std::size_t i = from; i + 1 < text.size(); ++i) {
    if (text[i] != '#' || text[i + 1] != '#') continue;
    std::size_t pos = i + 2;
    bool matched = true;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w == 0) {
        while (pos < text.size() && is_blank(text[pos])) ++pos;
      } else {
        std::size_t blanks = 0;
        while (pos < text.size() && is_blank(text[pos])) ++pos, ++blanks;
        if (blanks == 0) {
          matched = false;
          break;
        }
      }
      const std::string_view word = words[w];
      if (pos + word.size() > text.size() ||
          !iequals(text.substr(pos, word.size()), word)) {
        matched = false;
        break;
      }
      pos += word.size();
    }
    if (matched) return HeadingHit{i, pos};
  }
  return std::nullopt;
}

const std::array<std::pair<const char*, std::vector<std::string_view>>, 3> kGoldenHeadings = {{
    {"Problem", {"problem"}},
    {"Root Cause", {"root", "cause"}},
    {"Solution", {"solution"}},
}};

// First "Best Proposal:" occurrence that is followed by an optional '#' and an
// integer. Returns the parsed id and the end position of the matched number.
struct SelectionHit {
  int id = 0;
  std::size_t match_end = 0;
};

std::optional<SelectionHit> find_selection(std::string_view text) {
  std::size_t from = 0;
  while (true) {
    const std::size_t at = text.find(kSelectionMarker, from);
    if (at == std::string_view::npos) return std::nullopt;
    std::size_t pos = at + kSelectionMarker.size();
    while (pos < text.size() && is_blank(text[pos])) ++pos;
    if (pos < text.size() && text[pos] == '#') ++pos;
    while (pos < text.size() && is_blank(text[pos])) ++pos;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec == std::errc() && ptr != text.data() + pos) {
      return SelectionHit{value, static_cast<std::size_t>(ptr - text.data())};
    }
    from = at + kSelectionMarker.size();
  }
}

}  // namespace

PromptText render_manager_prompt(const ManagerInstance& instance) {
  std::ostringstream out;
  out << kPreamble << "\n";
  out << "Below is a GitHub Issue:\n";
  out << "[ISSUE]\n";
  if (!instance.issue.title.empty()) out << instance.issue.title << "\n\n";
  out << instance.issue.body << "\n";
  out << "[/ISSUE]\n";
  out << "Below are the candidate proposals:\n";
  for (const Proposal& p : instance.proposals) {
    out << "[PROPOSAL " << p.proposal_id << "]\n"
        << p.raw_text << "\n"
        << "[/PROPOSAL " << p.proposal_id << "]\n";
  }
  out << kInstructions;
  return PromptText{out.str(), static_cast<int>(instance.proposals.size())};
}

const char* to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok: return "Ok";
    case ParseStatus::missing_selection: return "MissingSelection";
    case ParseStatus::selection_out_of_range: return "SelectionOutOfRange";
    case ParseStatus::missing_golden: return "MissingGolden";
  }
  return "UnknownParseStatus";
}

GoldenParse parse_golden_sections(std::string_view text) {
  GoldenParse result;
  std::array<std::optional<HeadingHit>, 3> hits;
  std::size_t cursor = 0;
  for (std::size_t h = 0; h < kGoldenHeadings.size(); ++h) {
    hits[h] = find_heading(text, kGoldenHeadings[h].second, cursor);
    if (hits[h]) cursor = hits[h]->content_begin;
  }
  std::array<std::string, 3> sections;
  for (std::size_t h = 0; h < hits.size(); ++h) {
    if (!hits[h]) {
      result.missing.emplace_back(kGoldenHeadings[h].first);
      continue;
    }
    std::size_t end = text.size();
    for (std::size_t later = h + 1; later < hits.size(); ++later) {
      if (hits[later]) {
        end = hits[later]->begin;
        break;
      }
    }
    sections[h] = trim(text.substr(hits[h]->content_begin, end - hits[h]->content_begin));
    if (sections[h].empty()) result.missing.emplace_back(kGoldenHeadings[h].first);
  }
  if (result.missing.empty()) {
    result.golden = GoldenProposal{sections[0], sections[1], sections[2]};
  }
  return result;
}

ManagerParse parse_manager_output(std::string_view text, int n_candidates) {
  if (n_candidates < 1) throw std::invalid_argument("parse_manager_output: n_candidates < 1");
  ManagerParse parse;
  parse.raw_text = std::string(text);

  // Capture and excise the first complete <think> span; an unterminated open
  // tag is left in place rather than swallowing the rest of the response.
  std::string body;
  const std::size_t think_open = text.find("<think>");
  std::size_t think_close = std::string_view::npos;
  if (think_open != std::string_view::npos) {
    think_close = text.find("</think>", think_open + 7);
  }
  if (think_close != std::string_view::npos) {
    parse.think = trim(text.substr(think_open + 7, think_close - (think_open + 7)));
    body = std::string(text.substr(0, think_open));
    body += text.substr(think_close + 8);
  } else {
    body = std::string(text);
  }

  const auto selection = find_selection(body);
  if (!selection) {
    parse.status = ParseStatus::missing_selection;
    return parse;
  }
  parse.selected_id = selection->id;
  if (selection->id < 1 || selection->id > n_candidates) {
    parse.status = ParseStatus::selection_out_of_range;
    return parse;
  }

  // Justification spans from the end of the selection line to the first golden
  // heading; the template gives it no delimiter of its own.
  std::size_t after_line = body.find('\n', selection->match_end);
  after_line = after_line == std::string::npos ? body.size() : after_line + 1;

  std::size_t first_heading = body.size();
  for (const auto& [name, words] : kGoldenHeadings) {
    (void)name;
    if (const auto hit = find_heading(body, words, after_line)) {
      first_heading = std::min(first_heading, hit->begin);
    }
  }
  parse.justification =
      trim(std::string_view(body).substr(after_line, first_heading - after_line));

  GoldenParse golden = parse_golden_sections(std::string_view(body).substr(first_heading));
  parse.missing_sections = golden.missing;
  if (!golden.ok()) {
    parse.status = ParseStatus::missing_golden;
    return parse;
  }
  parse.golden = std::move(golden.golden);
  parse.status = ParseStatus::ok;
  return parse;
}

ManagerOutput ManagerParse::to_output() const {
  if (!ok()) throw std::logic_error("ManagerParse::to_output on failed parse");
  ManagerOutput output;
  output.think = think;
  output.selected_id = *selected_id;
  output.justification = justification;
  output.golden = *golden;
  output.raw_text = raw_text;
  return output;
}

int format_score(std::string_view text, int n_candidates) {
  return parse_manager_output(text, n_candidates).ok() ? 1 : 0;
}

std::string render_manager_response(const ManagerOutput& output) {
  std::ostringstream out;
  if (!output.think.empty()) out << "<think>" << output.think << "</think>\n";
  out << "Best Proposal: #" << output.selected_id << "\n";
  if (!output.justification.empty()) out << output.justification << "\n";
  out << "## Problem\n"
      << output.golden.problem << "\n"
      << "## Root Cause\n"
      << output.golden.root_cause << "\n"
      << "## Solution\n"
      << output.golden.solution << "\n";
  return out.str();
}

}  // namespace propsel

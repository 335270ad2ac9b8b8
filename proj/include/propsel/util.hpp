#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace propsel {

using json = nlohmann::json;

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

/// Whitespace-delimited token count; the default length measure for prompt statistics.
std::size_t whitespace_token_count(std::string_view text);

/// FNV-1a 64-bit over raw bytes; used for request digests and dataset fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Parses one JSON object per non-empty line. Throws std::runtime_error with the
/// offending line number on malformed input.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

/// "$264,500" style rendering of whole-dollar amounts.
std::string format_dollars(long long usd);

enum class RoundMode { half_up, floor };

/// Formats 100*numer/denom with `dp` decimal places using exact integer
/// arithmetic, so report output never depends on binary rounding of doubles.
std::string format_percent(long long numer, long long denom, int dp, RoundMode mode);

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Exceptions inside
/// fn must be handled by fn itself; this helper only schedules.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace propsel

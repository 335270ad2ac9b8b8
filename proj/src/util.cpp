#include "propsel/util.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace propsel {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    if (!records.back().is_object()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected a JSON object per line");
    }
  }
  return records;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ostringstream out;
  for (const json& record : records) out << record.dump() << "\n";
  write_text_file(path, out.str());
}

std::string format_dollars(long long usd) {
  const bool negative = usd < 0;
  std::string digits = std::to_string(negative ? -usd : usd);
  std::string grouped;
  grouped.reserve(digits.size() + digits.size() / 3 + 2);
  const std::size_t lead = digits.size() % 3 == 0 ? 3 : digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i - lead) % 3 == 0 && i >= lead) grouped.push_back(',');
    grouped.push_back(digits[i]);
  }
  return std::string(negative ? "-$" : "$") + grouped;
}

std::string format_percent(long long numer, long long denom, int dp, RoundMode mode) {
  if (denom <= 0) throw std::invalid_argument("format_percent: denominator must be positive");
  if (numer < 0) throw std::invalid_argument("format_percent: negative numerator");
  long long scale = 1;
  for (int i = 0; i < dp; ++i) scale *= 10;
  // value = 100 * numer / denom, expressed in units of 10^-dp.
  const long long a = 100 * numer * scale;
  long long units = 0;
  switch (mode) {
    case RoundMode::half_up: units = (2 * a + denom) / (2 * denom); break;
    case RoundMode::floor: units = a / denom; break;
  }
  std::string out = std::to_string(units / scale);
  if (dp > 0) {
    std::string frac = std::to_string(units % scale);
    out += "." + std::string(static_cast<std::size_t>(dp) - frac.size(), '0') + frac;
  }
  return out;
}

void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(parallelism, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

}  // namespace propsel

#pragma once

// Small text helpers shared by the readers and report writers: CSV records,
// shortest round-trip number formatting and timestamp parsing.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ppm::text {

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
  if (result.ec != std::errc{} || result.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

// Quotes a field when it contains the delimiter, a quote or a line break.
inline std::string csv_field(std::string_view value, char delimiter = ',') {
  if (value.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string_view::npos) {
    return std::string(value);
  }
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

// RFC 4180 style reader. Quoted fields may contain delimiters, doubled quotes
// and line breaks. line() reports the physical line on which the most recent
// record started.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in, char delimiter = ',') : in_(in), delimiter_(delimiter) {}

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++physical_line_;
    record_line_ = physical_line_;
    if (record_line_ == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    std::string field;
    bool quoted = false;
    for (;;) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
          if (c == '"') {
            if (i + 1 < line.size() && line[i + 1] == '"') {
              field += '"';
              ++i;
            } else {
              quoted = false;
            }
          } else {
            field += c;
          }
        } else if (c == '"') {
          quoted = true;
        } else if (c == delimiter_) {
          fields.push_back(std::move(field));
          field.clear();
        } else if (c != '\r' || i + 1 != line.size()) {
          field += c;
        }
      }
      if (!quoted) break;
      // Quoted field continues on the next physical line.
      if (!std::getline(in_, line)) break;
      ++physical_line_;
      field += '\n';
    }
    fields.push_back(std::move(field));
    return true;
  }

  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t physical_line_ = 0;
  std::size_t record_line_ = 0;
};

namespace detail {

inline bool read_int(std::string_view s, std::size_t& pos, std::size_t digits, int& out) {
  if (pos + digits > s.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < digits; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  pos += digits;
  out = value;
  return true;
}

}  // namespace detail

// Parses integer/decimal epoch seconds or an ISO-8601 date-time:
//   YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH[:MM]]
// Returns epoch seconds (UTC) or nullopt.
inline std::optional<double> parse_timestamp(std::string_view raw) {
  const std::string trimmed = trim(raw);
  const std::string_view s = trimmed;
  if (s.empty()) return std::nullopt;
  if (s.size() < 5 || s[4] != '-') return parse_double(s);

  std::size_t pos = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  double fraction = 0.0;
  if (!detail::read_int(s, pos, 4, year) || s[pos++] != '-') return std::nullopt;
  if (!detail::read_int(s, pos, 2, month) || pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!detail::read_int(s, pos, 2, day)) return std::nullopt;
  double offset_seconds = 0.0;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    ++pos;
    if (!detail::read_int(s, pos, 2, hour) || pos >= s.size() || s[pos++] != ':') return std::nullopt;
    if (!detail::read_int(s, pos, 2, minute)) return std::nullopt;
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!detail::read_int(s, pos, 2, second)) return std::nullopt;
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        const std::size_t start = pos;
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        std::string digits = "0." + std::string(s.substr(start + 1, pos - start - 1));
        fraction = parse_double(digits).value_or(0.0);
      }
    }
    if (pos < s.size()) {
      if (s[pos] == 'Z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '-' ? -1 : 1;
        ++pos;
        int off_h = 0, off_m = 0;
        if (!detail::read_int(s, pos, 2, off_h)) return std::nullopt;
        if (pos < s.size() && s[pos] == ':') ++pos;
        if (pos < s.size() && !detail::read_int(s, pos, 2, off_m)) return std::nullopt;
        offset_seconds = sign * (off_h * 3600.0 + off_m * 60.0);
      }
    }
  }
  if (pos != s.size()) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  const auto day_count = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(day_count) * 86400.0 + hour * 3600.0 + minute * 60.0 + second + fraction -
         offset_seconds;
}

}  // namespace ppm::text

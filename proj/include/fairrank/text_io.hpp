#pragma once
// Text helpers for the file formats: round-trip-exact double formatting,
// strict numeric parsing with context in error messages, line splitting.

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fairrank {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits round-trip any double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view tok, const std::string& context) {
  const std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError(context + ": bad number '" + s + "'");
  }
  return v;
}

inline long long parse_int(std::string_view tok, const std::string& context) {
  const std::string s(tok);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError(context + ": bad integer '" + s + "'");
  }
  return v;
}

inline std::size_t parse_size(std::string_view tok, const std::string& context) {
  const long long v = parse_int(tok, context);
  if (v < 0) throw IoError(context + ": expected non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits "key=value"; returns false if there is no '='.
inline bool split_key_value(std::string_view line, std::string_view& key,
                            std::string_view& value) {
  const std::size_t pos = line.find('=');
  if (pos == std::string_view::npos) return false;
  key = line.substr(0, pos);
  value = line.substr(pos + 1);
  return true;
}

}  // namespace fairrank

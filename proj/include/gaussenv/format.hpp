#pragma once

#include <charconv>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <system_error>

namespace gaussenv {

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  }
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

}  // namespace gaussenv

#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace lqg {

/// Shortest decimal form that reads back to the same double ("nan"/"inf" for
/// non-finite values). Locale independent, so CSV output is byte-stable.
inline std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace lqg

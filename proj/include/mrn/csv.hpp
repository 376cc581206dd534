#pragma once

// Small helpers for the fixed-schema CSV files the tools emit.

#include <cstdio>
#include <string>
#include <vector>

namespace mrn {

/// 12 significant digits; "inf" / "-inf" / "nan" for non-finite values.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += fields[i];
  }
  out += '\n';
  return out;
}

}  // namespace mrn

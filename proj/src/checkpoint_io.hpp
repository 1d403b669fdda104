#pragma once

// Plain-text checkpoint helpers shared by the model files.

#include "dupq/types.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace dupq::detail {

inline void write_doubles(std::ostream& out, const double* v, Eigen::Index n) {
  char buf[32];
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v[i]);
    if (i) out << ' ';
    out << std::string_view(buf, std::size_t(ptr - buf));
  }
  out << '\n';
}

inline std::map<std::string, std::string> parse_header(const std::string& line, const std::string& kind) {
  std::istringstream in(line);
  std::string word;
  if (!(in >> word) || word != kind) throw FormatError("expected a '" + kind + "' header");
  std::map<std::string, std::string> fields;
  while (in >> word) {
    auto eq = word.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header field '" + word + "'");
    fields[word.substr(0, eq)] = word.substr(eq + 1);
  }
  return fields;
}

inline const std::string& header_field(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw FormatError("header lacks '" + key + "'");
  return it->second;
}

inline void read_doubles(std::istream& in, double* out, Eigen::Index n, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("truncated checkpoint while reading " + what);
  std::istringstream fields(line);
  std::string tok;
  Eigen::Index i = 0;
  while (fields >> tok) {
    if (i == n) throw FormatError(what + ": too many values");
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out[i]);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(out[i]))
      throw FormatError(what + ": bad value '" + tok + "'");
    ++i;
  }
  if (i != n) throw FormatError(what + ": expected " + std::to_string(n) + " values, got " + std::to_string(i));
}

inline double parse_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

inline std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}


}  // namespace dupq::detail

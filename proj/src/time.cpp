#include "dupq/time.hpp"

#include <charconv>
#include <cstdio>

namespace dupq {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  auto first = text.data() + pos;
  auto last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_int(text, 0, 4, year) || text.size() < 10 || text[4] != '-' || text[7] != '-' ||
      !read_int(text, 5, 2, month) || !read_int(text, 8, 2, day)) {
    return std::nullopt;
  }
  std::size_t pos = 10;
  if (text.size() > pos && (text[pos] == 'T' || text[pos] == ' ')) {
    if (text.size() < 19 || text[13] != ':' || text[16] != ':' || !read_int(text, 11, 2, hour) ||
        !read_int(text, 14, 2, minute) || !read_int(text, 17, 2, second)) {
      return std::nullopt;
    }
    pos = 19;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return std::nullopt;

  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                  std::chrono::day{unsigned(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

std::string format_timestamp(Timestamp ts) {
  auto days = std::chrono::floor<std::chrono::days>(ts);
  std::chrono::year_month_day ymd{days};
  std::chrono::hh_mm_ss hms{ts - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(hms.hours().count()),
                int(hms.minutes().count()), int(hms.seconds().count()));
  return buf;
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                  std::chrono::day{day}};
  return std::chrono::sys_days{ymd} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

double hours_between(Timestamp earlier, Timestamp later) {
  return double((later - earlier).count()) / 3600.0;
}

std::string to_string(FeatureMode mode) {
  return mode == FeatureMode::kText ? "text" : "text+network";
}

FeatureMode parse_feature_mode(const std::string& text) {
  if (text == "text") return FeatureMode::kText;
  if (text == "text+network") return FeatureMode::kTextNetwork;
  throw ConfigError("unknown feature mode '" + text + "' (expected text or text+network)");
}

}  // namespace dupq

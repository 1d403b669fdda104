#pragma once

#include "dupq/types.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace dupq {

/// Parses `YYYY-MM-DD[(T| )HH:MM:SS[.fff]][Z]` as UTC. Fractional seconds are
/// truncated. Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SS`, UTC.
std::string format_timestamp(Timestamp ts);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

/// Signed difference `later - earlier` in hours.
double hours_between(Timestamp earlier, Timestamp later);

}  // namespace dupq

#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace wba {

/// UTC instant at one-second resolution.
using Instant = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_instant(Instant t);
Instant parse_instant(std::string_view text);

/// "YYYY-MM-DD"
std::string format_date(Date d);
Date parse_date(std::string_view text);

inline Instant start_of(Date d) { return Instant{std::chrono::sys_days{d}}; }

Instant now_utc();

}  // namespace wba

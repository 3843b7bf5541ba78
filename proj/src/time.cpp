#include "wba/time.hpp"

#include <charconv>
#include <cstdio>

#include "wba/error.hpp"

namespace wba {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int v = 0;
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, v);
  if (ec != std::errc{} || ptr != first + len) {
    throw Error(Errc::parse_error, "bad date/time '" + std::string(whole) + "'");
  }
  return v;
}

Date checked_date(int y, int m, int d, std::string_view whole) {
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw Error(Errc::parse_error, "invalid date '" + std::string(whole) + "'");
  return date;
}

}  // namespace

std::string format_instant(Instant t) {
  auto days = std::chrono::floor<std::chrono::days>(t);
  Date d{days};
  std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Instant parse_instant(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    throw Error(Errc::parse_error, "expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(text) + "'");
  }
  Date d = checked_date(read_int(text, 0, 4, text), read_int(text, 5, 2, text),
                        read_int(text, 8, 2, text), text);
  int hh = read_int(text, 11, 2, text);
  int mm = read_int(text, 14, 2, text);
  int ss = read_int(text, 17, 2, text);
  if (hh > 23 || mm > 59 || ss > 59) {
    throw Error(Errc::parse_error, "invalid time '" + std::string(text) + "'");
  }
  return start_of(d) + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(Errc::parse_error, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  return checked_date(read_int(text, 0, 4, text), read_int(text, 5, 2, text),
                      read_int(text, 8, 2, text), text);
}

Instant now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace wba

#include "openstreets/dates.hpp"

#include <charconv>
#include <cstdio>

#include "openstreets/error.hpp"

namespace openstreets {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::BadValue, "malformed date '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

Date Date::parse(std::string_view text) {
  std::string_view day_part = text.substr(0, text.find_first_of("T "));
  if (day_part.size() != 10 || day_part[4] != '-' || day_part[7] != '-') {
    throw Error(ErrorCode::BadValue, "malformed date '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_int(day_part.substr(0, 4), text)},
                           month{static_cast<unsigned>(parse_int(day_part.substr(5, 2), text))},
                           day{static_cast<unsigned>(parse_int(day_part.substr(8, 2), text))}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::BadValue, "invalid calendar date '" + std::string(text) + "'");
  }
  return Date(static_cast<int>(sys_days{ymd}.time_since_epoch().count()));
}

std::string Date::iso() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::weekday() const noexcept {
  using namespace std::chrono;
  return static_cast<int>(std::chrono::weekday{sys_days{days{days_}}}.iso_encoding()) - 1;
}

}  // namespace openstreets

#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace feederlab {

// All timestamps are naive civil time: one configured timezone per dataset,
// no DST transitions on the synthetic grid.

inline constexpr std::int64_t kStepMinutes = 15;
inline constexpr std::int64_t kMinutesPerDay = 1440;
inline constexpr std::int64_t kStepsPerDay = kMinutesPerDay / kStepMinutes;

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

inline int parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len) {
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9')
      throw std::invalid_argument("malformed date/time field: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace detail

/// Calendar day, stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  auto operator<=>(const Date&) const = default;

  static Date from_ymd(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                       std::chrono::day{day}};
    if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
    return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
  }

  std::chrono::year_month_day ymd() const {
    using namespace std::chrono;
    return year_month_day{sys_days{std::chrono::days{days}}};
  }

  /// 1-based day of year (Jan 1 -> 1).
  int day_of_year() const {
    auto d = ymd();
    Date jan1 = from_ymd(static_cast<int>(d.year()), 1, 1);
    return days - jan1.days + 1;
  }

  /// 0 = Monday ... 6 = Sunday.
  int weekday() const {
    using namespace std::chrono;
    std::chrono::weekday wd{sys_days{std::chrono::days{days}}};
    return static_cast<int>(wd.iso_encoding()) - 1;
  }

  Date next() const { return Date{days + 1}; }

  std::string to_string() const {
    auto d = ymd();
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
  }

  // Expects YYYY-MM-DD.
  static Date parse(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
      throw std::invalid_argument("expected YYYY-MM-DD date: " + std::string(s));
    int y = detail::parse_fixed_int(s, 0, 4);
    int m = detail::parse_fixed_int(s, 5, 2);
    int d = detail::parse_fixed_int(s, 8, 2);
    return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  }
};

/// Point on the civil time axis with minute precision.
struct Timestamp {
  std::int64_t minutes = 0;  // since 1970-01-01T00:00

  auto operator<=>(const Timestamp&) const = default;

  static Timestamp from(Date date, int minute_of_day = 0) {
    return Timestamp{static_cast<std::int64_t>(date.days) * kMinutesPerDay + minute_of_day};
  }

  Date date() const {
    return Date{static_cast<std::int32_t>(detail::floor_div(minutes, kMinutesPerDay))};
  }

  int minute_of_day() const {
    std::int64_t m = minutes - static_cast<std::int64_t>(date().days) * kMinutesPerDay;
    return static_cast<int>(m);
  }

  Timestamp plus_minutes(std::int64_t m) const { return Timestamp{minutes + m}; }

  std::string to_string() const {
    Date d = date();
    int mod = minute_of_day();
    char buf[32];
    auto ymd = d.ymd();
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), mod / 60, mod % 60);
    return buf;
  }

  // Expects YYYY-MM-DDTHH:MM (seconds, if present, must be zero).
  static Timestamp parse(std::string_view s) {
    if (s.size() < 16 || (s[10] != 'T' && s[10] != ' '))
      throw std::invalid_argument("expected ISO-8601 minute timestamp: " + std::string(s));
    Date d = Date::parse(s.substr(0, 10));
    int hh = detail::parse_fixed_int(s, 11, 2);
    int mm = detail::parse_fixed_int(s, 14, 2);
    if (s.size() > 16) {
      if (s.size() != 19 || s[16] != ':' || detail::parse_fixed_int(s, 17, 2) != 0)
        throw std::invalid_argument("sub-minute timestamp not supported: " + std::string(s));
    }
    if (hh > 23 || mm > 59)
      throw std::invalid_argument("time of day out of range: " + std::string(s));
    return from(d, hh * 60 + mm);
  }
};

}  // namespace feederlab

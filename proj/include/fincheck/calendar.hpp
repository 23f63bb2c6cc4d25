#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace fincheck {

/// ISO-8601 calendar date, day granularity (regulatory deadlines in the
/// corpus are day-granular; no time-of-day support).
class Date {
public:
  Date() = default;

  /// Strict "YYYY-MM-DD"; must be a real calendar date.
  static std::optional<Date> parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto digits = [&](size_t from, size_t count, int& out) {
      out = 0;
      for (size_t i = from; i < from + count; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
        out = out * 10 + (text[i] - '0');
      }
      return true;
    };
    int y, m, d;
    if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(unsigned(m)),
                                    std::chrono::day(unsigned(d))};
    if (!ymd.ok()) return std::nullopt;
    Date date;
    date.days_ = std::chrono::sys_days(ymd).time_since_epoch().count();
    return date;
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{std::chrono::sys_days(std::chrono::days(days_))};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
  }

  std::int64_t days_since_epoch() const { return days_; }

  friend bool operator==(const Date&, const Date&) = default;
  friend std::strong_ordering operator<=>(const Date&, const Date&) = default;

  /// Signed day count from `a` to `b` (positive when b is later).
  friend std::int64_t days_between(const Date& a, const Date& b) { return b.days_ - a.days_; }

private:
  std::int64_t days_ = 0;
};

}  // namespace fincheck

#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace openstreets {

/// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  explicit constexpr Date(int days_since_epoch) : days_(days_since_epoch) {}

  /// Accepts `YYYY-MM-DD`, optionally followed by a time part (`T...` or ` ...`),
  /// which is ignored. Throws Error(BadValue) on malformed input.
  static Date parse(std::string_view text);

  std::string iso() const;
  int days_since_epoch() const noexcept { return days_; }
  /// 0 = Monday ... 6 = Sunday.
  int weekday() const noexcept;
  bool weekend() const noexcept { return weekday() >= 5; }

  Date operator+(int days) const noexcept { return Date(days_ + days); }
  int operator-(Date other) const noexcept { return days_ - other.days_; }
  auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

}  // namespace openstreets

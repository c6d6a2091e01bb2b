#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace nsm {

struct EntityId {
  std::uint32_t index = 0;
  auto operator<=>(const EntityId&) const = default;
};

struct PropertyId {
  std::uint32_t index = 0;
  auto operator<=>(const PropertyId&) const = default;
};

struct Number {
  double value = 0.0;
  auto operator<=>(const Number&) const = default;
};

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;
  auto operator<=>(const Date&) const = default;
};

// An object position in a triple. Only Number/Number and Date/Date pairs
// are ordered for ArgMax/ArgMin; the variant ordering below is a container
// order and carries no meaning for entities.
using Value = std::variant<EntityId, Number, Date>;

// Sorted, duplicate-free.
using ValueSet = std::vector<Value>;

inline bool is_entity(const Value& v) { return std::holds_alternative<EntityId>(v); }

inline ValueSet make_value_set(std::vector<Value> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

inline bool set_contains(const ValueSet& set, const Value& v) {
  return std::binary_search(set.begin(), set.end(), v);
}

inline ValueSet set_union(const ValueSet& a, const ValueSet& b) {
  ValueSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline ValueSet set_intersection(const ValueSet& a, const ValueSet& b) {
  ValueSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool sets_intersect(const ValueSet& a, const ValueSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

inline std::optional<Number> parse_number(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last || !std::isfinite(v)) return std::nullopt;
  return Number{v};
}

// Shortest representation that parses back to the same double.
inline std::string format_number(Number n) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), n.value);
  return std::string(buf.data(), ptr);
}

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return (m == 2 && is_leap_year(y)) ? 29 : kDays[m - 1];
}

// Accepts YYYY-M-D with or without zero padding.
inline std::optional<Date> parse_date(std::string_view text) {
  int parts[3] = {0, 0, 0};
  const char* p = text.data();
  const char* end = p + text.size();
  for (int i = 0; i < 3; ++i) {
    auto [next, ec] = std::from_chars(p, end, parts[i]);
    if (ec != std::errc{} || next == p) return std::nullopt;
    p = next;
    if (i < 2) {
      if (p == end || *p != '-') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  Date d{parts[0], parts[1], parts[2]};
  if (d.year < 0 || d.month < 1 || d.month > 12) return std::nullopt;
  if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
  return d;
}

inline std::string format_date(Date d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace nsm

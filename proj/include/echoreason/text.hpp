#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace echoreason {

using json = nlohmann::json;

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
std::string_view trim(std::string_view s) noexcept;
bool icontains(std::string_view haystack, std::string_view needle);

// Fixed two decimals with one trailing zero dropped: 1.0, 4.6, 4.64.
std::string format_value(double v);
std::string format_fixed(double v, int decimals);

// JSON text that never throws on invalid UTF-8 in user-supplied strings.
std::string dump_json(const json& j, int indent = -1);

// A number found in free text, with the unit that follows it (if any).
// Units are normalized to "cm", "mm", "%" or empty.
struct NumericClaim {
  double value = 0.0;
  int decimals = 0;
  std::string unit;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Scans prose for numeric claims. Digits glued to a preceding letter
// ("A4C", "LVID_d2") are not numbers; in a range such as "0.6–1.0 cm" the
// lower bound inherits the unit of the upper bound.
std::vector<NumericClaim> extract_numbers(std::string_view text);

// Every number mentioned by a JSON value: numeric leaves, plus numbers found
// inside string leaves.
std::vector<double> collect_numbers(const json& value);

}  // namespace echoreason

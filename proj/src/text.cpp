#include "echoreason/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace echoreason {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return is_alpha(c) || is_digit(c) || c == '_'; }

std::size_t skip_spaces(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return i;
}

bool unit_at(std::string_view s, std::size_t i, std::string_view unit) {
  if (s.substr(i, unit.size()) != unit) return false;
  const std::size_t end = i + unit.size();
  return end >= s.size() || !is_alpha(s[end]);
}

// Length of a range separator at i ("-", en/em dash, "to"), or 0.
std::size_t range_separator(std::string_view s, std::size_t i) {
  if (i >= s.size()) return 0;
  if (s[i] == '-') return 1;
  if (s.substr(i, 3) == "\xE2\x80\x93" || s.substr(i, 3) == "\xE2\x80\x94") return 3;
  if (s.substr(i, 2) == "to" && (i + 2 >= s.size() || !is_alpha(s[i + 2]))) return 2;
  return 0;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

std::string_view trim(std::string_view s) noexcept {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool icontains(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_value(double v) {
  std::string s = format_fixed(v, 2);
  if (s.size() > 3 && s.back() == '0' && s[s.size() - 3] == '.') s.pop_back();
  return s;
}

std::string dump_json(const json& j, int indent) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::vector<NumericClaim> extract_numbers(std::string_view text) {
  std::vector<NumericClaim> claims;
  std::vector<bool> ranged_to_next;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool starts_number =
        is_digit(text[i]) || (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]));
    const bool glued = i > 0 && (is_word(text[i - 1]) || text[i - 1] == '.');
    if (!starts_number || glued) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    int decimals = 0;
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
      ++i;
      while (i < text.size() && is_digit(text[i])) {
        ++i;
        ++decimals;
      }
    }
    NumericClaim claim;
    claim.value = std::strtod(std::string(text.substr(begin, i - begin)).c_str(), nullptr);
    claim.decimals = decimals;
    claim.offset = begin;
    claim.length = i - begin;

    std::size_t j = skip_spaces(text, i);
    if (unit_at(text, j, "cm")) {
      claim.unit = "cm";
    } else if (unit_at(text, j, "mm")) {
      claim.unit = "mm";
    } else if (j < text.size() && text[j] == '%') {
      claim.unit = "%";
    }

    bool ranged = false;
    if (claim.unit.empty()) {
      const std::size_t sep = range_separator(text, j);
      if (sep > 0) {
        const std::size_t k = skip_spaces(text, j + sep);
        ranged = k < text.size() && is_digit(text[k]);
      }
    }
    claims.push_back(std::move(claim));
    ranged_to_next.push_back(ranged);
  }
  for (std::size_t c = claims.size(); c-- > 1;) {
    if (ranged_to_next[c - 1] && claims[c - 1].unit.empty()) claims[c - 1].unit = claims[c].unit;
  }
  return claims;
}

std::vector<double> collect_numbers(const json& value) {
  std::vector<double> out;
  auto visit = [&out](const json& v, auto&& self) -> void {
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_string()) {
      for (const auto& c : extract_numbers(v.get_ref<const std::string&>())) out.push_back(c.value);
    } else if (v.is_array() || v.is_object()) {
      for (const auto& child : v) self(child, self);
    }
  };
  visit(value, visit);
  return out;
}

}  // namespace echoreason

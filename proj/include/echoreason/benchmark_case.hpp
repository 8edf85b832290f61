#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echoreason/text.hpp"

namespace echoreason {

enum class Difficulty { Easy, Medium, Difficult };

std::string_view difficulty_name(Difficulty d) noexcept;
std::optional<Difficulty> parse_difficulty(std::string_view name);

// Per-value numeric tolerance: the larger of an absolute and a relative bound.
struct Tolerance {
  double abs = 0.2;
  double rel = 0.10;

  double for_value(double gold) const;
};

inline constexpr Tolerance kLengthTolerance{0.2, 0.10};
inline constexpr Tolerance kRatioTolerance{0.05, 0.10};

struct GoldValue {
  std::string name;
  double value = 0.0;
  std::string unit;  // "cm" or empty for ratios
  double tolerance = 0.0;
};

struct GoldAnswer {
  std::string text;
  std::vector<GoldValue> values;
  std::optional<std::string> label;
  std::vector<std::string> label_set;
};

struct BenchmarkCase {
  std::string case_id;
  std::string study_id;
  std::string question;
  GoldAnswer gold;
  Tolerance tolerance;
  Difficulty difficulty = Difficulty::Easy;
  std::string template_id;
  std::string notes;
};

json case_to_json(const BenchmarkCase& c);
BenchmarkCase case_from_json(const json& record);

// Line-delimited records, one case per line.
void write_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkCase>& cases);
std::vector<BenchmarkCase> read_benchmark(const std::filesystem::path& path);

}  // namespace echoreason

#include "echoreason/benchmark_case.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "echoreason/error.hpp"

namespace echoreason {

std::string_view difficulty_name(Difficulty d) noexcept {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Difficult: return "difficult";
  }
  return "easy";
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
  for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) {
    if (iequals(difficulty_name(d), name)) return d;
  }
  return std::nullopt;
}

double Tolerance::for_value(double gold) const { return std::max(abs, rel * std::fabs(gold)); }

json case_to_json(const BenchmarkCase& c) {
  json values = json::array();
  for (const auto& v : c.gold.values) {
    values.push_back({{"name", v.name}, {"value", v.value}, {"unit", v.unit}, {"tolerance", v.tolerance}});
  }
  json gold = {{"text", c.gold.text}, {"values", values}};
  gold["label"] = c.gold.label ? json(*c.gold.label) : json(nullptr);
  gold["label_set"] = c.gold.label_set;
  return {
      {"case_id", c.case_id},
      {"study_id", c.study_id},
      {"question", c.question},
      {"gold_answer", gold},
      {"tolerance", {{"abs", c.tolerance.abs}, {"rel", c.tolerance.rel}}},
      {"difficulty", std::string(difficulty_name(c.difficulty))},
      {"template", c.template_id},
      {"notes", c.notes},
  };
}

BenchmarkCase case_from_json(const json& r) {
  try {
    BenchmarkCase c;
    c.case_id = r.at("case_id").get<std::string>();
    c.study_id = r.at("study_id").get<std::string>();
    c.question = r.at("question").get<std::string>();
    const auto& gold = r.at("gold_answer");
    c.gold.text = gold.value("text", "");
    if (gold.contains("values")) {
      for (const auto& v : gold.at("values")) {
        c.gold.values.push_back({v.value("name", ""), v.at("value").get<double>(), v.value("unit", ""),
                                 v.at("tolerance").get<double>()});
      }
    }
    if (gold.contains("label") && gold["label"].is_string()) c.gold.label = gold["label"].get<std::string>();
    if (gold.contains("label_set")) c.gold.label_set = gold["label_set"].get<std::vector<std::string>>();
    if (r.contains("tolerance")) {
      c.tolerance = {r["tolerance"].value("abs", 0.2), r["tolerance"].value("rel", 0.1)};
    }
    const auto diff = r.at("difficulty").get<std::string>();
    auto d = parse_difficulty(diff);
    if (!d) throw Error(Errc::FormatError, "unknown difficulty '" + diff + "'");
    c.difficulty = *d;
    c.template_id = r.value("template", "");
    c.notes = r.value("notes", "");
    for (const auto& v : c.gold.values) {
      if (!(v.tolerance > 0.0)) throw Error(Errc::FormatError, "non-positive tolerance in " + c.case_id);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("benchmark record: ") + e.what());
  }
}

void write_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkCase>& cases) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  for (const auto& c : cases) out << dump_json(case_to_json(c)) << '\n';
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

std::vector<BenchmarkCase> read_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<BenchmarkCase> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) throw Error(Errc::FormatError, "invalid benchmark line in " + path.string());
    cases.push_back(case_from_json(record));
  }
  return cases;
}

}  // namespace echoreason

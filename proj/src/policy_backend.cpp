#include "echoreason/policy_backend.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "echoreason/reference_pack.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

namespace {

struct Recalled {
  std::string_view quantity;
  double lower;
  double upper;
};

constexpr Recalled kRecalled[] = {
    {"IVS", 0.6, 1.2},   {"LVPW", 0.6, 1.2},        {"LVID", 3.5, 6.0},    {"LA", 2.5, 4.5},  {"Aorta", 2.0, 4.0},
    {"Aortic root", 2.4, 4.0}, {"RV base", 2.0, 4.5}, {"RWT", 0.2, 0.45}, {"LA/Ao", 0.7, 1.6},
};

std::string call(std::string_view thought, const std::string& name, json args) {
  return std::string(thought) + "\n" + dump_json({{"name", name}, {"arguments", std::move(args)}});
}

std::string finish(std::string_view thought) { return call(thought, "FINISH", json::object()); }

std::string regex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::string_view("\\^$.|?*+()[]{}/").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

std::optional<std::pair<double, double>> parse_range(const std::string& text, std::string_view quantity) {
  const std::regex re("Normal range \\(" + regex_escape(quantity) +
                      "(?:, [a-z-]+)?\\):\\s*([0-9]+(?:\\.[0-9]+)?)\\s*(?:\xE2\x80\x93|-|to)\\s*([0-9]+(?:\\.[0-9]+)?)");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return std::pair{std::stod(m[1].str()), std::stod(m[2].str())};
}

// Facts recovered from the rendered history.
struct Observed {
  bool phases_tried = false;
  std::optional<std::pair<std::vector<int>, std::vector<int>>> phases;
  std::map<int, std::set<std::string>> feasible;  // frame -> measurable kind names
  std::map<std::pair<std::string, int>, std::optional<double>> measured;
  std::map<std::string, json> searches;  // query -> payload (null on error)
};

Observed observe(const std::vector<Message>& messages) {
  Observed o;
  for (std::size_t i = 2; i + 1 < messages.size(); i += 2) {
    if (messages[i].role != Role::Assistant) break;
    const auto action = extract_action(messages[i].content);
    if (!action.call_text) continue;
    const json c = json::parse(*action.call_text, nullptr, false);
    if (!c.is_object() || !c.contains("name") || !c["name"].is_string()) continue;
    const std::string& obs_text = messages[i + 1].content;
    const auto nl = obs_text.find('\n');
    const json obs = nl == std::string::npos ? json() : json::parse(obs_text.substr(nl + 1), nullptr, false);
    const bool ok = obs.is_object() && obs.value("status", "") == "ok";
    const json payload = ok ? obs["payload"] : json();
    const json args = c.value("arguments", json::object());
    const std::string name = c["name"];
    try {
      if (name == "detect_phases") {
        o.phases_tried = true;
        if (ok) o.phases = {payload.at("ed_frames").get<std::vector<int>>(), payload.at("es_frames").get<std::vector<int>>()};
      } else if (name == "predict_feasibility" && ok) {
        auto& set = o.feasible[payload.at("frame").get<int>()];
        for (const auto& n : payload.at("feasible")) set.insert(n.get<std::string>());
      } else if (name == "measure") {
        const auto key = std::pair{args.at("kind").get<std::string>(), args.at("frame").get<int>()};
        o.measured[key] = ok ? std::optional<double>(payload.at("value_cm").get<double>()) : std::nullopt;
      } else if (name == "search_guideline") {
        o.searches[args.at("query").get<std::string>()] = payload;
      }
    } catch (const json::exception&) {
      // Observations this policy did not produce are ignored.
    }
  }
  return o;
}

bool advertises(const std::vector<Message>& messages, std::string_view tool) {
  return !messages.empty() && messages.front().content.find("\"name\":\"" + std::string(tool) + "\"") != std::string::npos;
}

std::string search_query(const std::string& quantity) { return quantity + " normal range"; }

struct Resolution {
  std::optional<std::string> next;  // pending action, if any
  std::optional<double> value;
};

Resolution resolve(const QuestionPlan::Need& need, const Observed& o, bool use_feasibility) {
  const std::string name(kind_name(need.kind));
  const auto& frames = need.phase == Phase::ED ? o.phases->first : o.phases->second;
  if (frames.empty()) return {};
  auto measured = [&](int f) { return o.measured.find({name, f}); };
  auto measure_call = [&](int f, std::string_view why) {
    return call(why, "measure", {{"kind", name}, {"frame", f}});
  };
  if (use_feasibility) {
    for (int f : frames) {
      const auto feas = o.feasible.find(f);
      if (feas == o.feasible.end()) {
        return {call("Check which measurements are reliable on frame " + std::to_string(f) + ".", "predict_feasibility",
                     {{"frame", f}}),
                std::nullopt};
      }
      if (!feas->second.count(name)) continue;
      const auto m = measured(f);
      if (m == o.measured.end()) return {measure_call(f, name + " is measurable on frame " + std::to_string(f) + "."), {}};
      if (m->second) return {std::nullopt, m->second};
    }
  }
  const int first = frames.front();
  const auto m = measured(first);
  if (m == o.measured.end()) return {measure_call(first, "Measure " + name + " on frame " + std::to_string(first) + "."), {}};
  return {std::nullopt, m->second};
}

std::optional<std::pair<double, double>> looked_up_range(const Observed& o, const std::string& quantity) {
  const auto it = o.searches.find(search_query(quantity));
  if (it == o.searches.end() || !it->second.is_object()) return std::nullopt;
  for (const auto& hit : it->second.value("hits", json::array())) {
    if (auto r = parse_range(hit.value("text", ""), quantity)) return r;
  }
  return std::nullopt;
}

std::string compose_answer(const QuestionPlan& plan, const Observed& o, bool use_retrieval) {
  if (!o.phases) return "The cardiac phases could not be detected, so no measurement is available.";
  if (plan.needs.empty()) return "The question does not name a supported measurement.";
  std::vector<double> values;
  std::string text;
  for (const auto& need : plan.needs) {
    const auto r = resolve(need, o, false);
    std::optional<double> value = r.value;
    // With feasibility checks the value may come from a later key frame.
    if (!value) {
      const std::string name(kind_name(need.kind));
      const auto& frames = need.phase == Phase::ED ? o.phases->first : o.phases->second;
      for (int f : frames) {
        const auto m = o.measured.find({name, f});
        if (m != o.measured.end() && m->second) {
          value = m->second;
          break;
        }
      }
    }
    if (!value) {
      return "The " + std::string(kind_name(need.kind)) + " at " + std::string(phase_long_name(need.phase)) +
             " could not be measured reliably on this video.";
    }
    values.push_back(*value);
    if (!text.empty()) text += "; ";
    text += std::string(kind_name(need.kind)) + " at " + std::string(phase_long_name(need.phase)) + ": " +
            format_value(*value) + " cm";
  }
  double subject = values.empty() ? 0.0 : values.front();
  if (plan.derived == "RWT" && values.size() == 2) {
    subject = 2.0 * values[0] / values[1];
    text += "; RWT = " + format_value(subject);
  } else if (plan.derived == "LA/Ao" && values.size() == 2) {
    subject = values[0] / values[1];
    text += "; LA/Ao = " + format_value(subject);
  }
  if (plan.label) {
    auto range = use_retrieval ? looked_up_range(o, plan.quantity) : std::nullopt;
    if (!range) range = recalled_range(plan.quantity);
    if (range) text += ", which is " + classify_value(subject, range->first, range->second);
  }
  return text + ".";
}

}  // namespace

QuestionPlan parse_question(std::string_view question) {
  QuestionPlan plan;
  std::vector<std::pair<std::size_t, Kind>> mentions;
  for (const auto& k : measurement_kinds()) {
    const std::string token = "(" + std::string(k.name) + ")";
    for (auto p = question.find(token); p != std::string_view::npos; p = question.find(token, p + 1)) {
      mentions.emplace_back(p, k.kind);
    }
  }
  // Free-form questions: fall back to bare names at word boundaries.
  if (mentions.empty()) {
    const auto boundary = [&](std::size_t i) {
      return i >= question.size() || !std::isalnum(static_cast<unsigned char>(question[i]));
    };
    for (const auto& k : measurement_kinds()) {
      const std::string_view name = k.name;
      for (auto p = question.find(name); p != std::string_view::npos; p = question.find(name, p + 1)) {
        if ((p == 0 || boundary(p - 1)) && boundary(p + name.size())) mentions.emplace_back(p, k.kind);
      }
    }
  }
  std::sort(mentions.begin(), mentions.end());
  std::vector<std::vector<Phase>> phases(mentions.size());
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const std::size_t from = mentions[i].first;
    const std::size_t to = i + 1 < mentions.size() ? mentions[i + 1].first : question.size();
    const auto segment = question.substr(from, to - from);
    std::vector<std::pair<std::size_t, Phase>> found;
    for (auto [word, phase] : {std::pair{std::string_view("end-diastole"), Phase::ED},
                               std::pair{std::string_view("end-systole"), Phase::ES}}) {
      for (auto p = segment.find(word); p != std::string_view::npos; p = segment.find(word, p + 1)) found.emplace_back(p, phase);
    }
    std::sort(found.begin(), found.end());
    for (const auto& [_, ph] : found) phases[i].push_back(ph);
  }
  for (std::size_t i = mentions.size(); i-- > 0;) {
    if (phases[i].empty()) phases[i] = i + 1 < mentions.size() ? phases[i + 1] : std::vector<Phase>{Phase::ED};
  }
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    for (Phase ph : phases[i]) {
      const QuestionPlan::Need need{mentions[i].second, ph};
      if (std::find(plan.needs.begin(), plan.needs.end(), need) == plan.needs.end()) plan.needs.push_back(need);
    }
  }
  if (icontains(question, "relative wall thickness")) plan.derived = "RWT";
  else if (question.find("LA/Ao") != std::string_view::npos) plan.derived = "LA/Ao";
  plan.label = icontains(question, "classify");
  plan.quantity = !plan.derived.empty() ? plan.derived
                  : plan.needs.empty()  ? std::string()
                                        : std::string(kind_name(plan.needs.front().kind));
  return plan;
}

std::optional<std::pair<double, double>> recalled_range(std::string_view quantity) {
  for (const auto& r : kRecalled) {
    if (iequals(r.quantity, quantity)) return std::pair{r.lower, r.upper};
  }
  return std::nullopt;
}

std::string PolicyBackend::complete(const std::vector<Message>& messages) {
  if (messages.size() < 2) return finish("Nothing to do.");
  const bool use_feasibility = advertises(messages, "predict_feasibility");
  const bool use_retrieval = advertises(messages, "search_guideline");
  const auto plan = parse_question(messages[1].content);
  const auto o = observe(messages);

  if (is_answer_request(messages)) return compose_answer(plan, o, use_retrieval);

  if (!o.phases) {
    if (o.phases_tried) return finish("Phase detection failed; stopping.");
    return call("Locate the end-diastolic and end-systolic frames first.", "detect_phases", json::object());
  }
  for (const auto& need : plan.needs) {
    const auto r = resolve(need, o, use_feasibility);
    if (r.next) return *r.next;
    if (!r.value) return finish(std::string(kind_name(need.kind)) + " could not be measured; stopping.");
  }
  if (plan.label && use_retrieval && !o.searches.count(search_query(plan.quantity))) {
    return call("Look up the reference range for " + plan.quantity + ".", "search_guideline",
                {{"query", search_query(plan.quantity)}});
  }
  return finish("All requested evidence is available.");
}

}  // namespace echoreason

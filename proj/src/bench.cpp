#include "echoreason/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>
#include <thread>

#include "echoreason/rng.hpp"

namespace echoreason {

namespace {

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool contains_word(std::string_view text, std::string_view word) {
  const std::string hay = to_lower(text);
  const std::string needle = to_lower(word);
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) {
    const bool left = p == 0 || !is_letter(hay[p - 1]);
    const bool right = p + needle.size() >= hay.size() || !is_letter(hay[p + needle.size()]);
    if (left && right) return true;
  }
  return false;
}

std::optional<double> comparable(const NumericClaim& c, const GoldValue& g) {
  if (g.unit == "cm") {
    if (c.unit == "cm") return c.value;
    if (c.unit == "mm") return c.value / 10.0;
    return std::nullopt;
  }
  if (g.unit.empty() && c.unit.empty()) return c.value;
  if (g.unit == c.unit) return c.value;
  return std::nullopt;
}

// Bipartite matching of gold values to distinct claims (tiny sizes).
bool assign(std::size_t g, const std::vector<std::vector<bool>>& ok, std::vector<int>& owner,
            std::vector<bool>& seen) {
  for (std::size_t c = 0; c < owner.size(); ++c) {
    if (!ok[g][c] || seen[c]) continue;
    seen[c] = true;
    if (owner[c] < 0 || assign(static_cast<std::size_t>(owner[c]), ok, owner, seen)) {
      owner[c] = static_cast<int>(g);
      return true;
    }
  }
  return false;
}

PrfScores prf(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  PrfScores s;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

json prf_json(const PrfScores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed(double v, int decimals) { return format_fixed(v, decimals); }

std::string accuracy_cell(const Stratum& s) {
  const auto a = s.accuracy();
  return a ? fixed(*a, 2) : "n/a";
}

}  // namespace

std::string_view judge_kind_name(JudgeKind k) noexcept { return k == JudgeKind::Rule ? "rule" : "model"; }

Verdict judge_rule(std::string_view answer, const GoldAnswer& gold) {
  Verdict v;
  v.judge = JudgeKind::Rule;
  const auto claims = extract_numbers(answer);
  if (!gold.values.empty()) {
    if (claims.empty()) {
      v.rationale = "no numeric claim";
      return v;
    }
    std::vector<std::vector<bool>> ok(gold.values.size(), std::vector<bool>(claims.size(), false));
    for (std::size_t g = 0; g < gold.values.size(); ++g) {
      for (std::size_t c = 0; c < claims.size(); ++c) {
        const auto value = comparable(claims[c], gold.values[g]);
        ok[g][c] = value && std::fabs(*value - gold.values[g].value) <= gold.values[g].tolerance + 1e-9;
      }
    }
    std::vector<int> owner(claims.size(), -1);
    for (std::size_t g = 0; g < gold.values.size(); ++g) {
      std::vector<bool> seen(claims.size(), false);
      if (!assign(g, ok, owner, seen)) {
        const auto& gv = gold.values[g];
        v.rationale = "no claim within " + format_fixed(gv.tolerance, 3) + " of " + gv.name + " = " +
                      format_value(gv.value) + (gv.unit.empty() ? "" : " " + gv.unit);
        return v;
      }
    }
  }
  if (gold.label) {
    if (!contains_word(answer, *gold.label)) {
      v.rationale = "expected label '" + *gold.label + "' missing";
      return v;
    }
    for (const auto& other : gold.label_set) {
      if (other != *gold.label && contains_word(answer, other)) {
        v.rationale = "conflicting label '" + other + "'";
        return v;
      }
    }
  }
  v.correct = true;
  v.rationale = "all gold values matched" + std::string(gold.label ? " with label" : "");
  return v;
}

Verdict judge_numeric(std::string_view answer, const GoldValue& gold) {
  GoldAnswer g;
  g.values.push_back(gold);
  return judge_rule(answer, g);
}

std::vector<Message> judge_messages(std::string_view question, const GoldAnswer& gold, std::string_view answer) {
  std::string system =
      "You grade answers to echocardiography questions against a reference answer. A numeric value is correct "
      "when it lies within the stated tolerance of the reference and carries a compatible unit. When the "
      "reference includes a classification, the candidate must state the same classification. Reply with one "
      "line 'VERDICT: correct' or 'VERDICT: incorrect', optionally followed by a line starting with "
      "'RATIONALE:'.\nRubric version: ";
  system += kJudgeRubricVersion;
  std::string tolerance;
  for (const auto& g : gold.values) {
    if (!tolerance.empty()) tolerance += "; ";
    tolerance += g.name + " +/- " + format_fixed(g.tolerance, 3) + (g.unit.empty() ? "" : " " + g.unit);
  }
  std::string user = "Question: " + std::string(question) + "\nReference answer: " + gold.text +
                     "\nTolerance: " + (tolerance.empty() ? "none" : tolerance) +
                     "\nCandidate answer: " + std::string(answer);
  return {{Role::System, system}, {Role::User, user}};
}

Verdict parse_judge_reply(std::string_view reply) {
  static const std::regex verdict_re(R"(^\s*VERDICT:\s*(correct|incorrect)\s*\.?\s*$)", std::regex::icase);
  static const std::regex rationale_re(R"(^\s*RATIONALE:\s*(.*)$)", std::regex::icase);
  std::optional<bool> verdict;
  int verdict_lines = 0;
  std::string rationale;
  std::istringstream lines{std::string(reply)};
  std::string line;
  std::smatch m;
  while (std::getline(lines, line)) {
    if (std::regex_match(line, m, verdict_re)) {
      ++verdict_lines;
      verdict = iequals(m[1].str(), "correct");
    } else if (std::regex_match(line, m, rationale_re)) {
      rationale = m[1].str();
    }
  }
  if (verdict_lines != 1) throw Error(Errc::JudgeError, "judge reply has no single VERDICT line");
  return {*verdict, JudgeKind::Model, rationale};
}

Verdict judge_model(std::string_view question, const GoldAnswer& gold, std::string_view answer, Backend& backend) {
  std::string reply;
  try {
    reply = backend.complete(judge_messages(question, gold, answer));
  } catch (const Error& e) {
    throw Error(Errc::JudgeError, std::string("judge backend failed: ") + e.what());
  }
  return parse_judge_reply(reply);
}

std::string_view failure_name(FailureClass f) noexcept {
  switch (f) {
    case FailureClass::None:
      return "none";
    case FailureClass::ToolCalling:
      return "tool_calling";
    case FailureClass::ToolMeasurement:
      return "tool_measurement";
    case FailureClass::FinalConclusion:
      return "final_conclusion";
  }
  return "none";
}

std::size_t protocol_error_count(const std::vector<HistoryEntry>& history) {
  std::size_t n = 0;
  for (const auto& h : history) {
    if (h.result.error && h.result.error->kind != ProtocolErrorClass::ExecutionFailure) ++n;
  }
  return n;
}

FailureClass classify_failure(const std::vector<HistoryEntry>& history, const Verdict& verdict,
                              const EchoStudy* study, const Tolerance& tolerance) {
  if (verdict.correct) return FailureClass::None;
  if (protocol_error_count(history) > 0) return FailureClass::ToolCalling;
  if (study != nullptr) {
    std::vector<std::pair<int, Phase>> keys;
    for (Phase p : {Phase::ED, Phase::ES}) {
      for (int f : study->key_frames(p)) keys.emplace_back(f, p);
    }
    for (const auto& h : history) {
      if (!h.result.ok || h.action.name != "measure" || keys.empty()) continue;
      const auto m = measurement_from_json(h.result.payload);
      if (!m) continue;
      const auto values = study->cycle.values.find(m->kind);
      if (values == study->cycle.values.end()) continue;
      const auto nearest = std::min_element(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.first - m->frame) < std::abs(b.first - m->frame);
      });
      const double truth = values->second.at(nearest->second);
      if (std::fabs(m->value_cm - truth) > tolerance.for_value(truth) + 1e-9) return FailureClass::ToolMeasurement;
    }
  }
  return FailureClass::FinalConclusion;
}

FeasibilityMetrics feasibility_metrics(std::span<const FeasibilityVector> truth,
                                       std::span<const FeasibilityVector> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(Errc::MetricsError, "feasibility truth/prediction length mismatch (" + std::to_string(truth.size()) +
                                        " vs " + std::to_string(predicted.size()) + ")");
  }
  FeasibilityMetrics m;
  m.frames = truth.size();
  std::array<std::uint64_t, kKindCount> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < kKindCount; ++j) {
      const bool t = truth[i].test(j);
      const bool p = predicted[i].test(j);
      tp[j] += t && p;
      fp[j] += !t && p;
      fn[j] += t && !p;
      m.support[j] += t;
    }
  }
  std::uint64_t TP = 0, FP = 0, FN = 0;
  int supported = 0;
  for (std::size_t j = 0; j < kKindCount; ++j) {
    TP += tp[j];
    FP += fp[j];
    FN += fn[j];
    m.per_kind[j] = prf(tp[j], fp[j], fn[j]);
    if (m.support[j] == 0) continue;
    ++supported;
    m.macro.precision += m.per_kind[j].precision;
    m.macro.recall += m.per_kind[j].recall;
    m.macro.f1 += m.per_kind[j].f1;
  }
  if (supported > 0) {
    m.macro.precision /= supported;
    m.macro.recall /= supported;
    m.macro.f1 /= supported;
  }
  m.micro = prf(TP, FP, FN);
  return m;
}

double frame_mae(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& predicted) {
  if (truth.size() != predicted.size()) throw Error(Errc::MetricsError, "frame truth/prediction video count mismatch");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (truth[v].empty()) continue;
    if (predicted[v].empty()) throw Error(Errc::MetricsError, "video " + std::to_string(v) + " has no predicted frame");
    for (int t : truth[v]) {
      int best = std::abs(predicted[v].front() - t);
      for (int p : predicted[v]) best = std::min(best, std::abs(p - t));
      total += best;
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::MetricsError, "no ground-truth frames");
  return total / static_cast<double>(n);
}

std::map<Kind, KindError> measurement_mae(std::span<const MeasurementSample> samples) {
  std::map<Kind, KindError> out;
  for (const auto& s : samples) {
    auto& e = out[s.kind];
    e.mae += std::fabs(s.predicted - s.truth);
    ++e.count;
  }
  for (auto& [_, e] : out) e.mae /= static_cast<double>(e.count);
  return out;
}

json tool_metrics_to_json(const ToolMetrics& m) {
  json meas = json::object();
  for (const auto& [k, e] : m.measurement) meas[std::string(kind_name(k))] = {{"mae_cm", e.mae}, {"count", e.count}};
  json out = {{"measurement", meas},
              {"phase", {{"ed_frame_mae", optional_number(m.ed_frame_mae)}, {"es_frame_mae", optional_number(m.es_frame_mae)}}}};
  if (m.feasibility) {
    out["feasibility"] = {{"frames", m.feasibility->frames},
                          {"micro", prf_json(m.feasibility->micro)},
                          {"macro", prf_json(m.feasibility->macro)}};
  } else {
    out["feasibility"] = nullptr;
  }
  return out;
}

ToolMetrics evaluate_tool_outputs(const std::vector<CaseOutcome>& outcomes, const StudyCatalog& catalog) {
  ToolMetrics out;
  std::vector<MeasurementSample> samples;
  std::vector<FeasibilityVector> truth, pred;
  std::vector<std::vector<int>> ed_truth, ed_pred, es_truth, es_pred;
  for (const auto& c : outcomes) {
    const EchoStudy* s = catalog.find(c.study_id);
    if (s == nullptr) continue;
    for (const auto& h : c.history) {
      if (!h.result.ok) continue;
      const auto& p = h.result.payload;
      try {
        if (h.action.name == "measure") {
          const auto m = measurement_from_json(p);
          if (m && s->cycle.values.count(m->kind)) samples.push_back({m->kind, m->value_cm, s->true_value(m->kind, m->frame)});
        } else if (h.action.name == "predict_feasibility") {
          FeasibilityVector y;
          const auto& bits = p.at("vector");
          for (std::size_t j = 0; j < kKindCount && j < bits.size(); ++j) y.set(j, bits[j].get<int>() == 1);
          truth.push_back(s->feasibility(p.at("frame").get<int>()));
          pred.push_back(y);
        } else if (h.action.name == "detect_phases") {
          const auto ed = p.at("ed_frames").get<std::vector<int>>();
          const auto es = p.at("es_frames").get<std::vector<int>>();
          if (!ed.empty()) {
            ed_truth.push_back(s->key_frames(Phase::ED));
            ed_pred.push_back(ed);
          }
          if (!es.empty()) {
            es_truth.push_back(s->key_frames(Phase::ES));
            es_pred.push_back(es);
          }
        }
      } catch (const json::exception&) {
        // Payloads from other tool implementations are skipped.
      }
    }
  }
  out.measurement = measurement_mae(samples);
  if (!truth.empty()) out.feasibility = feasibility_metrics(truth, pred);
  if (!ed_truth.empty()) out.ed_frame_mae = frame_mae(ed_truth, ed_pred);
  if (!es_truth.empty()) out.es_frame_mae = frame_mae(es_truth, es_pred);
  return out;
}

ToolMetrics evaluate_tools_on_studies(std::span<const EchoStudy> studies, const ToolSuiteOptions& tools) {
  std::optional<VisionAdapter> adapter;
  if (tools.adapter) adapter.emplace(*tools.adapter);
  ToolMetrics out;
  std::vector<MeasurementSample> samples;
  std::vector<FeasibilityVector> truth, pred;
  std::vector<std::vector<int>> ed_truth, ed_pred, es_truth, es_pred;
  for (const auto& s : studies) {
    const PhaseResult phases = adapter ? adapter->detect_phases(s) : detect_phases(s, tools.noise);
    const auto ed = s.key_frames(Phase::ED);
    const auto es = s.key_frames(Phase::ES);
    if (!ed.empty() && !phases.ed_frames.empty()) {
      ed_truth.push_back(ed);
      ed_pred.push_back(phases.ed_frames);
    }
    if (!es.empty() && !phases.es_frames.empty()) {
      es_truth.push_back(es);
      es_pred.push_back(phases.es_frames);
    }
    for (Phase phase : {Phase::ED, Phase::ES}) {
      for (int f : phase == Phase::ED ? ed : es) {
        // Frames with no feasible kind are left out, as in the calibration counts.
        if (tools.flags.feasibility && s.feasibility(f).any()) {
          truth.push_back(s.feasibility(f));
          pred.push_back(adapter ? adapter->predict_feasibility(s, f).predicted
                                 : predict_feasibility(s, f, tools.noise).predicted);
        }
        for (Kind k : evaluated_kinds()) {
          if (!s.kind_present(k)) continue;
          try {
            const Measurement m = adapter ? adapter->measure(s, f, k) : measure(s, f, k, tools.noise);
            samples.push_back({k, m.value_cm, s.cycle.values.at(k).at(phase)});
          } catch (const Error& e) {
            if (e.code() != Errc::NotMeasurable) throw;
          }
        }
      }
    }
  }
  out.measurement = measurement_mae(samples);
  if (!truth.empty()) out.feasibility = feasibility_metrics(truth, pred);
  if (!ed_truth.empty()) out.ed_frame_mae = frame_mae(ed_truth, ed_pred);
  if (!es_truth.empty()) out.es_frame_mae = frame_mae(es_truth, es_pred);
  return out;
}

std::string_view case_state_name(CaseState s) noexcept {
  switch (s) {
    case CaseState::Judged:
      return "judged";
    case CaseState::Error:
      return "error";
    case CaseState::JudgeError:
      return "judge_error";
  }
  return "judged";
}

json run_config_json(const AgentSetup& agent, const JudgeConfig& judge, const RunOptions& options,
                     std::span<const BenchmarkCase> cases) {
  std::string case_bytes;
  for (const auto& c : cases) case_bytes += dump_json(case_to_json(c)) + "\n";
  std::string corpus;
  if (agent.guidelines != nullptr) {
    for (const auto& p : agent.guidelines->passages()) corpus += p.passage_id + "\n" + p.text + "\n";
  }
  return {{"prompt_version", kPromptVersion},
          {"prompt_hash", prompt_fingerprint()},
          {"backend", agent.backend_name},
          {"budget", agent.budget},
          {"flags", {{"feasibility", agent.tools.flags.feasibility}, {"retrieval", agent.tools.flags.retrieval}}},
          {"tools", agent.tools.adapter ? "external" : "oracle"},
          {"noise", noise_to_json(agent.tools.noise)},
          {"judge", {{"kind", judge_kind_name(judge.kind)}, {"rubric", kJudgeRubricVersion}}},
          {"seed", options.seed},
          {"cases", {{"count", cases.size()}, {"hash", hex64(fnv1a(case_bytes))}}},
          {"guidelines", agent.guidelines ? json(hex64(fnv1a(corpus))) : json(nullptr)}};
}

namespace {

CaseOutcome run_case(const BenchmarkCase& bc, const StudyCatalog& catalog, const ToolRegistry& registry,
                     const AgentSetup& agent, const JudgeConfig& judge) {
  const auto start = std::chrono::steady_clock::now();
  CaseOutcome out;
  out.case_id = bc.case_id;
  out.study_id = bc.study_id;
  out.template_id = bc.template_id;
  out.difficulty = bc.difficulty;
  auto finish = [&]() {
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  };

  const EchoStudy* study = catalog.find(bc.study_id);
  if (study == nullptr) {
    out.state = CaseState::Error;
    out.error = "study " + bc.study_id + " not found";
    return finish();
  }
  auto backend = agent.backend();
  AgentEnvironment env;
  env.registry = &registry;
  env.context = {study, agent.guidelines};
  env.backend = backend.get();

  SessionState state;
  try {
    state = run_session(bc.question, bc.study_id, env, agent.budget, bc.case_id);
  } catch (const SessionError& e) {
    state = e.partial();
    out.state = CaseState::Error;
    out.error = e.what();
  } catch (const Error& e) {
    out.state = CaseState::Error;
    out.error = e.what();
  }
  out.status = state.status;
  out.steps = static_cast<std::size_t>(state.step);
  out.round_trips = state.round_trips;
  out.protocol_errors = protocol_error_count(state.history);
  out.trace = state.events;
  out.history = state.history;
  if (out.state == CaseState::Error) return finish();

  out.answer = state.answer ? state.answer->text : std::string();
  out.grounded = state.answer ? state.answer->grounded() : true;
  try {
    if (judge.kind == JudgeKind::Model) {
      if (!judge.backend) throw Error(Errc::JudgeError, "model judge has no backend");
      auto jb = judge.backend();
      out.verdict = judge_model(bc.question, bc.gold, out.answer, *jb);
    } else {
      out.verdict = judge_rule(out.answer, bc.gold);
    }
  } catch (const Error& e) {
    out.state = CaseState::JudgeError;
    out.error = e.what();
    return finish();
  }
  out.failure = classify_failure(state.history, *out.verdict, study, bc.tolerance);
  return finish();
}

}  // namespace

RunReport run_benchmark(const std::vector<BenchmarkCase>& cases, const StudyCatalog& catalog, const AgentSetup& agent,
                        const JudgeConfig& judge, const RunOptions& options) {
  if (!agent.backend) throw Error(Errc::ConfigError, "benchmark run needs a backend factory");
  const auto start = std::chrono::steady_clock::now();
  const ToolRegistry registry = build_tool_registry(agent.tools);

  std::vector<const BenchmarkCase*> ordered;
  for (const auto& c : cases) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const BenchmarkCase* a, const BenchmarkCase* b) { return a->case_id < b->case_id; });

  RunReport report;
  report.cases.resize(ordered.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < ordered.size(); i = next++) {
      report.cases[i] = run_case(*ordered[i], catalog, registry, agent, judge);
    }
  };
  const int threads = std::clamp(options.parallelism, 1, 64);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) report.by_difficulty[d] = {};
  for (FailureClass f : {FailureClass::ToolCalling, FailureClass::FinalConclusion, FailureClass::ToolMeasurement}) {
    report.failures[f] = 0;
  }
  for (const auto& c : report.cases) {
    auto& tier = report.by_difficulty[c.difficulty];
    ++report.overall.total;
    ++tier.total;
    report.protocol_error_steps += static_cast<int>(c.protocol_errors);
    if (c.state == CaseState::Error) {
      ++report.errors;
      continue;
    }
    if (c.state == CaseState::JudgeError) {
      ++report.judge_errors;
      continue;
    }
    ++report.overall.judged;
    ++tier.judged;
    if (!c.grounded) ++report.ungrounded_answers;
    if (c.verdict->correct) {
      ++report.overall.correct;
      ++tier.correct;
    } else {
      ++report.failures[c.failure];
    }
  }
  report.tool_metrics = evaluate_tool_outputs(report.cases, catalog);
  report.config = run_config_json(agent, judge, options, cases);
  report.fingerprint = hex64(fnv1a(dump_json(report.config)));
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

json report_to_json(const RunReport& r, bool include_timing) {
  auto stratum = [](const Stratum& s) {
    return json{{"total", s.total}, {"judged", s.judged}, {"correct", s.correct}, {"accuracy", optional_number(s.accuracy())}};
  };
  json tiers = json::object();
  for (const auto& [d, s] : r.by_difficulty) tiers[std::string(difficulty_name(d))] = stratum(s);
  json failures = json::object();
  for (const auto& [f, n] : r.failures) failures[std::string(failure_name(f))] = n;

  json cases = json::array();
  json timing_cases = json::object();
  for (const auto& c : r.cases) {
    json j = {{"case_id", c.case_id},
              {"study_id", c.study_id},
              {"template", c.template_id},
              {"difficulty", difficulty_name(c.difficulty)},
              {"state", case_state_name(c.state)},
              {"status", status_name(c.status)},
              {"answer", c.answer},
              {"grounded", c.grounded},
              {"steps", c.steps},
              {"round_trips", c.round_trips},
              {"protocol_errors", c.protocol_errors},
              {"failure", failure_name(c.failure)},
              {"trace", trace_to_json(c.trace)}};
    if (c.verdict) {
      j["verdict"] = {{"correct", c.verdict->correct},
                      {"judge", judge_kind_name(c.verdict->judge)},
                      {"rationale", c.verdict->rationale}};
    } else {
      j["verdict"] = nullptr;
    }
    if (!c.error.empty()) j["error"] = c.error;
    cases.push_back(std::move(j));
    timing_cases[c.case_id] = c.seconds;
  }
  json out = {{"fingerprint", r.fingerprint},
              {"config", r.config},
              {"summary",
               {{"overall", stratum(r.overall)},
                {"by_difficulty", tiers},
                {"failures", failures},
                {"errors", r.errors},
                {"judge_errors", r.judge_errors},
                {"protocol_error_steps", r.protocol_error_steps},
                {"ungrounded_answers", r.ungrounded_answers}}},
              {"tool_metrics", tool_metrics_to_json(r.tool_metrics)},
              {"cases", cases}};
  if (include_timing) out["timing"] = {{"wall_seconds", r.wall_seconds}, {"case_seconds", timing_cases}};
  return out;
}

std::string report_tables(const RunReport& r) {
  std::ostringstream os;
  char line[256];
  os << "Accuracy and failure analysis\n";
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %10s %14s %14s\n", "", "Overall", "Easy", "Medium", "Difficult",
                "Tool calling", "Final concl.");
  os << line;
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %10s %14d %14d\n", "run", accuracy_cell(r.overall).c_str(),
                accuracy_cell(r.by_difficulty.at(Difficulty::Easy)).c_str(),
                accuracy_cell(r.by_difficulty.at(Difficulty::Medium)).c_str(),
                accuracy_cell(r.by_difficulty.at(Difficulty::Difficult)).c_str(),
                r.failures.at(FailureClass::ToolCalling), r.failures.at(FailureClass::FinalConclusion));
  os << line;
  os << "excluded tool-measurement failures: " << r.failures.at(FailureClass::ToolMeasurement)
     << ", errors: " << r.errors << ", judge errors: " << r.judge_errors
     << ", protocol-error steps: " << r.protocol_error_steps << "\n\n";

  os << "Linear measurement MAE (cm)\n";
  for (Kind k : evaluated_kinds()) {
    const auto it = r.tool_metrics.measurement.find(k);
    std::snprintf(line, sizeof line, "  %-12s %8s  (n=%zu)\n", std::string(kind_name(k)).c_str(),
                  it == r.tool_metrics.measurement.end() ? "n/a" : fixed(it->second.mae, 3).c_str(),
                  it == r.tool_metrics.measurement.end() ? std::size_t{0} : it->second.count);
    os << line;
  }
  os << "\nFeasibility prediction\n";
  if (r.tool_metrics.feasibility) {
    const auto& f = *r.tool_metrics.feasibility;
    std::snprintf(line, sizeof line, "  %-6s %9s %7s %7s\n", "", "Precision", "Recall", "F1");
    os << line;
    for (const auto& [name, s] : {std::pair{"Micro", f.micro}, std::pair{"Macro", f.macro}}) {
      std::snprintf(line, sizeof line, "  %-6s %9s %7s %7s\n", name, fixed(s.precision, 2).c_str(),
                    fixed(s.recall, 2).c_str(), fixed(s.f1, 2).c_str());
      os << line;
    }
  } else {
    os << "  n/a\n";
  }
  os << "\nPhase detection frame MAE\n";
  os << "  ED " << (r.tool_metrics.ed_frame_mae ? fixed(*r.tool_metrics.ed_frame_mae, 2) : "n/a") << "\n";
  os << "  ES " << (r.tool_metrics.es_frame_mae ? fixed(*r.tool_metrics.es_frame_mae, 2) : "n/a") << "\n";
  return os.str();
}

std::vector<AblationRow> ablation_run(const std::vector<BenchmarkCase>& cases, const StudyCatalog& catalog,
                                      const AgentSetup& agent, const JudgeConfig& judge, const RunOptions& options) {
  std::vector<AblationRow> rows;
  for (const ToolFlags flags : {ToolFlags{false, false}, ToolFlags{false, true}, ToolFlags{true, false},
                                ToolFlags{true, true}}) {
    AgentSetup setup = agent;
    setup.tools.flags = flags;
    rows.push_back({flags, run_benchmark(cases, catalog, setup, judge, options)});
  }
  return rows;
}

json ablation_to_json(const std::vector<AblationRow>& rows, bool include_timing) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back({{"feasibility", row.flags.feasibility},
                   {"retrieval", row.flags.retrieval},
                   {"report", report_to_json(row.report, include_timing)}});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-10s %8s %8s %8s %10s\n", "Feasibility", "Retrieval", "Overall", "Easy",
                "Medium", "Difficult");
  os << line;
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::snprintf(line, sizeof line, "%-12s %-10s %8s %8s %8s %10s\n", row.flags.feasibility ? "yes" : "no",
                  row.flags.retrieval ? "yes" : "no", accuracy_cell(r.overall).c_str(),
                  accuracy_cell(r.by_difficulty.at(Difficulty::Easy)).c_str(),
                  accuracy_cell(r.by_difficulty.at(Difficulty::Medium)).c_str(),
                  accuracy_cell(r.by_difficulty.at(Difficulty::Difficult)).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace echoreason

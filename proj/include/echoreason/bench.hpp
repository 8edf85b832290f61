#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echoreason/agent_loop.hpp"
#include "echoreason/benchmark_case.hpp"
#include "echoreason/study_io.hpp"
#include "echoreason/tool_suite.hpp"

namespace echoreason {

// ---- judging ---------------------------------------------------------------

enum class JudgeKind { Rule, Model };
std::string_view judge_kind_name(JudgeKind k) noexcept;

struct Verdict {
  bool correct = false;
  JudgeKind judge = JudgeKind::Rule;
  std::string rationale;
};

// Correct iff every gold value is matched by a distinct unit-compatible
// number in the answer (mm converts to cm; unitless gold needs a unitless
// number) and, when a label is expected, that label appears and no other
// label from the set does.
Verdict judge_rule(std::string_view answer, const GoldAnswer& gold);
Verdict judge_numeric(std::string_view answer, const GoldValue& gold);

inline constexpr std::string_view kJudgeRubricVersion = "echoreason-judge/1";

std::vector<Message> judge_messages(std::string_view question, const GoldAnswer& gold, std::string_view answer);
// Expects a line "VERDICT: correct" or "VERDICT: incorrect"; anything else
// throws JudgeError.
Verdict parse_judge_reply(std::string_view reply);
Verdict judge_model(std::string_view question, const GoldAnswer& gold, std::string_view answer, Backend& backend);

// ---- failure taxonomy --------------------------------------------------------

enum class FailureClass { None, ToolCalling, ToolMeasurement, FinalConclusion };
std::string_view failure_name(FailureClass f) noexcept;

// Number of history entries rejected at the protocol boundary (Malformed,
// UnknownTool, InvalidArguments).
std::size_t protocol_error_count(const std::vector<HistoryEntry>& history);

// None when correct; ToolCalling when the history holds a protocol
// rejection; ToolMeasurement when an ok measurement differs from ground truth
// at its nearest key frame by more than the case tolerance; otherwise
// FinalConclusion.
FailureClass classify_failure(const std::vector<HistoryEntry>& history, const Verdict& verdict,
                              const EchoStudy* study, const Tolerance& tolerance);

// ---- tool metrics ------------------------------------------------------------

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct FeasibilityMetrics {
  PrfScores micro;
  PrfScores macro;  // mean over kinds with at least one positive label
  std::array<PrfScores, kKindCount> per_kind{};
  std::array<std::uint64_t, kKindCount> support{};
  std::uint64_t frames = 0;
};

// Throws MetricsError on length mismatch.
FeasibilityMetrics feasibility_metrics(std::span<const FeasibilityVector> truth,
                                       std::span<const FeasibilityVector> predicted);

// Mean over all ground-truth frames of the distance to the closest predicted
// frame of the same video. Throws MetricsError on length mismatch or when a
// video with ground-truth frames has no prediction.
double frame_mae(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& predicted);

struct MeasurementSample {
  Kind kind;
  double predicted;
  double truth;
};

struct KindError {
  double mae = 0.0;
  std::size_t count = 0;
};

std::map<Kind, KindError> measurement_mae(std::span<const MeasurementSample> samples);

// Tool outputs recorded in traces, scored against the studies' ground truth.
struct ToolMetrics {
  std::map<Kind, KindError> measurement;
  std::optional<FeasibilityMetrics> feasibility;
  std::optional<double> ed_frame_mae;
  std::optional<double> es_frame_mae;
};

json tool_metrics_to_json(const ToolMetrics& m);

// Runs the video tools directly over every study: phase detection once per
// clip, feasibility on each ED/ES frame that has a feasible kind, and a
// measurement of every present kind on each ED/ES frame, scored against
// ground truth.
ToolMetrics evaluate_tools_on_studies(std::span<const EchoStudy> studies, const ToolSuiteOptions& tools);

// ---- benchmark runs ----------------------------------------------------------

using BackendFactory = std::function<std::unique_ptr<Backend>()>;

struct AgentSetup {
  ToolSuiteOptions tools;
  int budget = kDefaultBudget;
  BackendFactory backend;
  std::string backend_name = "policy";
  const GuidelineIndex* guidelines = nullptr;
};

struct JudgeConfig {
  JudgeKind kind = JudgeKind::Rule;
  BackendFactory backend;  // required for the model judge
};

struct RunOptions {
  int parallelism = 1;
  std::uint64_t seed = 0;
};

enum class CaseState { Judged, Error, JudgeError };
std::string_view case_state_name(CaseState s) noexcept;

struct CaseOutcome {
  std::string case_id;
  std::string study_id;
  std::string template_id;
  Difficulty difficulty = Difficulty::Easy;
  CaseState state = CaseState::Judged;
  std::string error;
  std::optional<Verdict> verdict;
  FailureClass failure = FailureClass::None;
  std::string answer;
  SessionStatus status = SessionStatus::Running;
  std::size_t steps = 0;
  std::size_t round_trips = 0;
  std::size_t protocol_errors = 0;
  bool grounded = true;
  std::vector<HistoryEntry> history;
  std::vector<TraceEvent> trace;
  double seconds = 0.0;
};

struct Stratum {
  int total = 0;
  int judged = 0;
  int correct = 0;
  // Undefined (nullopt) when nothing was judged.
  std::optional<double> accuracy() const {
    return judged > 0 ? std::optional<double>(static_cast<double>(correct) / judged) : std::nullopt;
  }
};

struct RunReport {
  std::vector<CaseOutcome> cases;  // ordered by case_id
  Stratum overall;
  std::map<Difficulty, Stratum> by_difficulty;
  std::map<FailureClass, int> failures;
  int errors = 0;
  int judge_errors = 0;
  int protocol_error_steps = 0;
  int ungrounded_answers = 0;
  ToolMetrics tool_metrics;
  json config;
  std::string fingerprint;
  double wall_seconds = 0.0;
};

json run_config_json(const AgentSetup& agent, const JudgeConfig& judge, const RunOptions& options,
                     std::span<const BenchmarkCase> cases);

RunReport run_benchmark(const std::vector<BenchmarkCase>& cases, const StudyCatalog& catalog, const AgentSetup& agent,
                        const JudgeConfig& judge = {}, const RunOptions& options = {});

ToolMetrics evaluate_tool_outputs(const std::vector<CaseOutcome>& outcomes, const StudyCatalog& catalog);

// Timing lives under a separate "timing" key so it can be dropped for
// byte-level comparisons.
json report_to_json(const RunReport& report, bool include_timing = true);
std::string report_tables(const RunReport& report);

struct AblationRow {
  ToolFlags flags;
  RunReport report;
};

// Rows in order: neither tool, retrieval only, feasibility only, both.
std::vector<AblationRow> ablation_run(const std::vector<BenchmarkCase>& cases, const StudyCatalog& catalog,
                                      const AgentSetup& agent, const JudgeConfig& judge = {},
                                      const RunOptions& options = {});

json ablation_to_json(const std::vector<AblationRow>& rows, bool include_timing = true);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace echoreason

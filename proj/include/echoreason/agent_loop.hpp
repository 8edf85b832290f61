#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echoreason/llm_gateway.hpp"
#include "echoreason/tool_protocol.hpp"

namespace echoreason {

inline constexpr int kDefaultBudget = 15;

enum class SessionStatus { Running, Finished, BudgetExhausted, Aborted };
std::string_view status_name(SessionStatus s) noexcept;

enum class EventKind { SessionStarted, Thought, ToolCall, ToolResult, Finish, ForcedAnswer, Aborted };
std::string_view event_kind_name(EventKind k) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view name);
bool is_terminal(EventKind k) noexcept;

struct TraceEvent {
  std::string session_id;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::SessionStarted;
  json payload;
};

json event_to_json(const TraceEvent& e);
TraceEvent event_from_json(const json& j);

struct CitedValue {
  double value = 0.0;
  std::string unit;
  std::size_t entry = 0;  // index into the history
};

struct FinalAnswer {
  std::string text;
  std::vector<CitedValue> cited_values;
  std::vector<std::string> cited_passages;
  // Length claims in the text that no history payload supports.
  std::vector<std::string> ungrounded;
  bool forced = false;

  bool grounded() const noexcept { return ungrounded.empty(); }
};

json answer_to_json(const FinalAnswer& a);

// Matches every cm/mm number in the answer against the numbers in ok
// history payloads (numeric leaves and numbers inside strings), rounding the
// payload value to the claim's decimals; the latest matching entry is cited.
// Cited passages are the top hits of successful guideline searches.
FinalAnswer ground_answer(std::string text, const std::vector<HistoryEntry>& history);

struct SessionState {
  std::string session_id;
  std::string query;
  std::string study_id;
  std::vector<HistoryEntry> history;
  int step = 0;
  int budget = kDefaultBudget;
  SessionStatus status = SessionStatus::Running;
  std::optional<FinalAnswer> answer;
  std::vector<TraceEvent> events;
  std::size_t round_trips = 0;
  std::string abort_reason;
};

using EventSink = std::function<void(const TraceEvent&)>;

struct AgentEnvironment {
  const ToolRegistry* registry = nullptr;
  ToolContext context;
  Backend* backend = nullptr;
  EventSink sink;  // optional observer of every appended event
  const std::atomic<bool>* abort_requested = nullptr;
};

// Backend failure mid-session. The session is aborted; its trace up to the
// failure is kept in partial().
class SessionError : public Error {
 public:
  SessionError(const std::string& detail, SessionState partial)
      : Error(Errc::SessionError, detail), partial_(std::move(partial)) {}
  const SessionState& partial() const noexcept { return partial_; }

 private:
  SessionState partial_;
};

// Creates a running session and records session_started. Throws
// InvalidArgument when budget < 1.
SessionState start_session(std::string session_id, std::string query, std::string study_id, int budget,
                           const AgentEnvironment& env);

// One reasoning round trip. Either the FINISH branch is taken (status becomes
// finished and the answer is generated from the history) or exactly one
// history entry is appended; protocol errors become error entries.
void step(SessionState& state, const AgentEnvironment& env);

// One backend call over the rendered history.
FinalAnswer generate_answer(const std::vector<HistoryEntry>& history, std::string_view query,
                            const AgentEnvironment& env);

// Observe-think-act loop until FINISH, budget exhaustion (forced answer) or
// an abort request.
SessionState run_session(std::string query, std::string study_id, const AgentEnvironment& env,
                         int budget = kDefaultBudget, std::string session_id = "session");

enum class AbortOutcome { Aborted, NoOp };
AbortOutcome abort_session(SessionState& state, const AgentEnvironment& env, std::string reason = "abort requested");

// Events as a JSON array; contains no timing data.
json trace_to_json(const std::vector<TraceEvent>& events);

}  // namespace echoreason

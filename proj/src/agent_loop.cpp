#include "echoreason/agent_loop.hpp"

#include <array>
#include <cmath>

namespace echoreason {

namespace {

constexpr std::array<std::string_view, 7> kEventNames{"session_started", "thought",      "tool_call", "tool_result",
                                                      "finish",          "forced_answer", "aborted"};
constexpr std::array<std::string_view, 4> kStatusNames{"running", "finished", "budget_exhausted", "aborted"};

void emit(SessionState& state, const AgentEnvironment& env, EventKind kind, json payload) {
  TraceEvent e{state.session_id, static_cast<std::uint64_t>(state.events.size()), kind, std::move(payload)};
  state.events.push_back(e);
  if (env.sink) env.sink(state.events.back());
}

bool guidelines_enabled(const ToolRegistry& r) { return r.contains("search_guideline"); }

double round_to_decimals(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

[[noreturn]] void fail_session(SessionState& state, const AgentEnvironment& env, const Error& cause) {
  state.status = SessionStatus::Aborted;
  state.abort_reason = cause.what();
  emit(state, env, EventKind::Aborted, {{"step", state.step}, {"reason", state.abort_reason}});
  throw SessionError(cause.what(), state);
}

void finalize(SessionState& state, const AgentEnvironment& env, bool forced) {
  try {
    auto answer = generate_answer(state.history, state.query, env);
    ++state.round_trips;
    answer.forced = forced;
    state.answer = std::move(answer);
  } catch (const Error& e) {
    ++state.round_trips;
    fail_session(state, env, e);
  }
  state.status = forced ? SessionStatus::BudgetExhausted : SessionStatus::Finished;
  emit(state, env, forced ? EventKind::ForcedAnswer : EventKind::Finish,
       {{"step", state.step}, {"answer", answer_to_json(*state.answer)}});
}

}  // namespace

std::string_view status_name(SessionStatus s) noexcept { return kStatusNames[static_cast<int>(s)]; }
std::string_view event_kind_name(EventKind k) noexcept { return kEventNames[static_cast<int>(k)]; }

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

bool is_terminal(EventKind k) noexcept {
  return k == EventKind::Finish || k == EventKind::ForcedAnswer || k == EventKind::Aborted;
}

json event_to_json(const TraceEvent& e) {
  return {{"session_id", e.session_id}, {"seq", e.seq}, {"kind", event_kind_name(e.kind)}, {"payload", e.payload}};
}

TraceEvent event_from_json(const json& j) {
  TraceEvent e;
  try {
    e.session_id = j.at("session_id").get<std::string>();
    e.seq = j.at("seq").get<std::uint64_t>();
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(Errc::FormatError, "unknown event kind");
    e.kind = *kind;
    e.payload = j.at("payload");
  } catch (const json::exception& ex) {
    throw Error(Errc::FormatError, std::string("trace event: ") + ex.what());
  }
  return e;
}

json answer_to_json(const FinalAnswer& a) {
  json cited = json::array();
  for (const auto& c : a.cited_values) cited.push_back({{"value", c.value}, {"unit", c.unit}, {"entry", c.entry}});
  return {{"text", a.text},
          {"cited_values", cited},
          {"cited_passages", a.cited_passages},
          {"grounded", a.grounded()},
          {"ungrounded", a.ungrounded},
          {"forced", a.forced}};
}

FinalAnswer ground_answer(std::string text, const std::vector<HistoryEntry>& history) {
  FinalAnswer a;
  std::vector<std::vector<double>> numbers(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].result.ok) numbers[i] = collect_numbers(history[i].result.payload);
  }
  for (const auto& claim : extract_numbers(text)) {
    if (claim.unit != "cm" && claim.unit != "mm") continue;
    const bool mm = claim.unit == "mm";
    const double target = mm ? claim.value / 10.0 : claim.value;
    const int decimals = claim.decimals + (mm ? 1 : 0);
    std::optional<std::size_t> source;
    for (std::size_t i = history.size(); i-- > 0 && !source;) {
      for (double n : numbers[i]) {
        if (std::fabs(round_to_decimals(n, decimals) - target) <= 1e-6) {
          source = i;
          break;
        }
      }
    }
    if (source) a.cited_values.push_back({claim.value, claim.unit, *source});
    else a.ungrounded.push_back(text.substr(claim.offset, claim.length) + " " + claim.unit);
  }
  for (const auto& h : history) {
    if (!h.result.ok || h.action.name != "search_guideline") continue;
    const auto hits = h.result.payload.find("hits");
    if (hits != h.result.payload.end() && hits->is_array() && !hits->empty()) {
      a.cited_passages.push_back((*hits)[0].value("passage_id", ""));
    }
  }
  a.text = std::move(text);
  return a;
}

SessionState start_session(std::string session_id, std::string query, std::string study_id, int budget,
                           const AgentEnvironment& env) {
  if (budget < 1) throw Error(Errc::InvalidArgument, "step budget must be at least 1");
  if (env.registry == nullptr || env.backend == nullptr) {
    throw Error(Errc::InvalidArgument, "agent environment needs a registry and a backend");
  }
  SessionState s;
  s.session_id = std::move(session_id);
  s.query = std::move(query);
  s.study_id = std::move(study_id);
  s.budget = budget;
  json tools = json::array();
  for (const auto* d : env.registry->list()) tools.push_back(d->name);
  emit(s, env, EventKind::SessionStarted,
       {{"query", s.query},
        {"study_id", s.study_id},
        {"budget", budget},
        {"tools", tools},
        {"prompt_version", kPromptVersion},
        {"prompt_hash", prompt_fingerprint()}});
  return s;
}

void step(SessionState& state, const AgentEnvironment& env) {
  if (state.status != SessionStatus::Running || state.step >= state.budget) {
    throw Error(Errc::InvalidArgument, "step requires a running session with budget left");
  }
  const auto tools = env.registry->list();
  const auto messages = render_history(state.query, state.history, tools, guidelines_enabled(*env.registry));
  std::string completion;
  try {
    completion = env.backend->complete(messages);
    ++state.round_trips;
  } catch (const Error& e) {
    ++state.round_trips;
    fail_session(state, env, e);
  }

  const auto extracted = extract_action(completion);
  const int index = state.step;
  emit(state, env, EventKind::Thought, {{"step", index}, {"text", extracted.thought}});

  HistoryEntry entry;
  entry.thought = extracted.thought;
  if (!extracted.call_text) {
    entry.action.raw_text = std::string(trim(completion));
    entry.result = ToolResult::failure(ProtocolErrorClass::Malformed, "no JSON tool call found in the reply");
  } else {
    auto parsed = parse_tool_call(*extracted.call_text);
    if (!parsed) {
      entry.action.raw_text = *extracted.call_text;
      entry.result = ToolResult::failure(parsed.error().kind, parsed.error().detail);
    } else if (is_finish(parsed.value())) {
      ++state.step;
      finalize(state, env, false);
      return;
    } else {
      entry.action = std::move(parsed.value());
      auto validated = validate_call(*env.registry, entry.action);
      if (!validated) {
        entry.result = ToolResult::failure(validated.error().kind, validated.error().detail);
      } else {
        entry.action.arguments = validated.value().call.arguments;
        entry.result = env.registry->dispatch(validated.value(), env.context);
      }
    }
  }

  emit(state, env, EventKind::ToolCall,
       {{"step", index}, {"name", entry.action.name}, {"arguments", entry.action.arguments}, {"raw", entry.action.raw_text}});
  json result = tool_result_to_json(entry.result);
  result["step"] = index;
  emit(state, env, EventKind::ToolResult, std::move(result));
  state.history.push_back(std::move(entry));
  ++state.step;
}

FinalAnswer generate_answer(const std::vector<HistoryEntry>& history, std::string_view query,
                            const AgentEnvironment& env) {
  const auto messages = render_answer_request(query, history, env.registry->list(), guidelines_enabled(*env.registry));
  return ground_answer(env.backend->complete(messages), history);
}

SessionState run_session(std::string query, std::string study_id, const AgentEnvironment& env, int budget,
                         std::string session_id) {
  SessionState state = start_session(std::move(session_id), std::move(query), std::move(study_id), budget, env);
  while (state.status == SessionStatus::Running && state.step < state.budget) {
    if (env.abort_requested != nullptr && env.abort_requested->load()) {
      abort_session(state, env);
      return state;
    }
    step(state, env);
  }
  if (state.status == SessionStatus::Running) {
    if (env.abort_requested != nullptr && env.abort_requested->load()) {
      abort_session(state, env);
      return state;
    }
    finalize(state, env, true);
  }
  return state;
}

AbortOutcome abort_session(SessionState& state, const AgentEnvironment& env, std::string reason) {
  if (state.status != SessionStatus::Running) return AbortOutcome::NoOp;
  state.status = SessionStatus::Aborted;
  state.abort_reason = std::move(reason);
  emit(state, env, EventKind::Aborted, {{"step", state.step}, {"reason", state.abort_reason}});
  return AbortOutcome::Aborted;
}

json trace_to_json(const std::vector<TraceEvent>& events) {
  json out = json::array();
  for (const auto& e : events) out.push_back(event_to_json(e));
  return out;
}

}  // namespace echoreason

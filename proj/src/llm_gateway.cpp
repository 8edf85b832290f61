#include "echoreason/llm_gateway.hpp"

#include <cstdlib>
#include <iostream>

#include "echoreason/http.hpp"
#include "echoreason/rng.hpp"

namespace echoreason {

namespace {

constexpr std::string_view kSystemTemplate =
    "You are an echocardiography assistant. You answer a clinician's question about one echo video by calling "
    "tools step by step.\n"
    "At each step, write one or two sentences of reasoning, then exactly one JSON object of the form "
    "{\"name\": <tool name>, \"arguments\": {...}} naming a single tool call. Only call the tools listed below, "
    "with exactly the listed arguments.\n"
    "Frame indices are zero-based. Measurements are reported in cm. Measure only on frames where the structure "
    "is reliably visible.\n"
    "When the observations contain enough evidence to answer, emit {\"name\": \"FINISH\", \"arguments\": {}}.\n";

constexpr std::string_view kGuidelineLine =
    "Before classifying a value as reduced, normal or increased, look up its reference range with "
    "search_guideline; do not rely on memory.\n";

constexpr std::string_view kAnswerInstruction =
    "Write the final answer to the question now. Report each requested value with its unit, give the "
    "classification if one was asked for, and use only evidence from the observations above.";

std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

std::string prompt_fingerprint() {
  std::string all(kPromptVersion);
  all += '\n';
  all += kSystemTemplate;
  all += kGuidelineLine;
  all += kAnswerInstruction;
  return hex64(fnv1a(all));
}

std::string system_prompt(const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled) {
  std::string s(kSystemTemplate);
  if (guidelines_enabled) s += kGuidelineLine;
  s += "\nTools:\n";
  for (const auto* t : tools) s += dump_json(descriptor_to_json(*t)) + "\n";
  return s;
}

std::string render_action(const HistoryEntry& entry) {
  std::string s = entry.thought;
  if (!s.empty()) s += "\n";
  s += entry.action.raw_text.empty() ? serialize_tool_call(entry.action) : entry.action.raw_text;
  return s;
}

std::string render_observation(std::size_t step, const HistoryEntry& entry) {
  const std::string tool = entry.action.name.empty() ? "unparsed" : entry.action.name;
  return "Observation " + std::to_string(step + 1) + " (" + tool + "):\n" +
         dump_json(tool_result_to_json(entry.result));
}

std::vector<Message> render_history(std::string_view query, const std::vector<HistoryEntry>& history,
                                    const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled) {
  std::vector<Message> out;
  out.reserve(2 + 2 * history.size());
  out.push_back({Role::System, system_prompt(tools, guidelines_enabled)});
  out.push_back({Role::User, std::string(query)});
  for (std::size_t i = 0; i < history.size(); ++i) {
    out.push_back({Role::Assistant, render_action(history[i])});
    out.push_back({Role::User, render_observation(i, history[i])});
  }
  return out;
}

std::vector<Message> render_answer_request(std::string_view query, const std::vector<HistoryEntry>& history,
                                           const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled) {
  auto out = render_history(query, history, tools, guidelines_enabled);
  out.push_back({Role::User, std::string(kAnswerInstruction)});
  return out;
}

bool is_answer_request(const std::vector<Message>& messages) {
  return !messages.empty() && messages.back().role == Role::User && messages.back().content == kAnswerInstruction;
}

std::size_t turn_index(const std::vector<Message>& messages) {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.role == Role::Assistant;
  return n;
}

ExtractedAction extract_action(std::string_view completion) {
  std::size_t best_start = std::string_view::npos;
  std::size_t best_end = 0;
  for (std::size_t i = completion.find('{'); i != std::string_view::npos; i = completion.find('{', i + 1)) {
    const std::size_t end = matching_brace(completion, i);
    if (end == std::string_view::npos) continue;
    if (best_start != std::string_view::npos && end <= best_end) continue;
    const auto candidate = completion.substr(i, end - i + 1);
    if (json::accept(candidate.begin(), candidate.end())) {
      best_start = i;
      best_end = end;
    }
  }
  ExtractedAction out;
  if (best_start == std::string_view::npos) {
    out.thought = std::string(trim(completion));
    return out;
  }
  out.thought = std::string(trim(completion.substr(0, best_start)));
  out.call_text = std::string(completion.substr(best_start, best_end - best_start + 1));
  return out;
}

Script Script::sequence(std::vector<std::string> steps, std::string answer) {
  Script s;
  for (std::size_t i = 0; i < steps.size(); ++i) s.turns.push_back({i, nullptr, std::move(steps[i])});
  s.answer = std::move(answer);
  return s;
}

std::string ScriptedBackend::complete(const std::vector<Message>& messages) {
  if (is_answer_request(messages)) return script_.answer;
  const std::size_t turn = turn_index(messages);
  for (const auto& t : script_.turns) {
    if (t.step && *t.step != turn) continue;
    if (t.when && !t.when(messages)) continue;
    return t.text;
  }
  return script_.fallback;
}

RemoteBackend::RemoteBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty() || config_.model.empty()) {
    throw Error(Errc::ConfigError, "remote backend requires an endpoint and a model");
  }
  if (config_.retries < 0) throw Error(Errc::ConfigError, "retries must be >= 0");
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv("ECHOREASON_API_KEY")) config_.api_key = key;
  }
  endpoint_ = parse_endpoint(config_.endpoint);
}

std::string RemoteBackend::complete(const std::vector<Message>& messages) {
  if (messages.empty()) throw Error(Errc::InvalidArgument, "no messages to complete");
  json body = {{"model", config_.model}, {"temperature", config_.temperature}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
  const std::string payload = dump_json(body);
  HttpHeaders headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (config_.debug) std::cerr << "[llm] POST attempt " << attempt + 1 << " (key redacted): " << payload << "\n";
    const auto res = http_post(endpoint_, "/v1/chat/completions", payload, "application/json", headers,
                               std::chrono::milliseconds(config_.timeout_ms));
    if (!res.received()) {
      last_error = res.transport_error;
      continue;
    }
    if (config_.debug) std::cerr << "[llm] HTTP " << res.status << ": " << res.body << "\n";
    if (res.status < 200 || res.status >= 300) {
      last_error = "HTTP " + std::to_string(res.status);
      continue;
    }
    const json doc = json::parse(res.body, nullptr, false);
    try {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      last_error = "malformed completion body";
    }
  }
  throw Error(Errc::BackendUnavailable, std::to_string(config_.retries + 1) + " attempts failed, last: " + last_error);
}

}  // namespace echoreason

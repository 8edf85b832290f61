#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echoreason/http.hpp"
#include "echoreason/tool_protocol.hpp"

namespace echoreason {

enum class Role { System, User, Assistant };

std::string_view role_name(Role r) noexcept;

struct Message {
  Role role = Role::User;
  std::string content;
  bool operator==(const Message&) const = default;
};

struct HistoryEntry {
  std::string thought;
  ToolCall action;
  ToolResult result;
};

// The orchestrating model M. complete() is one round trip; implementations
// throw Error(BackendUnavailable) when no completion can be obtained.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const std::vector<Message>& messages) = 0;
  virtual std::string describe() const = 0;
};

inline constexpr std::string_view kPromptVersion = "echoreason-prompt/1";

// Hash of the system prompt template and answer instruction; ties benchmark
// reports to the exact prompt text.
std::string prompt_fingerprint();

std::string system_prompt(const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled);

// [system, user(Q)] followed by one assistant action message and one user
// observation message per history entry.
std::vector<Message> render_history(std::string_view query, const std::vector<HistoryEntry>& history,
                                    const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled);

std::string render_observation(std::size_t step, const HistoryEntry& entry);
std::string render_action(const HistoryEntry& entry);

// Rendered history plus the final-answer instruction.
std::vector<Message> render_answer_request(std::string_view query, const std::vector<HistoryEntry>& history,
                                           const std::vector<const ToolDescriptor*>& tools, bool guidelines_enabled);
bool is_answer_request(const std::vector<Message>& messages);

// Reasoning turn index implied by a rendered history: the number of
// assistant messages already present.
std::size_t turn_index(const std::vector<Message>& messages);

struct ExtractedAction {
  std::string thought;
  std::optional<std::string> call_text;  // last well-formed JSON object, if any
};

// Splits a completion into free-text thought and the structured call, taken
// as the last well-formed JSON object in the text.
ExtractedAction extract_action(std::string_view completion);

// Deterministic test double. A turn fires when its step index (if set)
// equals the current turn and its predicate (if set) holds; the first
// matching turn wins, otherwise the fallback (FINISH) is emitted.
struct ScriptTurn {
  std::optional<std::size_t> step;
  std::function<bool(const std::vector<Message>&)> when;
  std::string text;
};

struct Script {
  std::vector<ScriptTurn> turns;
  std::string answer = "No answer.";
  std::string fallback = R"({"name": "FINISH", "arguments": {}})";

  static Script sequence(std::vector<std::string> steps, std::string answer);
};

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  std::string complete(const std::vector<Message>& messages) override;
  std::string describe() const override { return "scripted"; }

 private:
  Script script_;
};

// Adapts any pure function of the messages.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const std::vector<Message>&)>;
  FunctionBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string complete(const std::vector<Message>& messages) override { return fn_(messages); }
  std::string describe() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}
  std::string complete(const std::vector<Message>& messages) override {
    ++calls_;
    return inner_.complete(messages);
  }
  std::string describe() const override { return inner_.describe(); }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Backend& inner_;
  std::atomic<std::size_t> calls_{0};
};

struct BackendConfig {
  std::string endpoint;  // http://host:port[/prefix]
  std::string model;
  double temperature = 0.0;
  int timeout_ms = 60000;
  int retries = 2;
  std::string api_key;  // falls back to ECHOREASON_API_KEY
  bool debug = false;   // log request/response bodies to stderr, key redacted
};

// OpenAI-compatible chat completions client: POST {endpoint}/v1/chat/completions.
// retries = r means at most r + 1 attempts; a well-formed completion is
// never retried.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config);
  std::string complete(const std::vector<Message>& messages) override;
  std::string describe() const override { return "remote:" + config_.model; }

 private:
  BackendConfig config_;
  HttpEndpoint endpoint_;
};

}  // namespace echoreason

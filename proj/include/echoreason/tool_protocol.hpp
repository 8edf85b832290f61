#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echoreason/domain.hpp"
#include "echoreason/error.hpp"
#include "echoreason/guideline_store.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

enum class ProtocolErrorClass { Malformed, UnknownTool, InvalidArguments, ExecutionFailure };

std::string_view protocol_error_name(ProtocolErrorClass c) noexcept;
std::optional<ProtocolErrorClass> parse_protocol_error(std::string_view name);

struct ProtocolError {
  ProtocolErrorClass kind = ProtocolErrorClass::Malformed;
  std::string detail;
};

enum class ArgType { String, Integer, Number, Boolean, Enum };

struct ParamSpec {
  std::string name;
  ArgType type = ArgType::String;
  bool required = true;
  std::string description;
  std::vector<std::string> enum_values;  // canonical spellings, ArgType::Enum only
  std::optional<double> minimum;
  std::optional<double> maximum;
};

// Which part of the environment a tool reads: the video study or the
// guideline corpus. Dispatch hands each handler only its own part.
enum class ToolScope { Study, Guidelines };

struct ToolDescriptor {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  json result_schema = json::object();
  ToolScope scope = ToolScope::Study;
};

json descriptor_to_json(const ToolDescriptor& d);

struct ToolCall {
  std::string name;
  json arguments = json::object();
  std::string raw_text;
};

bool operator==(const ToolCall& a, const ToolCall& b);

struct ToolResult {
  bool ok = false;
  json payload;
  std::optional<ProtocolError> error;
  std::chrono::nanoseconds latency{0};

  static ToolResult success(json payload);
  static ToolResult failure(ProtocolErrorClass kind, std::string detail, std::string code = {});
};

struct ValidatedCall {
  const ToolDescriptor* descriptor = nullptr;
  ToolCall call;  // arguments canonicalized
};

struct ToolContext {
  const EchoStudy* study = nullptr;
  const GuidelineIndex* guidelines = nullptr;
};

using ToolHandler = std::function<json(const json& arguments, const ToolContext& context)>;

class ToolRegistry {
 public:
  // Throws DuplicateTool if the name is taken.
  void add(ToolDescriptor descriptor, ToolHandler handler);

  const ToolDescriptor* find(std::string_view name) const;
  std::vector<const ToolDescriptor*> list() const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // {"tools": [descriptor, ...]} in registration order.
  json schema_document() const;

  ToolResult dispatch(const ValidatedCall& call, const ToolContext& context) const;

 private:
  struct Entry {
    std::shared_ptr<const ToolDescriptor> descriptor;
    ToolHandler handler;
  };
  std::vector<Entry> entries_;
};

// FINISH ends the loop; it is recognized before registry validation.
inline constexpr std::string_view kFinishName = "FINISH";
bool is_finish(const ToolCall& call) noexcept;

// {"name": string, "arguments": object}. "arguments" may be omitted.
Expected<ToolCall, ProtocolError> parse_tool_call(std::string_view raw);
std::string serialize_tool_call(const ToolCall& call);

Expected<ValidatedCall, ProtocolError> validate_call(const ToolRegistry& registry, const ToolCall& call);

// Never throws: handler exceptions become ExecutionFailure results.
ToolResult dispatch(const ToolRegistry& registry, const ValidatedCall& call, const ToolContext& context);

json tool_result_to_json(const ToolResult& r);

}  // namespace echoreason

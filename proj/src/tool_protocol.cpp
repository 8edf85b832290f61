#include "echoreason/tool_protocol.hpp"

#include <array>
#include <cmath>

namespace echoreason {

namespace {

constexpr std::array<std::string_view, 4> kProtocolNames{"Malformed", "UnknownTool", "InvalidArguments",
                                                         "ExecutionFailure"};

std::string_view type_name(ArgType t) {
  switch (t) {
    case ArgType::String:
    case ArgType::Enum:
      return "string";
    case ArgType::Integer:
      return "integer";
    case ArgType::Number:
      return "number";
    case ArgType::Boolean:
      return "boolean";
  }
  return "string";
}

ProtocolError invalid(std::string detail) { return {ProtocolErrorClass::InvalidArguments, std::move(detail)}; }

// Checks one argument against its spec; returns the canonical value.
Expected<json, ProtocolError> check_argument(const ParamSpec& spec, const json& value) {
  const std::string where = "argument '" + spec.name + "'";
  json out = value;
  switch (spec.type) {
    case ArgType::String:
      if (!value.is_string()) return invalid(where + " must be a string");
      break;
    case ArgType::Boolean:
      if (!value.is_boolean()) return invalid(where + " must be a boolean");
      break;
    case ArgType::Integer: {
      if (value.is_number_integer()) {
        out = value.is_number_unsigned() && value.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)
                  ? json(nullptr)
                  : json(value.get<std::int64_t>());
        if (out.is_null()) return invalid(where + " is out of range");
      } else if (value.is_number_float()) {
        const double d = value.get<double>();
        if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 9.0e15) {
          return invalid(where + " must be an integer");
        }
        out = static_cast<std::int64_t>(d);
      } else {
        return invalid(where + " must be an integer");
      }
      break;
    }
    case ArgType::Number:
      if (!value.is_number()) return invalid(where + " must be a number");
      break;
    case ArgType::Enum: {
      if (!value.is_string()) return invalid(where + " must be one of the listed values");
      const auto text = value.get<std::string>();
      const std::string* match = nullptr;
      for (const auto& e : spec.enum_values) {
        if (iequals(e, trim(text))) match = &e;
      }
      if (match == nullptr) return invalid(where + " has unsupported value '" + text + "'");
      out = *match;
      break;
    }
  }
  if ((spec.minimum || spec.maximum) && out.is_number()) {
    const double d = out.get<double>();
    if (spec.minimum && d < *spec.minimum) return invalid(where + " is below " + format_value(*spec.minimum));
    if (spec.maximum && d > *spec.maximum) return invalid(where + " is above " + format_value(*spec.maximum));
  }
  return out;
}

}  // namespace

std::string_view protocol_error_name(ProtocolErrorClass c) noexcept { return kProtocolNames[static_cast<int>(c)]; }

std::optional<ProtocolErrorClass> parse_protocol_error(std::string_view name) {
  for (std::size_t i = 0; i < kProtocolNames.size(); ++i) {
    if (kProtocolNames[i] == name) return static_cast<ProtocolErrorClass>(i);
  }
  return std::nullopt;
}

json descriptor_to_json(const ToolDescriptor& d) {
  json props = json::object();
  json required = json::array();
  for (const auto& p : d.params) {
    json prop = {{"type", type_name(p.type)}, {"description", p.description}};
    if (p.type == ArgType::Enum) prop["enum"] = p.enum_values;
    if (p.minimum) prop["minimum"] = *p.minimum;
    if (p.maximum) prop["maximum"] = *p.maximum;
    props[p.name] = std::move(prop);
    if (p.required) required.push_back(p.name);
  }
  return {{"name", d.name},
          {"description", d.description},
          {"scope", d.scope == ToolScope::Study ? "study" : "guidelines"},
          {"parameters",
           {{"type", "object"}, {"properties", props}, {"required", required}, {"additionalProperties", false}}},
          {"result", d.result_schema}};
}

bool operator==(const ToolCall& a, const ToolCall& b) { return a.name == b.name && a.arguments == b.arguments; }

ToolResult ToolResult::success(json payload) {
  ToolResult r;
  r.ok = true;
  r.payload = std::move(payload);
  return r;
}

ToolResult ToolResult::failure(ProtocolErrorClass kind, std::string detail, std::string code) {
  ToolResult r;
  r.ok = false;
  r.payload = {{"error_class", protocol_error_name(kind)}, {"detail", detail}};
  if (!code.empty()) r.payload["code"] = code;
  r.error = ProtocolError{kind, std::move(detail)};
  return r;
}

void ToolRegistry::add(ToolDescriptor descriptor, ToolHandler handler) {
  if (find(descriptor.name) != nullptr) throw Error(Errc::DuplicateTool, descriptor.name);
  if (iequals(descriptor.name, kFinishName)) throw Error(Errc::InvalidArgument, "FINISH is reserved");
  for (std::size_t i = 0; i < descriptor.params.size(); ++i) {
    for (std::size_t j = i + 1; j < descriptor.params.size(); ++j) {
      if (descriptor.params[i].name == descriptor.params[j].name) {
        throw Error(Errc::InvalidArgument, "duplicate parameter " + descriptor.params[i].name);
      }
    }
  }
  entries_.push_back({std::make_shared<const ToolDescriptor>(std::move(descriptor)), std::move(handler)});
}

const ToolDescriptor* ToolRegistry::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.descriptor->name == name) return e.descriptor.get();
  }
  return nullptr;
}

std::vector<const ToolDescriptor*> ToolRegistry::list() const {
  std::vector<const ToolDescriptor*> out;
  for (const auto& e : entries_) out.push_back(e.descriptor.get());
  return out;
}

json ToolRegistry::schema_document() const {
  json tools = json::array();
  for (const auto& e : entries_) tools.push_back(descriptor_to_json(*e.descriptor));
  return {{"tools", tools}};
}

ToolResult ToolRegistry::dispatch(const ValidatedCall& call, const ToolContext& context) const {
  const Entry* entry = nullptr;
  for (const auto& e : entries_) {
    if (e.descriptor.get() == call.descriptor) entry = &e;
  }
  if (entry == nullptr) {
    return ToolResult::failure(ProtocolErrorClass::UnknownTool, "tool '" + call.call.name + "' is not registered");
  }
  ToolContext scoped;
  if (entry->descriptor->scope == ToolScope::Study) scoped.study = context.study;
  else scoped.guidelines = context.guidelines;

  const auto start = std::chrono::steady_clock::now();
  ToolResult result;
  try {
    result = ToolResult::success(entry->handler(call.call.arguments, scoped));
  } catch (const Error& e) {
    result = ToolResult::failure(ProtocolErrorClass::ExecutionFailure, e.what(), std::string(errc_name(e.code())));
  } catch (const std::exception& e) {
    result = ToolResult::failure(ProtocolErrorClass::ExecutionFailure, e.what());
  } catch (...) {
    result = ToolResult::failure(ProtocolErrorClass::ExecutionFailure, "unknown handler failure");
  }
  result.latency = std::chrono::steady_clock::now() - start;
  return result;
}

bool is_finish(const ToolCall& call) noexcept { return iequals(call.name, kFinishName); }

Expected<ToolCall, ProtocolError> parse_tool_call(std::string_view raw) {
  auto malformed = [](std::string detail) { return ProtocolError{ProtocolErrorClass::Malformed, std::move(detail)}; };
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded()) return malformed("not valid JSON");
  if (!doc.is_object()) return malformed("tool call must be a JSON object");
  const auto name = doc.find("name");
  if (name == doc.end() || !name->is_string()) return malformed("missing string field 'name'");
  ToolCall call;
  call.name = name->get<std::string>();
  call.raw_text = std::string(raw);
  if (const auto args = doc.find("arguments"); args != doc.end()) {
    if (!args->is_object()) return malformed("'arguments' must be an object");
    call.arguments = *args;
  }
  return call;
}

std::string serialize_tool_call(const ToolCall& call) {
  return dump_json({{"name", call.name}, {"arguments", call.arguments}});
}

Expected<ValidatedCall, ProtocolError> validate_call(const ToolRegistry& registry, const ToolCall& call) {
  const ToolDescriptor* d = registry.find(call.name);
  if (d == nullptr) return ProtocolError{ProtocolErrorClass::UnknownTool, "no tool named '" + call.name + "'"};
  if (!call.arguments.is_object()) return invalid("arguments must be an object");

  for (const auto& [key, _] : call.arguments.items()) {
    bool known = false;
    for (const auto& p : d->params) known = known || p.name == key;
    if (!known) return invalid("unexpected argument '" + key + "' for " + d->name);
  }
  ValidatedCall out{d, call};
  out.call.arguments = json::object();
  for (const auto& p : d->params) {
    const auto it = call.arguments.find(p.name);
    if (it == call.arguments.end()) {
      if (p.required) return invalid("missing required argument '" + p.name + "' for " + d->name);
      continue;
    }
    auto checked = check_argument(p, *it);
    if (!checked) return checked.error();
    out.call.arguments[p.name] = std::move(checked.value());
  }
  return out;
}

ToolResult dispatch(const ToolRegistry& registry, const ValidatedCall& call, const ToolContext& context) {
  return registry.dispatch(call, context);
}

json tool_result_to_json(const ToolResult& r) {
  json j = {{"status", r.ok ? "ok" : "error"}, {"payload", r.payload}};
  if (r.error) j["error_class"] = protocol_error_name(r.error->kind);
  return j;
}

}  // namespace echoreason

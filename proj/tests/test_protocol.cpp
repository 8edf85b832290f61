#include <gtest/gtest.h>

#include "echoreason/reference_pack.hpp"
#include "echoreason/tool_protocol.hpp"
#include "echoreason/tool_suite.hpp"
#include "support.hpp"

using namespace echoreason;

namespace {

ToolRegistry toy_registry() {
  ToolRegistry r;
  r.add({"echo",
         "Echo the arguments back.",
         {{"n", ArgType::Integer, true, "", {}, 0.0, 10.0},
          {"mode", ArgType::Enum, false, "", {"Fast", "Slow"}, std::nullopt, std::nullopt},
          {"flag", ArgType::Boolean, false, "", {}, std::nullopt, std::nullopt},
          {"x", ArgType::Number, false, "", {}, std::nullopt, std::nullopt},
          {"s", ArgType::String, false, "", {}, std::nullopt, std::nullopt}},
         json::object(),
         ToolScope::Study},
        [](const json& args, const ToolContext& ctx) -> json {
          if (ctx.guidelines != nullptr) throw std::logic_error("study tool saw the guidelines");
          if (args.at("n").get<int>() == 7) throw Error(Errc::NotMeasurable, "seven");
          if (args.at("n").get<int>() == 8) throw std::runtime_error("boom");
          return args;
        });
  r.add({"lookup", "Guideline tool.", {}, json::object(), ToolScope::Guidelines},
        [](const json&, const ToolContext& ctx) -> json {
          return {{"saw_study", ctx.study != nullptr}, {"saw_guidelines", ctx.guidelines != nullptr}};
        });
  return r;
}

ProtocolErrorClass rejection(const ToolRegistry& r, std::string_view raw) {
  const auto parsed = parse_tool_call(raw);
  if (!parsed) return parsed.error().kind;
  const auto v = validate_call(r, parsed.value());
  if (!v) return v.error().kind;
  ADD_FAILURE() << "accepted: " << raw;
  return ProtocolErrorClass::ExecutionFailure;
}

}  // namespace

TEST(Protocol, ParseAcceptsWellFormedCalls) {
  const auto c = parse_tool_call(R"({"name": "measure", "arguments": {"kind": "IVS", "frame": 3}})");
  ASSERT_TRUE(c);
  EXPECT_EQ(c->name, "measure");
  EXPECT_EQ(c->arguments["frame"], 3);
  const auto bare = parse_tool_call(R"({"name": "detect_phases"})");
  ASSERT_TRUE(bare);
  EXPECT_TRUE(bare->arguments.is_object());
  EXPECT_TRUE(bare->arguments.empty());
}

TEST(Protocol, SerializeParseRoundTrip) {
  ToolCall c{"measure", {{"kind", "LVID"}, {"frame", 12}}, ""};
  const auto back = parse_tool_call(serialize_tool_call(c));
  ASSERT_TRUE(back);
  EXPECT_EQ(back.value(), c);
}

TEST(Protocol, MalformedInputs) {
  const auto r = toy_registry();
  for (const char* raw : {"", "{", "[]", "42", R"({"arguments": {}})", R"({"name": 3})",
                          R"({"name": "echo", "arguments": [1]})", "not json at all"}) {
    EXPECT_EQ(rejection(r, raw), ProtocolErrorClass::Malformed) << raw;
  }
}

TEST(Protocol, UnknownToolIsCaseSensitive) {
  const auto r = toy_registry();
  EXPECT_EQ(rejection(r, R"({"name": "Echo", "arguments": {"n": 1}})"), ProtocolErrorClass::UnknownTool);
  EXPECT_EQ(rejection(r, R"({"name": "segment_lv"})"), ProtocolErrorClass::UnknownTool);
}

TEST(Protocol, ArgumentValidation) {
  const auto r = toy_registry();
  for (const char* raw : {R"({"name": "echo", "arguments": {}})",
                          R"({"name": "echo", "arguments": {"n": "3"}})",
                          R"({"name": "echo", "arguments": {"n": 2.5}})",
                          R"({"name": "echo", "arguments": {"n": 11}})",
                          R"({"name": "echo", "arguments": {"n": -1}})",
                          R"({"name": "echo", "arguments": {"n": 1, "mode": "medium"}})",
                          R"({"name": "echo", "arguments": {"n": 1, "flag": 1}})",
                          R"({"name": "echo", "arguments": {"n": 1, "x": "1"}})",
                          R"({"name": "echo", "arguments": {"n": 1, "s": 5}})",
                          R"({"name": "echo", "arguments": {"n": 1, "extra": 0}})",
                          R"({"name": "echo", "arguments": {"n": 1e300}})"}) {
    EXPECT_EQ(rejection(r, raw), ProtocolErrorClass::InvalidArguments) << raw;
  }
}

TEST(Protocol, CanonicalizesIntegralFloatsAndEnums) {
  const auto r = toy_registry();
  const auto c = parse_tool_call(R"({"name": "echo", "arguments": {"n": 4.0, "mode": " slow "}})");
  const auto v = validate_call(r, c.value());
  ASSERT_TRUE(v);
  EXPECT_TRUE(v->call.arguments["n"].is_number_integer());
  EXPECT_EQ(v->call.arguments["mode"], "Slow");
}

TEST(Protocol, DispatchCatchesHandlerFailures) {
  const auto r = toy_registry();
  auto run = [&](int n) {
    const auto v = validate_call(r, ToolCall{"echo", {{"n", n}}, ""});
    return dispatch(r, v.value(), {});
  };
  const auto ok = run(3);
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(ok.payload["n"], 3);
  const auto typed = run(7);
  ASSERT_FALSE(typed.ok);
  EXPECT_EQ(typed.error->kind, ProtocolErrorClass::ExecutionFailure);
  EXPECT_EQ(typed.payload["code"], "NotMeasurable");
  const auto untyped = run(8);
  ASSERT_FALSE(untyped.ok);
  EXPECT_EQ(untyped.error->kind, ProtocolErrorClass::ExecutionFailure);
  const auto j = tool_result_to_json(untyped);
  EXPECT_EQ(j["status"], "error");
  EXPECT_EQ(j["error_class"], "ExecutionFailure");
}

TEST(Protocol, ScopeRoutesOnlyTheToolsOwnContext) {
  const auto r = toy_registry();
  const auto study = fixtures::plax_study();
  const auto index = build_reference_index();
  const ToolContext ctx{&study, &index};
  const auto g = dispatch(r, validate_call(r, ToolCall{"lookup", json::object(), ""}).value(), ctx);
  EXPECT_EQ(g.payload["saw_study"], false);
  EXPECT_EQ(g.payload["saw_guidelines"], true);
  EXPECT_TRUE(dispatch(r, validate_call(r, ToolCall{"echo", {{"n", 1}}, ""}).value(), ctx).ok);
}

TEST(Protocol, RegistryRules) {
  auto r = toy_registry();
  EXPECT_THROW(r.add({"echo", "", {}, json::object(), ToolScope::Study}, nullptr), Error);
  EXPECT_THROW(r.add({"finish", "", {}, json::object(), ToolScope::Study}, nullptr), Error);
  EXPECT_THROW(r.add({"dup", "", {{"a"}, {"a"}}, json::object(), ToolScope::Study}, nullptr), Error);
  EXPECT_TRUE(is_finish(ToolCall{"Finish", {}, ""}));
  const auto doc = r.schema_document();
  ASSERT_EQ(doc["tools"].size(), 2u);
  EXPECT_EQ(doc["tools"][0]["parameters"]["required"], json::array({"n"}));
  EXPECT_EQ(doc["tools"][0]["parameters"]["additionalProperties"], false);
  EXPECT_EQ(doc["tools"][0]["parameters"]["properties"]["mode"]["enum"], json::array({"Fast", "Slow"}));
}

TEST(Protocol, ErrorNames) {
  for (auto c : {ProtocolErrorClass::Malformed, ProtocolErrorClass::UnknownTool, ProtocolErrorClass::InvalidArguments,
                 ProtocolErrorClass::ExecutionFailure}) {
    EXPECT_EQ(parse_protocol_error(protocol_error_name(c)), c);
  }
}

TEST(ToolSuite, FlagsControlTheRegistry) {
  EXPECT_EQ(build_tool_registry({}).size(), 4u);
  const auto none = build_tool_registry({{false, false}, {}, std::nullopt});
  EXPECT_EQ(none.size(), 2u);
  EXPECT_FALSE(none.contains("predict_feasibility"));
  EXPECT_FALSE(none.contains("search_guideline"));
  EXPECT_TRUE(none.contains("measure"));
}

TEST(ToolSuite, HandlersProduceDocumentedPayloads) {
  const auto reg = build_tool_registry({});
  const auto study = fixtures::plax_study();
  const auto index = build_reference_index();
  const ToolContext ctx{&study, &index};
  auto call = [&](const std::string& raw) {
    const auto v = validate_call(reg, parse_tool_call(raw).value());
    EXPECT_TRUE(v) << raw;
    return dispatch(reg, v.value(), ctx);
  };
  const auto p = call(R"({"name":"detect_phases"})");
  EXPECT_EQ(p.payload["ed_frames"], json::array({5, 45}));
  EXPECT_EQ(p.payload["frame_count"], 80);

  const auto f = call(R"({"name":"predict_feasibility","arguments":{"frame":5}})");
  EXPECT_EQ(f.payload["vector"].size(), 16u);
  EXPECT_EQ(f.payload["vector"][0], 1);
  EXPECT_NE(std::find(f.payload["feasible"].begin(), f.payload["feasible"].end(), "IVS"), f.payload["feasible"].end());

  const auto m = call(R"({"name":"measure","arguments":{"kind":"lvid","frame":5}})");
  ASSERT_TRUE(m.ok);
  EXPECT_EQ(m.payload["kind"], "LVID");
  EXPECT_DOUBLE_EQ(m.payload["value_cm"].get<double>(), 4.6);
  EXPECT_EQ(m.payload["endpoints"].size(), 2u);
  const auto back = measurement_from_json(m.payload);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->kind, Kind::LVID);

  const auto bad = call(R"({"name":"measure","arguments":{"kind":"TAPSE","frame":5}})");
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.payload["code"], "NotMeasurable");
  EXPECT_EQ(call(R"({"name":"measure","arguments":{"kind":"IVS","frame":500}})").payload["code"], "BadFrame");

  const auto s = call(R"({"name":"search_guideline","arguments":{"query":"IVS normal range","k":2}})");
  ASSERT_TRUE(s.ok);
  ASSERT_EQ(s.payload["hits"].size(), 2u);
  EXPECT_EQ(s.payload["hits"][0]["rank"], 1);
  for (const char* key : {"passage_id", "doc_id", "title", "score", "begin", "end", "text"}) {
    EXPECT_TRUE(s.payload["hits"][0].contains(key)) << key;
  }
}

TEST(ToolSuite, RejectsInvalidNoise) {
  ToolSuiteOptions o;
  o.noise.sigma_cm[0] = -1.0;
  EXPECT_THROW(build_tool_registry(o), Error);
}

#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "echoreason/reference_pack.hpp"
#include "echoreason/service.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace echoreason;
using namespace std::chrono_literals;

namespace {

constexpr const char* kLvid = "What is the left ventricular internal dimension (LVID) at end-diastole?";

std::shared_ptr<const StudyCatalog> catalog() {
  auto plain = fixtures::plax_study("study-a");
  auto pixels = fixtures::plax_study("study-b");
  pixels.pixels = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(pixels.frame_count * pixels.height * pixels.width), std::uint8_t{7});
  return std::make_shared<StudyCatalog>(std::vector<EchoStudy>{plain, pixels});
}

ServiceOptions options() {
  ServiceOptions o;
  o.catalog = catalog();
  o.guidelines = std::make_shared<GuidelineIndex>(build_reference_index());
  // Never finishes on its own, pausing between steps so tests can abort it.
  o.backends["slow"] = [] {
    return std::make_unique<FunctionBackend>("slow", [](const std::vector<Message>&) {
      std::this_thread::sleep_for(20ms);
      return std::string(R"({"name": "detect_phases", "arguments": {}})");
    });
  };
  return o;
}

std::vector<std::pair<std::string, json>> parse_sse(const std::string& body) {
  std::vector<std::pair<std::string, json>> out;
  std::size_t pos = 0;
  while (true) {
    const auto end = body.find("\n\n", pos);
    if (end == std::string::npos) break;
    const auto block = body.substr(pos, end - pos);
    pos = end + 2;
    std::string id;
    json data;
    std::size_t line_start = 0;
    while (line_start < block.size()) {
      auto line_end = block.find('\n', line_start);
      if (line_end == std::string::npos) line_end = block.size();
      const auto line = block.substr(line_start, line_end - line_start);
      if (line.rfind("id: ", 0) == 0) id = line.substr(4);
      if (line.rfind("data: ", 0) == 0) data = json::parse(line.substr(6));
      line_start = line_end + 1;
    }
    out.emplace_back(id, data);
  }
  return out;
}

}  // namespace

TEST(Service, SessionRunsToAnAnswer) {
  SessionService svc(options());
  const auto h = svc.create_session({"study-a", kLvid, json::object(), ""});
  const std::string id = h["session_id"];
  EXPECT_EQ(id, "session-000001");
  EXPECT_EQ(h["config"]["budget"], kDefaultBudget);
  ASSERT_TRUE(svc.wait_done(id, 10s));
  const auto done = svc.session_handle(id);
  EXPECT_EQ(done["status"], "finished");
  EXPECT_NE(done["answer"]["text"].get<std::string>().find("4.6 cm"), std::string::npos);
  const auto events = svc.events(id);
  EXPECT_EQ(done["event_count"], events.size());
  EXPECT_EQ(events.back().kind, EventKind::Finish);
}

TEST(Service, RejectsBadRequests) {
  SessionService svc(options());
  auto code = [&](SessionRequest r) {
    try {
      svc.create_session(r);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code({"nope", kLvid, json::object(), ""}), Errc::NotFound);
  EXPECT_EQ(code({"study-a", "  ", json::object(), ""}), Errc::InvalidArgument);
  EXPECT_EQ(code({"study-a", kLvid, {{"budget", 0}}, ""}), Errc::InvalidArgument);
  EXPECT_EQ(code({"study-a", kLvid, {{"backend", "gpt"}}, ""}), Errc::ConfigError);
  EXPECT_EQ(code({"study-a", kLvid, {{"colour", "red"}}, ""}), Errc::ConfigError);
  EXPECT_EQ(code({"study-a", kLvid, {{"noise", "loud"}}, ""}), Errc::ConfigError);
  EXPECT_EQ(code({"study-a", kLvid, json::object(), "session-999999"}), Errc::NotFound);
  EXPECT_EQ(svc.session_count(), 0u);
  EXPECT_THROW(svc.session_handle("session-000001"), Error);
}

TEST(Service, ConfigOverridesApply) {
  SessionService svc(options());
  const auto h = svc.create_session(
      {"study-a", kLvid, {{"K", 3}, {"flags", {{"retrieval", false}}}, {"noise", {{"sigma_ed", 1.0}}}}, ""});
  EXPECT_EQ(h["config"]["budget"], 3);
  EXPECT_EQ(h["config"]["flags"]["retrieval"], false);
  EXPECT_EQ(h["config"]["flags"]["feasibility"], true);
  EXPECT_EQ(h["config"]["noise"], "custom");
  svc.wait_done(h["session_id"], 10s);
  const auto started = svc.events(h["session_id"]).front();
  EXPECT_EQ(started.payload["budget"], 3);
  EXPECT_EQ(started.payload["tools"].size(), 3u);
}

TEST(Service, AbortStopsBeforeTheNextStep) {
  SessionService svc(options());
  const auto h = svc.create_session({"study-a", kLvid, {{"backend", "slow"}}, ""});
  const std::string id = h["session_id"];
  bool closed = false;
  svc.wait_events(id, 1, 5s, closed);
  const auto a = svc.abort(id);
  EXPECT_EQ(a["outcome"], "aborted");
  ASSERT_TRUE(svc.wait_done(id, 10s));
  const auto handle = svc.session_handle(id);
  EXPECT_EQ(handle["status"], "aborted");
  const auto events = svc.events(id);
  EXPECT_EQ(events.back().kind, EventKind::Aborted);
  EXPECT_LT(events.size(), 2u + 3u * kDefaultBudget);
  EXPECT_EQ(svc.abort(id)["outcome"], "noop");
}

TEST(Service, FollowUpCarriesThePriorAnswer) {
  SessionService svc(options());
  const std::string first = svc.create_session({"study-a", kLvid, json::object(), ""})["session_id"];
  svc.wait_done(first, 10s);
  const auto h = svc.create_session(
      {"study-a", "What is the interventricular septal thickness (IVS) at end-diastole?", json::object(), first});
  EXPECT_EQ(h["follow_up_of"], first);
  const std::string q = h["query"];
  EXPECT_EQ(q.rfind("Context from the previous answer: LVID", 0), 0u) << q;
  EXPECT_NE(q.find("\nFollow-up question: What is the interventricular"), std::string::npos);
  svc.wait_done(h["session_id"], 10s);
  EXPECT_EQ(svc.session_handle(h["session_id"])["status"], "finished");
}

TEST(Service, FramesWithOverlays) {
  SessionService svc(options());
  const std::string id = svc.create_session({"study-a", kLvid, json::object(), ""})["session_id"];
  svc.wait_done(id, 10s);
  const auto f = svc.frame("study-a", 5, id);
  EXPECT_EQ(f["placeholder"], true);
  ASSERT_EQ(f["overlays"].size(), 1u);
  EXPECT_EQ(f["overlays"][0]["kind"], "LVID");
  EXPECT_EQ(f["overlays"][0]["label"], "LVID 4.6 cm");
  EXPECT_EQ(f["overlays"][0]["endpoints"].size(), 2u);
  EXPECT_TRUE(svc.frame("study-a", 6, id)["overlays"].empty());

  const auto px = svc.frame("study-b", 0, "");
  EXPECT_EQ(px["placeholder"], false);
  EXPECT_EQ(px["encoding"], "gray8");
  EXPECT_EQ(px["pixels_base64"].get<std::string>().size(), 4u * ((120u * 160u + 2u) / 3u));

  EXPECT_THROW(svc.frame("study-a", 80, ""), Error);
  EXPECT_THROW(svc.frame("study-x", 0, ""), Error);
  EXPECT_THROW(svc.frame("study-b", 0, id), Error);
}

TEST(Service, ToolsAndStudies) {
  SessionService svc(options());
  const auto tools = svc.tools();
  ASSERT_EQ(tools["tools"].size(), 4u);
  EXPECT_EQ(tools["tools"][2]["name"], "measure");
  const auto studies = svc.studies();
  ASSERT_EQ(studies.size(), 2u);
  EXPECT_EQ(studies[1]["has_pixels"], true);
}

TEST(Service, SseBlockFormat) {
  const TraceEvent e{"s", 4, EventKind::Thought, {{"text", "hi"}}};
  const auto block = sse_block(e);
  EXPECT_EQ(block.rfind("id: 4\nevent: thought\ndata: {", 0), 0u);
  EXPECT_EQ(block.substr(block.size() - 2), "\n\n");
}

TEST(Service, TraceLogRestoresSessions) {
  const auto dir = fixtures::temp_dir("trace-log");
  auto o = options();
  o.trace_log = dir / "trace.jsonl";
  std::string id;
  std::vector<TraceEvent> before;
  json handle_before;
  {
    SessionService svc(o);
    id = svc.create_session({"study-a", kLvid, json::object(), ""})["session_id"];
    svc.wait_done(id, 10s);
    before = svc.events(id);
    handle_before = svc.session_handle(id);
  }
  SessionService restored(o);
  const auto after = restored.events(id);
  ASSERT_EQ(after.size(), before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_EQ(dump_json(event_to_json(after[i])), dump_json(event_to_json(before[i])));
  }
  EXPECT_EQ(restored.session_handle(id), handle_before);
  const auto next = restored.create_session({"study-a", kLvid, json::object(), ""});
  EXPECT_EQ(next["session_id"], "session-000002");
  restored.wait_done(next["session_id"], 10s);
}

TEST(Service, RestartMarksInterruptedSessionsAborted) {
  const auto dir = fixtures::temp_dir("trace-cut");
  const auto log = dir / "trace.jsonl";
  {
    std::ofstream out(log);
    out << R"({"type":"session","session_id":"session-000004","study_id":"study-a","query":"q","config":{"budget":15}})"
        << "\n"
        << R"({"type":"event","event":{"session_id":"session-000004","seq":0,"kind":"session_started","payload":{}}})"
        << "\n";
  }
  auto o = options();
  o.trace_log = log;
  SessionService svc(o);
  const auto h = svc.session_handle("session-000004");
  EXPECT_EQ(h["status"], "aborted");
  EXPECT_EQ(h["abort_reason"], "service restarted");
  bool closed = false;
  EXPECT_EQ(svc.wait_events("session-000004", 0, 10ms, closed).size(), 1u);
  EXPECT_TRUE(closed);
  EXPECT_EQ(svc.abort("session-000004")["outcome"], "noop");
}

TEST(Service, BenchmarkRequest) {
  auto o = options();
  BenchmarkCase c;
  c.case_id = "case-001";
  c.study_id = "study-a";
  c.question = kLvid;
  c.gold.values = {{"LVID", 4.6, "cm", 0.46}};
  c.gold.text = "LVID 4.6 cm";
  c.template_id = "easy.single_ed";
  o.benchmark = {c};
  SessionService svc(o);
  const auto r = svc.run_benchmark_request({{"timing", false}});
  EXPECT_EQ(r["report"]["summary"]["overall"]["correct"], 1);
  EXPECT_FALSE(r["report"].contains("timing"));
  EXPECT_TRUE(r["table"].is_string());
  const auto ab = svc.run_benchmark_request({{"ablate", true}, {"cases", json::array({case_to_json(c)})}});
  EXPECT_EQ(ab["ablation"].size(), 4u);
  EXPECT_THROW(svc.run_benchmark_request({{"judge", "oracle"}}), Error);
  EXPECT_THROW(svc.run_benchmark_request({{"judge", "model"}}), Error);
}

TEST(Http, EndpointsAndStatusCodes) {
  SessionService svc(options());
  HttpService http(svc);
  const int port = http.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);

  const auto created = fixtures::http_post_json(port, "/sessions",
                                               json{{"study_id", "study-a"}, {"query", kLvid}}.dump());
  ASSERT_EQ(created.status, 201) << created.body;
  const std::string id = json::parse(created.body)["session_id"];

  EXPECT_EQ(fixtures::http_post_json(port, "/sessions", json{{"study_id", "zzz"}, {"query", "q"}}.dump()).status, 404);
  const auto zero = fixtures::http_post_json(
      port, "/sessions", json{{"study_id", "study-a"}, {"query", "q"}, {"config", {{"budget", 0}}}}.dump());
  EXPECT_EQ(zero.status, 400);
  EXPECT_EQ(json::parse(zero.body)["error"], "InvalidArgument");
  EXPECT_EQ(fixtures::http_post_json(port, "/sessions", "{not json").status, 400);
  EXPECT_EQ(fixtures::http_post_json(port, "/sessions", R"({"study_id": "study-a"})").status, 400);
  EXPECT_EQ(fixtures::http_get(port, "/sessions/session-424242").status, 404);

  // Full replay: the stream closes after the terminal event.
  const auto sse = fixtures::http_get(port, "/sessions/" + id + "/events");
  ASSERT_EQ(sse.status, 200);
  EXPECT_NE(sse.headers.at("Content-Type").find("text/event-stream"), std::string::npos);
  const auto blocks = parse_sse(sse.body);
  const auto events = svc.events(id);
  ASSERT_EQ(blocks.size(), events.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    EXPECT_EQ(blocks[i].first, std::to_string(i));
    EXPECT_EQ(blocks[i].second, event_to_json(events[i]));
  }

  const auto tail = parse_sse(fixtures::http_get(port, "/sessions/" + id + "/events?from=3").body);
  ASSERT_EQ(tail.size(), events.size() - 3);
  EXPECT_EQ(tail.front().first, "3");
  const auto resumed = parse_sse(fixtures::http_get(port, "/sessions/" + id + "/events", {{"Last-Event-ID", "4"}}).body);
  ASSERT_EQ(resumed.size(), events.size() - 5);
  EXPECT_EQ(resumed.front().first, "5");
  EXPECT_TRUE(parse_sse(fixtures::http_get(port, "/sessions/" + id + "/events?from=999").body).empty());
  EXPECT_EQ(fixtures::http_get(port, "/sessions/" + id + "/events?from=-1").status, 400);
  EXPECT_EQ(fixtures::http_get(port, "/sessions/nope/events").status, 404);

  const auto handle = fixtures::http_get(port, "/sessions/" + id);
  EXPECT_EQ(json::parse(handle.body)["status"], "finished");
  EXPECT_EQ(json::parse(fixtures::http_post_json(port, "/sessions/" + id + "/abort", "").body)["outcome"], "noop");

  EXPECT_EQ(json::parse(fixtures::http_get(port, "/tools").body)["tools"].size(), 4u);
  EXPECT_EQ(json::parse(fixtures::http_get(port, "/studies").body).size(), 2u);
  const auto frame = fixtures::http_get(port, "/studies/study-a/frames/5?session=" + id);
  ASSERT_EQ(frame.status, 200);
  EXPECT_EQ(json::parse(frame.body)["overlays"].size(), 1u);
  EXPECT_EQ(fixtures::http_get(port, "/studies/study-a/frames/80").status, 404);
  EXPECT_EQ(fixtures::http_get(port, "/studies/study-a/frames/-1").status, 404);
  EXPECT_EQ(fixtures::http_get(port, "/studies/study-b/frames/0?session=" + id).status, 400);

  const auto bench = fixtures::http_post_json(port, "/benchmarks/run", R"({"cases": [], "timing": false})");
  ASSERT_EQ(bench.status, 200) << bench.body;
  EXPECT_EQ(json::parse(bench.body)["report"]["summary"]["overall"]["total"], 0);
  http.stop();
}

TEST(Http, LiveStreamAndAbort) {
  SessionService svc(options());
  HttpService http(svc);
  const int port = http.start("127.0.0.1", 0);
  const auto created = fixtures::http_post_json(
      port, "/sessions", json{{"study_id", "study-a"}, {"query", kLvid}, {"config", {{"backend", "slow"}}}}.dump());
  const std::string id = json::parse(created.body)["session_id"];
  std::thread aborter([&] {
    std::this_thread::sleep_for(100ms);
    fixtures::http_post_json(port, "/sessions/" + id + "/abort", "");
  });
  const auto sse = fixtures::http_get(port, "/sessions/" + id + "/events");
  aborter.join();
  const auto blocks = parse_sse(sse.body);
  ASSERT_FALSE(blocks.empty());
  EXPECT_EQ(blocks.back().second["kind"], "aborted");
  for (std::size_t i = 0; i < blocks.size(); ++i) EXPECT_EQ(blocks[i].first, std::to_string(i));
  http.stop();
}

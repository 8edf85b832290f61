#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <mutex>

#include "echoreason/agent_loop.hpp"
#include "echoreason/bench.hpp"
#include "echoreason/guideline_store.hpp"
#include "echoreason/policy_backend.hpp"
#include "echoreason/study_io.hpp"
#include "echoreason/tool_suite.hpp"

namespace echoreason {

// Per-session settings. Requests may override any field.
struct SessionConfig {
  std::string backend = "policy";
  int budget = kDefaultBudget;
  ToolFlags flags;
  std::string noise = "zero";  // "zero", "calibrated" or "custom"
  NoiseProfile noise_profile;  // resolved profile
};

json session_config_to_json(const SessionConfig& c);

struct ServiceOptions {
  std::shared_ptr<const StudyCatalog> catalog;
  std::shared_ptr<const GuidelineIndex> guidelines;
  // Orchestrator backends selectable by name.
  std::map<std::string, BackendFactory> backends;
  SessionConfig defaults;
  NoiseProfile calibrated_noise;
  std::optional<AdapterConfig> adapter;
  // Append-only JSONL log of session handles and events; reloaded on start.
  std::optional<std::filesystem::path> trace_log;
  // Cases used by POST /benchmarks/run when the request carries none.
  std::vector<BenchmarkCase> benchmark;
  int bench_parallelism = 1;
};

struct SessionRequest {
  std::string study_id;
  std::string query;
  json config = json::object();
  std::string follow_up_of;
};

// Query text for a follow-up: the prior answer followed by the new question.
std::string follow_up_query(std::string_view prior_answer, std::string_view query);

// Session store plus the request handlers; the HTTP layer is a thin wrapper
// so handlers are testable without sockets.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  // Throws NotFound (unknown study or prior session) or InvalidArgument /
  // ConfigError (bad config). The session runs on its own thread.
  json create_session(const SessionRequest& request);
  json session_handle(const std::string& session_id) const;
  // {outcome: aborted|noop, status}. Abort takes effect before the next step.
  json abort(const std::string& session_id);

  // Blocks until events past `from` exist or the session has ended, or the
  // timeout passes. `closed` is set once nothing more will arrive.
  std::vector<TraceEvent> wait_events(const std::string& session_id, std::uint64_t from,
                                      std::chrono::milliseconds timeout, bool& closed) const;
  std::vector<TraceEvent> events(const std::string& session_id) const;
  // Blocks until the session leaves running (or the timeout passes).
  bool wait_done(const std::string& session_id, std::chrono::milliseconds timeout) const;

  json studies() const;
  json frame(const std::string& study_id, int index, const std::string& session_id) const;
  json tools() const;
  json run_benchmark_request(const json& body);

  std::size_t session_count() const;

 private:
  struct Record;
  std::shared_ptr<Record> find(const std::string& session_id) const;
  SessionConfig resolve_config(const json& overrides) const;
  void log_line(const json& line);
  void load_log();

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Record>> sessions_;
  std::uint64_t next_id_ = 1;
  std::mutex log_mutex_;
};

// Formats one event as a server-sent event block.
std::string sse_block(const TraceEvent& e);

class HttpService {
 public:
  explicit HttpService(SessionService& sessions);
  ~HttpService();
  // Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace echoreason

#include "echoreason/service.hpp"

#include <httplib.h>

#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <thread>

namespace echoreason {

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<SessionStatus> status_from_terminal(EventKind k) {
  switch (k) {
    case EventKind::Finish:
      return SessionStatus::Finished;
    case EventKind::ForcedAnswer:
      return SessionStatus::BudgetExhausted;
    case EventKind::Aborted:
      return SessionStatus::Aborted;
    default:
      return std::nullopt;
  }
}

ToolFlags flags_from_json(const json& j, ToolFlags base) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "flags must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_boolean()) throw Error(Errc::ConfigError, "flag '" + key + "' must be a boolean");
    if (key == "feasibility") {
      base.feasibility = value.get<bool>();
    } else if (key == "retrieval") {
      base.retrieval = value.get<bool>();
    } else {
      throw Error(Errc::ConfigError, "unknown flag '" + key + "'");
    }
  }
  return base;
}

}  // namespace

json session_config_to_json(const SessionConfig& c) {
  return {{"backend", c.backend},
          {"budget", c.budget},
          {"flags", {{"feasibility", c.flags.feasibility}, {"retrieval", c.flags.retrieval}}},
          {"noise", c.noise},
          {"noise_profile", noise_to_json(c.noise_profile)}};
}

std::string follow_up_query(std::string_view prior_answer, std::string_view query) {
  return "Context from the previous answer: " + std::string(prior_answer) + "\nFollow-up question: " +
         std::string(query);
}

struct SessionService::Record {
  std::string id;
  std::string study_id;
  std::string query;
  std::string created_at;
  std::string follow_up_of;
  SessionConfig config;

  mutable std::mutex m;
  mutable std::condition_variable cv;
  std::vector<TraceEvent> events;
  SessionStatus status = SessionStatus::Running;
  bool ended = false;  // no further events will be appended
  json answer;
  std::string abort_reason;
  std::atomic<bool> abort_flag{false};
  std::thread worker;

  json handle() const {
    std::lock_guard lock(m);
    json j = {{"session_id", id},
              {"created_at", created_at},
              {"status", status_name(status)},
              {"study_id", study_id},
              {"query", query},
              {"config", session_config_to_json(config)},
              {"event_count", events.size()},
              {"answer", answer}};
    if (!follow_up_of.empty()) j["follow_up_of"] = follow_up_of;
    if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
    return j;
  }

  void append(const TraceEvent& e) {
    {
      std::lock_guard lock(m);
      events.push_back(e);
      if (auto s = status_from_terminal(e.kind)) {
        status = *s;
        if (e.payload.contains("answer")) answer = e.payload["answer"];
        if (e.payload.contains("reason")) abort_reason = e.payload["reason"].get<std::string>();
      }
    }
    cv.notify_all();
  }

  void end() {
    {
      std::lock_guard lock(m);
      ended = true;
    }
    cv.notify_all();
  }
};

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.catalog) options_.catalog = std::make_shared<StudyCatalog>();
  options_.backends.try_emplace("policy", [] { return std::unique_ptr<Backend>(std::make_unique<PolicyBackend>()); });
  if (options_.trace_log) load_log();
}

SessionService::~SessionService() {
  std::vector<std::shared_ptr<Record>> all;
  {
    std::lock_guard lock(mutex_);
    for (auto& [_, r] : sessions_) all.push_back(r);
  }
  for (auto& r : all) r->abort_flag = true;
  for (auto& r : all) {
    if (r->worker.joinable()) r->worker.join();
  }
}

void SessionService::log_line(const json& line) {
  if (!options_.trace_log) return;
  std::lock_guard lock(log_mutex_);
  std::ofstream out(*options_.trace_log, std::ios::app);
  out << dump_json(line) << '\n';
}

void SessionService::load_log() {
  std::ifstream in(*options_.trace_log);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::FormatError, "trace log line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "session") {
      auto r = std::make_shared<Record>();
      r->id = j.at("session_id").get<std::string>();
      r->study_id = j.at("study_id").get<std::string>();
      r->query = j.at("query").get<std::string>();
      r->created_at = j.value("created_at", "");
      r->follow_up_of = j.value("follow_up_of", "");
      const json& c = j.at("config");
      r->config.backend = c.value("backend", "policy");
      r->config.budget = c.value("budget", kDefaultBudget);
      r->config.flags = flags_from_json(c.value("flags", json::object()), {});
      r->config.noise = c.value("noise", "zero");
      if (c.contains("noise_profile")) r->config.noise_profile = noise_from_json(c["noise_profile"]);
      r->ended = true;  // a restored session never runs again
      sessions_[r->id] = r;
      unsigned long long n = 0;
      if (std::sscanf(r->id.c_str(), "session-%llu", &n) == 1) next_id_ = std::max<std::uint64_t>(next_id_, n + 1);
    } else if (type == "event") {
      const TraceEvent e = event_from_json(j.at("event"));
      const auto it = sessions_.find(e.session_id);
      if (it == sessions_.end()) continue;
      if (e.seq != it->second->events.size()) continue;  // duplicate or out-of-order line
      it->second->append(e);
    }
  }
  // Sessions cut off by a restart are reported as aborted without inventing events.
  for (auto& [_, r] : sessions_) {
    if (r->status == SessionStatus::Running) {
      r->status = SessionStatus::Aborted;
      r->abort_reason = "service restarted";
    }
  }
}

SessionConfig SessionService::resolve_config(const json& overrides) const {
  SessionConfig c = options_.defaults;
  if (overrides.is_null()) return c;
  if (!overrides.is_object()) throw Error(Errc::ConfigError, "config must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "backend") {
      if (!value.is_string()) throw Error(Errc::ConfigError, "backend must be a string");
      c.backend = value.get<std::string>();
    } else if (key == "budget" || key == "K") {
      if (!value.is_number_integer()) throw Error(Errc::ConfigError, "budget must be an integer");
      c.budget = value.get<int>();
    } else if (key == "flags") {
      c.flags = flags_from_json(value, c.flags);
    } else if (key == "noise") {
      if (value.is_string()) {
        c.noise = value.get<std::string>();
        if (c.noise == "zero") {
          c.noise_profile = NoiseProfile::zero(options_.defaults.noise_profile.seed);
        } else if (c.noise == "calibrated") {
          c.noise_profile = options_.calibrated_noise;
        } else {
          throw Error(Errc::ConfigError, "noise must be 'zero', 'calibrated' or an object");
        }
      } else if (value.is_object()) {
        c.noise = "custom";
        try {
          c.noise_profile = noise_from_json(value);
        } catch (const json::exception& e) {
          throw Error(Errc::ConfigError, std::string("noise profile: ") + e.what());
        }
      } else {
        throw Error(Errc::ConfigError, "noise must be a string or an object");
      }
    } else {
      throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
    }
  }
  if (c.budget < 1) throw Error(Errc::InvalidArgument, "budget must be at least 1, got " + std::to_string(c.budget));
  if (!options_.backends.count(c.backend)) throw Error(Errc::ConfigError, "unknown backend '" + c.backend + "'");
  validate_noise(c.noise_profile);
  return c;
}

json SessionService::create_session(const SessionRequest& request) {
  const EchoStudy* study = options_.catalog->find(request.study_id);
  if (study == nullptr) throw Error(Errc::NotFound, "study " + request.study_id + " not found");
  if (trim(request.query).empty()) throw Error(Errc::InvalidArgument, "query is empty");
  SessionConfig config = resolve_config(request.config);

  std::string query = request.query;
  if (!request.follow_up_of.empty()) {
    const auto prior = find(request.follow_up_of);
    if (!prior) throw Error(Errc::NotFound, "session " + request.follow_up_of + " not found");
    std::lock_guard lock(prior->m);
    if (!prior->answer.is_object()) {
      throw Error(Errc::InvalidArgument, "session " + request.follow_up_of + " has no answer to follow up on");
    }
    query = follow_up_query(prior->answer.value("text", ""), request.query);
  }

  auto r = std::make_shared<Record>();
  r->study_id = request.study_id;
  r->query = std::move(query);
  r->created_at = utc_now();
  r->follow_up_of = request.follow_up_of;
  r->config = config;
  {
    std::lock_guard lock(mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "session-%06llu", static_cast<unsigned long long>(next_id_++));
    r->id = id;
    sessions_[r->id] = r;
  }
  json header = r->handle();
  header["type"] = "session";
  log_line(header);

  const BackendFactory factory = options_.backends.at(config.backend);
  const ToolSuiteOptions tools{config.flags, config.noise_profile, options_.adapter};
  const GuidelineIndex* guidelines = options_.guidelines.get();
  r->worker = std::thread([this, r, factory, tools, study, guidelines] {
    const ToolRegistry registry = build_tool_registry(tools);
    AgentEnvironment env;
    env.registry = &registry;
    env.context = {study, guidelines};
    env.abort_requested = &r->abort_flag;
    env.sink = [this, r](const TraceEvent& e) {
      r->append(e);
      log_line({{"type", "event"}, {"event", event_to_json(e)}});
    };
    try {
      auto backend = factory();
      env.backend = backend.get();
      run_session(r->query, r->study_id, env, r->config.budget, r->id);
    } catch (const SessionError&) {
      // The aborted event has already been emitted.
    } catch (const std::exception& e) {
      std::size_t seq = 0;
      bool terminal = false;
      {
        std::lock_guard lock(r->m);
        seq = r->events.size();
        terminal = !r->events.empty() && is_terminal(r->events.back().kind);
      }
      if (!terminal) env.sink({r->id, seq, EventKind::Aborted, {{"reason", e.what()}}});
    }
    r->end();
  });
  return r->handle();
}

std::shared_ptr<SessionService::Record> SessionService::find(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

json SessionService::session_handle(const std::string& session_id) const {
  const auto r = find(session_id);
  if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
  return r->handle();
}

json SessionService::abort(const std::string& session_id) {
  const auto r = find(session_id);
  if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
  bool running = false;
  {
    std::lock_guard lock(r->m);
    running = r->status == SessionStatus::Running && !r->ended;
  }
  if (running) r->abort_flag = true;
  return {{"session_id", session_id}, {"outcome", running ? "aborted" : "noop"}};
}

std::vector<TraceEvent> SessionService::wait_events(const std::string& session_id, std::uint64_t from,
                                                    std::chrono::milliseconds timeout, bool& closed) const {
  const auto r = find(session_id);
  if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
  std::unique_lock lock(r->m);
  r->cv.wait_for(lock, timeout, [&] { return r->events.size() > from || r->ended; });
  std::vector<TraceEvent> out;
  for (std::size_t i = from; i < r->events.size(); ++i) out.push_back(r->events[i]);
  const bool terminal = !r->events.empty() && is_terminal(r->events.back().kind);
  closed = terminal || r->ended;
  return out;
}

std::vector<TraceEvent> SessionService::events(const std::string& session_id) const {
  const auto r = find(session_id);
  if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
  std::lock_guard lock(r->m);
  return r->events;
}

bool SessionService::wait_done(const std::string& session_id, std::chrono::milliseconds timeout) const {
  const auto r = find(session_id);
  if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
  std::unique_lock lock(r->m);
  return r->cv.wait_for(lock, timeout, [&] { return r->ended; });
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

json SessionService::studies() const {
  json out = json::array();
  for (const auto& id : options_.catalog->ids()) {
    const EchoStudy* s = options_.catalog->find(id);
    out.push_back({{"study_id", s->study_id},
                   {"view", view_name(s->view)},
                   {"frame_count", s->frame_count},
                   {"frame_rate", s->frame_rate},
                   {"pixel_scale", s->pixel_scale},
                   {"height", s->height},
                   {"width", s->width},
                   {"has_pixels", s->has_pixels()}});
  }
  return out;
}

json SessionService::frame(const std::string& study_id, int index, const std::string& session_id) const {
  const EchoStudy* s = options_.catalog->find(study_id);
  if (s == nullptr) throw Error(Errc::NotFound, "study " + study_id + " not found");
  if (!s->in_range(index)) {
    throw Error(Errc::NotFound, "frame " + std::to_string(index) + " outside [0, " + std::to_string(s->frame_count) + ")");
  }
  json out = {{"study_id", study_id},
              {"frame", index},
              {"height", s->height},
              {"width", s->width},
              {"pixel_scale", s->pixel_scale}};
  if (s->has_pixels()) {
    const auto px = s->frame_pixels(index);
    out["placeholder"] = false;
    out["encoding"] = "gray8";
    out["pixels_base64"] = httplib::detail::base64_encode(std::string(px.begin(), px.end()));
  } else {
    out["placeholder"] = true;
  }
  json overlays = json::array();
  if (!session_id.empty()) {
    const auto r = find(session_id);
    if (!r) throw Error(Errc::NotFound, "session " + session_id + " not found");
    if (r->study_id != study_id) {
      throw Error(Errc::InvalidArgument, "session " + session_id + " belongs to study " + r->study_id);
    }
    std::lock_guard lock(r->m);
    for (const auto& e : r->events) {
      if (e.kind != EventKind::ToolResult || e.payload.value("status", "") != "ok") continue;
      const auto m = measurement_from_json(e.payload.value("payload", json()));
      if (!m || m->frame != index) continue;
      json o = {{"step", e.payload.value("step", 0)},
                {"seq", e.seq},
                {"kind", kind_name(m->kind)},
                {"value_cm", m->value_cm},
                {"label", std::string(kind_name(m->kind)) + " " + format_fixed(m->value_cm, 1) + " cm"}};
      o["endpoints"] = e.payload["payload"].value("endpoints", json(nullptr));
      overlays.push_back(std::move(o));
    }
  }
  out["overlays"] = overlays;
  return out;
}

json SessionService::tools() const {
  ToolSuiteOptions o;
  o.flags = options_.defaults.flags;
  o.noise = options_.defaults.noise_profile;
  o.adapter = options_.adapter;
  return build_tool_registry(o).schema_document();
}

json SessionService::run_benchmark_request(const json& body) {
  if (!body.is_object()) throw Error(Errc::ConfigError, "request body must be an object");
  std::vector<BenchmarkCase> cases;
  if (body.contains("cases")) {
    if (!body["cases"].is_array()) throw Error(Errc::ConfigError, "cases must be an array");
    for (const auto& c : body["cases"]) {
      try {
        cases.push_back(case_from_json(c));
      } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, std::string("case record: ") + e.what());
      }
    }
  } else {
    cases = options_.benchmark;
  }
  json overrides = json::object();
  for (const char* key : {"backend", "budget", "flags", "noise"}) {
    if (body.contains(key)) overrides[key] = body[key];
  }
  const SessionConfig config = resolve_config(overrides);
  AgentSetup agent;
  agent.tools = {config.flags, config.noise_profile, options_.adapter};
  agent.budget = config.budget;
  agent.backend = options_.backends.at(config.backend);
  agent.backend_name = config.backend;
  agent.guidelines = options_.guidelines.get();
  JudgeConfig judge;
  const std::string judge_name = body.value("judge", "rule");
  if (judge_name == "model") {
    const std::string judge_backend = body.value("judge_backend", "");
    if (!options_.backends.count(judge_backend)) {
      throw Error(Errc::ConfigError, "model judge needs a known judge_backend");
    }
    judge.kind = JudgeKind::Model;
    judge.backend = options_.backends.at(judge_backend);
  } else if (judge_name != "rule") {
    throw Error(Errc::ConfigError, "judge must be 'rule' or 'model'");
  }
  RunOptions run;
  run.parallelism = body.value("parallelism", options_.bench_parallelism);
  run.seed = body.value("seed", std::uint64_t{0});
  const bool timing = body.value("timing", true);
  if (body.value("ablate", false)) {
    const auto rows = ablation_run(cases, *options_.catalog, agent, judge, run);
    return {{"ablation", ablation_to_json(rows, timing)}, {"table", ablation_table(rows)}};
  }
  const auto report = run_benchmark(cases, *options_.catalog, agent, judge, run);
  return {{"report", report_to_json(report, timing)}, {"table", report_tables(report)}};
}

std::string sse_block(const TraceEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(event_kind_name(e.kind)) +
         "\ndata: " + dump_json(event_to_json(e)) + "\n\n";
}

// ---- HTTP layer --------------------------------------------------------------

namespace {

int http_status_for(Errc code) {
  switch (code) {
    case Errc::NotFound:
      return 404;
    case Errc::InvalidArgument:
    case Errc::ConfigError:
    case Errc::FormatError:
    case Errc::InvalidScale:
      return 400;
    case Errc::BackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(dump_json(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view error_class, const std::string& detail) {
  send_json(res, {{"error", error_class}, {"detail", detail}}, status);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, http_status_for(e.code()), errc_name(e.code()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "FormatError", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "InternalError", e.what());
  }
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  if (s.empty() || s.size() > 19) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

}  // namespace

struct HttpService::Impl {
  SessionService& sessions;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  explicit Impl(SessionService& s) : sessions(s) { routes(); }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        if (!body.is_object()) throw Error(Errc::InvalidArgument, "body must be an object");
        SessionRequest r;
        r.study_id = body.at("study_id").get<std::string>();
        r.query = body.at("query").get<std::string>();
        r.config = body.value("config", json::object());
        r.follow_up_of = body.value("follow_up_of", "");
        send_json(res, sessions.create_session(r), 201);
      });
    });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, sessions.session_handle(req.matches[1])); });
    });
    server.Post(R"(/sessions/([^/]+)/abort)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, sessions.abort(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { stream(req, res); });
    });
    server.Get("/studies", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, sessions.studies()); });
    });
    server.Get(R"(/studies/([^/]+)/frames/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string session = req.has_param("session") ? req.get_param_value("session") : "";
        long index = 0;
        try {
          index = std::stol(req.matches[2].str());
        } catch (const std::exception&) {
          throw Error(Errc::NotFound, "frame index out of range");
        }
        if (index < 0 || index > std::numeric_limits<int>::max()) throw Error(Errc::NotFound, "frame index out of range");
        send_json(res, sessions.frame(req.matches[1], static_cast<int>(index), session));
      });
    });
    server.Get("/tools", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, sessions.tools()); });
    });
    server.Post("/benchmarks/run", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = req.body.empty() ? json::object() : json::parse(req.body);
        send_json(res, sessions.run_benchmark_request(body));
      });
    });
  }

  void stream(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::uint64_t from = 0;
    if (req.has_param("from")) {
      const auto v = parse_u64(req.get_param_value("from"));
      if (!v) throw Error(Errc::InvalidArgument, "from must be a non-negative integer");
      from = *v;
    }
    // A reconnecting EventSource resumes after the last id it saw.
    if (req.has_header("Last-Event-ID")) {
      const auto v = parse_u64(req.get_header_value("Last-Event-ID"));
      if (!v) throw Error(Errc::InvalidArgument, "Last-Event-ID must be a non-negative integer");
      from = std::max(from, *v + 1);
    }
    sessions.session_handle(id);  // 404 before the stream opens
    auto cursor = std::make_shared<std::uint64_t>(from);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
      if (stopping) return false;
      bool closed = false;
      const auto batch = sessions.wait_events(id, *cursor, std::chrono::milliseconds(200), closed);
      for (const auto& e : batch) {
        const std::string block = sse_block(e);
        if (!sink.write(block.data(), block.size())) return false;
        *cursor = e.seq + 1;
      }
      // `closed` was computed under the same lock as the batch, so nothing
      // arrives after it is set.
      if (closed) sink.done();
      return true;
    });
  }
};

HttpService::HttpService(SessionService& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(Errc::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace echoreason

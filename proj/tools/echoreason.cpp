// echoreason command-line entry point.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "echoreason/bench.hpp"
#include "echoreason/calibration.hpp"
#include "echoreason/echo_sim.hpp"
#include "echoreason/policy_backend.hpp"
#include "echoreason/reference_pack.hpp"
#include "echoreason/service.hpp"

using namespace echoreason;

namespace {

// Values given on the command line win over environment variables, which
// win over the config file.
struct Settings {
  json file = json::object();
  std::uint64_t seed = 0;
  std::string config_path;

  std::string data;
  std::string backend;
  std::string endpoint;
  std::string model;
  int budget = 0;
  bool no_feasibility = false;
  bool no_retrieval = false;
  std::string noise;
  std::string index;
  std::string adapter;
  int parallelism = 0;

  template <typename T>
  T from_file(const char* key, T fallback) const {
    return file.contains(key) ? file[key].get<T>() : fallback;
  }

  void load() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw Error(Errc::IoError, "cannot read config " + config_path);
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigError, config_path + ": " + e.what());
    }
    if (!file.is_object()) throw Error(Errc::ConfigError, config_path + ": top level must be an object");
  }

  std::uint64_t effective_seed(bool given) const { return given ? seed : from_file<std::uint64_t>("seed", 0); }

  std::string data_dir() const {
    const std::string d = data.empty() ? from_file<std::string>("data", "") : data;
    if (d.empty()) throw Error(Errc::ConfigError, "no dataset directory (--data)");
    return d;
  }

  std::string backend_name() const { return backend.empty() ? from_file<std::string>("backend", "policy") : backend; }

  BackendConfig remote_config() const {
    BackendConfig c;
    const json r = file.value("remote", json::object());
    c.endpoint = r.value("endpoint", "");
    c.model = r.value("model", "");
    c.temperature = r.value("temperature", 0.0);
    c.timeout_ms = r.value("timeout_ms", 60000);
    c.retries = r.value("retries", 2);
    c.debug = r.value("debug", false);
    if (const char* e = std::getenv("ECHOREASON_BACKEND_ENDPOINT")) c.endpoint = e;
    if (const char* m = std::getenv("ECHOREASON_MODEL")) c.model = m;
    if (!endpoint.empty()) c.endpoint = endpoint;
    if (!model.empty()) c.model = model;
    return c;
  }

  std::map<std::string, BackendFactory> backends() const {
    std::map<std::string, BackendFactory> out;
    out["policy"] = [] { return std::unique_ptr<Backend>(std::make_unique<PolicyBackend>()); };
    const BackendConfig remote = remote_config();
    if (!remote.endpoint.empty()) {
      out["remote"] = [remote] { return std::unique_ptr<Backend>(std::make_unique<RemoteBackend>(remote)); };
    }
    return out;
  }

  int effective_budget() const { return budget != 0 ? budget : from_file<int>("budget", kDefaultBudget); }

  ToolFlags flags() const {
    ToolFlags f;
    const json j = file.value("flags", json::object());
    f.feasibility = j.value("feasibility", true) && !no_feasibility;
    f.retrieval = j.value("retrieval", true) && !no_retrieval;
    return f;
  }

  std::optional<AdapterConfig> adapter_config() const {
    std::string url = from_file<std::string>("adapter", "");
    if (const char* e = std::getenv("ECHOREASON_ADAPTER_ENDPOINT")) url = e;
    if (!adapter.empty()) url = adapter;
    if (url.empty()) return std::nullopt;
    AdapterConfig c;
    c.endpoint = url;
    return c;
  }

  std::string noise_name() const { return noise.empty() ? from_file<std::string>("noise", "zero") : noise; }

  std::shared_ptr<const GuidelineIndex> guidelines() const {
    const std::string path = index.empty() ? from_file<std::string>("index", "") : index;
    if (path.empty()) return std::make_shared<GuidelineIndex>(build_reference_index());
    return std::make_shared<GuidelineIndex>(GuidelineIndex::load(path));
  }

  int effective_parallelism() const { return parallelism != 0 ? parallelism : from_file<int>("parallelism", 1); }
};

std::vector<EchoStudy> catalog_studies(const StudyCatalog& catalog) {
  std::vector<EchoStudy> out;
  for (const auto& id : catalog.ids()) out.push_back(*catalog.find(id));
  return out;
}

NoiseProfile calibrated_for(const StudyCatalog& catalog, std::uint64_t seed) {
  const auto studies = catalog_studies(catalog);
  return calibrated_noise_profile(seed, solve_flip_rates(count_key_frame_labels(studies)));
}

// "zero", "calibrated" or a path to a noise profile JSON document.
NoiseProfile resolve_noise(const std::string& name, const StudyCatalog& catalog, std::uint64_t seed) {
  if (name == "zero") return NoiseProfile::zero(seed);
  if (name == "calibrated") return calibrated_for(catalog, seed);
  std::ifstream in(name);
  if (!in) throw Error(Errc::ConfigError, "noise must be zero, calibrated or a readable JSON file: " + name);
  NoiseProfile p = noise_from_json(json::parse(in));
  validate_noise(p);
  return p;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << text;
}

void add_agent_options(CLI::App* cmd, Settings& s) {
  cmd->add_option("--data", s.data, "Dataset directory written by 'generate'");
  cmd->add_option("--backend", s.backend, "Orchestrator backend: policy or remote");
  cmd->add_option("--endpoint", s.endpoint, "Chat completions endpoint for the remote backend");
  cmd->add_option("--model", s.model, "Model name for the remote backend");
  cmd->add_option("--budget", s.budget, "Step budget K")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-feasibility", s.no_feasibility, "Remove predict_feasibility from the registry");
  cmd->add_flag("--no-retrieval", s.no_retrieval, "Remove search_guideline from the registry");
  cmd->add_option("--noise", s.noise, "zero, calibrated or a noise profile JSON file");
  cmd->add_option("--index", s.index, "Guideline index file (default: built-in reference pack)");
  cmd->add_option("--adapter", s.adapter, "External vision adapter endpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guideline-grounded agentic reasoning over echocardiography studies"};
  app.require_subcommand(1);
  Settings s;
  app.add_option("--config", s.config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", s.seed, "Master seed for all randomness");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset and benchmark");
  std::string gen_out;
  int gen_studies = 200;
  bool gen_pixels = false;
  DifficultyMix mix;
  std::string gen_bench;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--studies", gen_studies, "Number of studies")->check(CLI::PositiveNumber);
  gen->add_flag("--pixels", gen_pixels, "Render grayscale pixel payloads");
  gen->add_option("--easy", mix.easy, "Easy cases");
  gen->add_option("--medium", mix.medium, "Medium cases");
  gen->add_option("--difficult", mix.difficult, "Difficult cases");
  gen->add_option("--benchmark", gen_bench, "Benchmark file (default <out>/benchmark.jsonl)");

  // ingest
  auto* ing = app.add_subcommand("ingest", "Build a guideline index");
  std::string ing_docs, ing_out;
  ChunkOptions chunking;
  ing->add_option("--docs", ing_docs, "Directory of .txt/.md guideline documents (default: built-in pack)");
  ing->add_option("--out", ing_out, "Index file")->required();
  ing->add_option("--chunk-size", chunking.size, "Passage length in characters");
  ing->add_option("--overlap", chunking.overlap, "Passage overlap in characters");

  // query
  auto* q = app.add_subcommand("query", "Run one reasoning session");
  std::string q_study, q_question, q_trace;
  q->add_option("--study", q_study, "Study id")->required();
  q->add_option("--question", q_question, "Clinical question")->required();
  q->add_option("--trace", q_trace, "Write the event trace as JSON");
  add_agent_options(q, s);

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark runs and tool metrics");
  bench->require_subcommand(1);
  std::string b_cases, b_out, b_judge = "rule", b_judge_backend;
  bool b_no_timing = false;
  auto add_bench_options = [&](CLI::App* cmd) {
    add_agent_options(cmd, s);
    cmd->add_option("--cases", b_cases, "Benchmark file (default <data>/benchmark.jsonl)");
    cmd->add_option("--out", b_out, "Report JSON path");
    cmd->add_option("--parallel", s.parallelism, "Concurrent cases")->check(CLI::PositiveNumber);
    cmd->add_option("--judge", b_judge, "rule or model")->check(CLI::IsMember({"rule", "model"}));
    cmd->add_option("--judge-backend", b_judge_backend, "Backend for the model judge (remote)");
    cmd->add_flag("--no-timing", b_no_timing, "Leave the timing block out of the report");
  };
  auto* run = bench->add_subcommand("run", "Run the benchmark with one configuration");
  add_bench_options(run);
  auto* ablate = bench->add_subcommand("ablate", "Run the four-way tool ablation");
  add_bench_options(ablate);
  auto* metrics = bench->add_subcommand("metrics", "Score the video tools directly against ground truth");
  add_agent_options(metrics, s);
  metrics->add_option("--out", b_out, "Metrics JSON path");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host = "127.0.0.1", trace_log;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--trace-log", trace_log, "Append-only JSONL trace log");
  serve->add_option("--cases", b_cases, "Benchmark used by POST /benchmarks/run");
  add_agent_options(serve, s);

  CLI11_PARSE(app, argc, argv);

  try {
    s.load();
    const std::uint64_t seed = s.effective_seed(seed_opt->count() > 0);

    if (gen->parsed()) {
      SimConfig config;
      config.seed = seed;
      config.study_count = gen_studies;
      config.pixels = gen_pixels;
      validate_config(config);
      const auto studies = generate_dataset(config);
      write_dataset(gen_out, studies);
      BenchmarkOptions options;
      options.mix = mix;
      options.seed = seed;
      const auto benchmark = generate_benchmark(studies, options);
      for (const auto& w : benchmark.warnings) std::cerr << "warning: " << w << "\n";
      const std::string path = gen_bench.empty() ? (std::filesystem::path(gen_out) / "benchmark.jsonl").string() : gen_bench;
      write_benchmark(path, benchmark.cases);
      std::cout << "wrote " << studies.size() << " studies to " << gen_out << " and " << benchmark.cases.size()
                << " cases to " << path << "\n";
      return 0;
    }

    if (ing->parsed()) {
      auto docs = ing_docs.empty() ? reference_pack_documents() : ingest_directory(ing_docs);
      const auto index = build_index_from_documents(std::move(docs), chunking);
      index.save(ing_out);
      std::cout << "indexed " << index.documents().size() << " documents into " << index.size() << " passages\n";
      return 0;
    }

    const auto backends = s.backends();
    auto require_backend = [&](const std::string& name) {
      const auto it = backends.find(name);
      if (it == backends.end()) {
        throw Error(Errc::ConfigError, "backend '" + name + "' is not configured" +
                                           (name == "remote" ? " (set --endpoint or ECHOREASON_BACKEND_ENDPOINT)" : ""));
      }
      return it->second;
    };

    if (q->parsed()) {
      const auto catalog = StudyCatalog::load(s.data_dir());
      const EchoStudy* study = catalog.find(q_study);
      if (study == nullptr) throw Error(Errc::NotFound, "study " + q_study + " not found");
      const auto guidelines = s.guidelines();
      const ToolRegistry registry =
          build_tool_registry({s.flags(), resolve_noise(s.noise_name(), catalog, seed), s.adapter_config()});
      auto backend = require_backend(s.backend_name())();
      AgentEnvironment env;
      env.registry = &registry;
      env.context = {study, guidelines.get()};
      env.backend = backend.get();
      env.sink = [](const TraceEvent& e) {
        std::cerr << "[" << e.seq << "] " << event_kind_name(e.kind) << " " << dump_json(e.payload) << "\n";
      };
      SessionState state;
      try {
        state = run_session(q_question, q_study, env, s.effective_budget(), "cli");
      } catch (const SessionError& e) {
        state = e.partial();
        std::cerr << "session aborted: " << e.what() << "\n";
      }
      if (!q_trace.empty()) write_text(q_trace, dump_json(trace_to_json(state.events), 2) + "\n");
      std::cout << "status: " << status_name(state.status) << "\n";
      if (state.answer) std::cout << state.answer->text << "\n";
      return state.answer ? 0 : 1;
    }

    if (run->parsed() || ablate->parsed()) {
      const std::string data = s.data_dir();
      const auto catalog = StudyCatalog::load(data);
      const std::string cases_path = b_cases.empty() ? (std::filesystem::path(data) / "benchmark.jsonl").string() : b_cases;
      const auto cases = read_benchmark(cases_path);
      const auto guidelines = s.guidelines();
      AgentSetup agent;
      agent.tools = {s.flags(), resolve_noise(s.noise_name(), catalog, seed), s.adapter_config()};
      agent.budget = s.effective_budget();
      agent.backend_name = s.backend_name();
      agent.backend = require_backend(agent.backend_name);
      agent.guidelines = guidelines.get();
      JudgeConfig judge;
      if (b_judge == "model") {
        judge.kind = JudgeKind::Model;
        judge.backend = require_backend(b_judge_backend.empty() ? "remote" : b_judge_backend);
      }
      RunOptions options;
      options.parallelism = s.effective_parallelism();
      options.seed = seed;
      if (run->parsed()) {
        const auto report = run_benchmark(cases, catalog, agent, judge, options);
        if (!b_out.empty()) write_text(b_out, dump_json(report_to_json(report, !b_no_timing), 2) + "\n");
        std::cout << report_tables(report);
      } else {
        const auto rows = ablation_run(cases, catalog, agent, judge, options);
        if (!b_out.empty()) write_text(b_out, dump_json(ablation_to_json(rows, !b_no_timing), 2) + "\n");
        std::cout << ablation_table(rows);
      }
      return 0;
    }

    if (metrics->parsed()) {
      const auto catalog = StudyCatalog::load(s.data_dir());
      const auto studies = catalog_studies(catalog);
      ToolSuiteOptions tools{s.flags(), resolve_noise(s.noise_name(), catalog, seed), s.adapter_config()};
      tools.flags.feasibility = true;
      const auto m = evaluate_tools_on_studies(studies, tools);
      if (!b_out.empty()) write_text(b_out, dump_json(tool_metrics_to_json(m), 2) + "\n");
      std::cout << dump_json(tool_metrics_to_json(m), 2) << "\n";
      return 0;
    }

    if (serve->parsed()) {
      const std::string data = s.data_dir();
      ServiceOptions options;
      auto catalog = std::make_shared<StudyCatalog>(StudyCatalog::load(data));
      options.catalog = catalog;
      options.guidelines = s.guidelines();
      options.backends = backends;
      options.defaults.backend = s.backend_name();
      options.defaults.budget = s.effective_budget();
      options.defaults.flags = s.flags();
      options.calibrated_noise = calibrated_for(*catalog, seed);
      options.defaults.noise = s.noise_name();
      options.defaults.noise_profile = resolve_noise(options.defaults.noise, *catalog, seed);
      if (options.defaults.noise != "zero" && options.defaults.noise != "calibrated") options.defaults.noise = "custom";
      options.adapter = s.adapter_config();
      if (!trace_log.empty()) options.trace_log = trace_log;
      const std::string cases_path = b_cases.empty() ? (std::filesystem::path(data) / "benchmark.jsonl").string() : b_cases;
      if (std::filesystem::exists(cases_path)) options.benchmark = read_benchmark(cases_path);
      options.bench_parallelism = s.effective_parallelism();
      SessionService sessions(std::move(options));
      HttpService http(sessions);
      std::cerr << "listening on " << host << ":" << port << "\n";
      http.listen(host, port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include "echoreason/tool_suite.hpp"

#include <memory>

namespace echoreason {

namespace {

const EchoStudy& need_study(const ToolContext& ctx) {
  if (ctx.study == nullptr) throw Error(Errc::ExecutionFailure, "no study bound to this session");
  return *ctx.study;
}

std::vector<std::string> kind_names() {
  std::vector<std::string> names;
  for (const auto& k : measurement_kinds()) names.emplace_back(k.name);
  return names;
}

json feasibility_to_json(const FeasibilityResult& r) {
  json feasible = json::array();
  json vector = json::array();
  json confidence = json::object();
  for (const auto& k : measurement_kinds()) {
    const bool bit = r.predicted.test(kind_index(k.kind));
    if (bit) feasible.push_back(k.name);
    vector.push_back(bit ? 1 : 0);
    confidence[std::string(k.name)] = r.confidence[kind_index(k.kind)];
  }
  return {{"frame", r.frame}, {"feasible", feasible}, {"vector", vector}, {"confidence", confidence}};
}

}  // namespace

json measurement_to_json(const Measurement& m) {
  json j = {{"kind", kind_name(m.kind)},
            {"frame", m.frame},
            {"value_cm", m.value_cm},
            {"unit", "cm"},
            {"source", m.source == MeasurementSource::Oracle ? "oracle" : "external"}};
  if (m.endpoints) {
    j["endpoints"] = {{(*m.endpoints)[0].x, (*m.endpoints)[0].y}, {(*m.endpoints)[1].x, (*m.endpoints)[1].y}};
  }
  return j;
}

std::optional<Measurement> measurement_from_json(const json& p) {
  if (!p.is_object()) return std::nullopt;
  try {
    const auto kind = parse_kind(p.at("kind").get<std::string>());
    if (!kind) return std::nullopt;
    Measurement m;
    m.kind = *kind;
    m.frame = p.at("frame").get<int>();
    m.value_cm = p.at("value_cm").get<double>();
    m.source = p.value("source", "oracle") == "external" ? MeasurementSource::External : MeasurementSource::Oracle;
    if (const auto e = p.find("endpoints"); e != p.end() && e->is_array() && e->size() == 2) {
      m.endpoints = std::array<Point2, 2>{Point2{(*e)[0].at(0).get<double>(), (*e)[0].at(1).get<double>()},
                                          Point2{(*e)[1].at(0).get<double>(), (*e)[1].at(1).get<double>()}};
    }
    return m;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

ToolRegistry build_tool_registry(const ToolSuiteOptions& options) {
  validate_noise(options.noise);
  const auto noise = std::make_shared<const NoiseProfile>(options.noise);
  std::shared_ptr<const VisionAdapter> adapter;
  if (options.adapter) adapter = std::make_shared<const VisionAdapter>(*options.adapter);

  ToolRegistry reg;
  const ParamSpec frame{"frame", ArgType::Integer, true, "Zero-based frame index.", {}, 0.0, std::nullopt};

  reg.add({"detect_phases",
           "Find the end-diastolic (ED) and end-systolic (ES) frame indices of the video.",
           {},
           {{"ed_frames", "list of frame indices"}, {"es_frames", "list of frame indices"}, {"frame_count", "integer"}},
           ToolScope::Study},
          [noise, adapter](const json&, const ToolContext& ctx) -> json {
            const auto& s = need_study(ctx);
            const auto r = adapter ? adapter->detect_phases(s) : detect_phases(s, *noise);
            return {{"ed_frames", r.ed_frames}, {"es_frames", r.es_frames}, {"frame_count", s.frame_count}};
          });

  if (options.flags.feasibility) {
    reg.add({"predict_feasibility",
             "Predict which of the 16 linear measurements can be reliably taken on a frame.",
             {frame},
             {{"frame", "integer"},
              {"feasible", "names of measurable kinds"},
              {"vector", "16 flags in kind order"},
              {"confidence", "per-kind probability"}},
             ToolScope::Study},
            [noise, adapter](const json& args, const ToolContext& ctx) -> json {
              const auto& s = need_study(ctx);
              const int f = args.at("frame").get<int>();
              return feasibility_to_json(adapter ? adapter->predict_feasibility(s, f) : predict_feasibility(s, f, *noise));
            });
  }

  reg.add({"measure",
           "Take one linear measurement on a frame. Returns the caliper endpoints and the value in cm.",
           {{"kind", ArgType::Enum, true, "Measurement name.", kind_names(), std::nullopt, std::nullopt}, frame},
           {{"kind", "string"}, {"frame", "integer"}, {"value_cm", "number"}, {"endpoints", "two [x, y] points"}},
           ToolScope::Study},
          [noise, adapter](const json& args, const ToolContext& ctx) -> json {
            const auto& s = need_study(ctx);
            const Kind k = *parse_kind(args.at("kind").get<std::string>());
            const int f = args.at("frame").get<int>();
            return measurement_to_json(adapter ? adapter->measure(s, f, k) : measure(s, f, k, *noise));
          });

  if (options.flags.retrieval) {
    reg.add({"search_guideline",
             "Search the echocardiography guideline corpus and return the top passages.",
             {{"query", ArgType::String, true, "Search text.", {}, std::nullopt, std::nullopt},
              {"k", ArgType::Integer, false, "Number of passages (default 5).", {}, 1.0, 20.0}},
             {{"hits", "ranked passages with passage_id, title, score and text"}},
             ToolScope::Guidelines},
            [](const json& args, const ToolContext& ctx) -> json {
              if (ctx.guidelines == nullptr) throw Error(Errc::ExecutionFailure, "no guideline index loaded");
              const auto query = args.at("query").get<std::string>();
              const auto k = static_cast<std::size_t>(args.value("k", 5));
              json hits = json::array();
              for (const auto& h : ctx.guidelines->search(query, k)) {
                hits.push_back({{"rank", h.rank},
                                {"passage_id", h.passage.passage_id},
                                {"doc_id", h.passage.doc_id},
                                {"title", h.title},
                                {"score", h.score},
                                {"begin", h.passage.begin},
                                {"end", h.passage.end},
                                {"text", h.passage.text}});
              }
              return {{"query", query}, {"hits", hits}};
            });
  }
  return reg;
}

}  // namespace echoreason

#include "echoreason/vision_tools.hpp"

#include <algorithm>
#include <cmath>

#include "echoreason/echo_sim.hpp"
#include "echoreason/error.hpp"
#include "echoreason/rng.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

namespace {

enum : std::uint64_t { kPhaseTool = 1, kFeasibilityTool = 2, kMeasureTool = 3 };

Rng substream(const NoiseProfile& noise, const EchoStudy& study, std::uint64_t tool, std::uint64_t frame,
              std::uint64_t kind) {
  return Rng(derive_seed(noise.seed, {fnv1a(study.study_id), tool, frame, kind}));
}

void require_frame(const EchoStudy& study, int frame) {
  if (!study.in_range(frame)) {
    throw Error(Errc::BadFrame, "frame " + std::to_string(frame) + " outside [0, " +
                                    std::to_string(study.frame_count) + ")");
  }
}

void require_cycle(const EchoStudy& study) {
  if (study.frame_count < 2 || study.cycle.period_frames <= 0 || study.frame_count < study.cycle.period_frames) {
    throw Error(Errc::NoCycle, "study " + study.study_id + " does not cover a full cardiac cycle");
  }
}

std::vector<int> shifted(const EchoStudy& study, Phase phase, const NoiseProfile& noise) {
  std::vector<int> out;
  for (int f : study.key_frames(phase)) {
    out.push_back(std::clamp(f + phase_shift(study, phase, f, noise), 0, study.frame_count - 1));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

bool NoiseProfile::is_zero() const noexcept {
  auto all_zero = [](const auto& a) { return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; }); };
  return sigma_ed == 0.0 && sigma_es == 0.0 && all_zero(false_negative_rate) && all_zero(false_positive_rate) &&
         all_zero(sigma_cm);
}

void validate_noise(const NoiseProfile& n) {
  if (n.sigma_ed < 0.0 || n.sigma_es < 0.0) throw Error(Errc::InvalidArgument, "phase sigma must be >= 0");
  for (std::size_t j = 0; j < kKindCount; ++j) {
    const double fnr = n.false_negative_rate[j];
    const double fpr = n.false_positive_rate[j];
    if (!(fnr >= 0.0 && fnr <= 1.0 && fpr >= 0.0 && fpr <= 1.0)) {
      throw Error(Errc::InvalidArgument, "flip rates must lie in [0, 1]");
    }
    if (n.sigma_cm[j] < 0.0) throw Error(Errc::InvalidArgument, "measurement sigma must be >= 0");
  }
}

json noise_to_json(const NoiseProfile& n) {
  auto per_kind = [](const std::array<double, kKindCount>& a) {
    json j = json::object();
    for (const auto& k : measurement_kinds()) {
      if (a[kind_index(k.kind)] != 0.0) j[std::string(k.name)] = a[kind_index(k.kind)];
    }
    return j;
  };
  return {{"seed", n.seed},
          {"sigma_ed", n.sigma_ed},
          {"sigma_es", n.sigma_es},
          {"false_negative_rate", per_kind(n.false_negative_rate)},
          {"false_positive_rate", per_kind(n.false_positive_rate)},
          {"sigma_cm", per_kind(n.sigma_cm)}};
}

NoiseProfile noise_from_json(const json& doc) {
  NoiseProfile n;
  auto per_kind = [&doc](const char* key, std::array<double, kKindCount>& out) {
    const auto it = doc.find(key);
    if (it == doc.end()) return;
    if (!it->is_object()) throw Error(Errc::ConfigError, std::string(key) + " must map kind names to numbers");
    for (const auto& [name, v] : it->items()) {
      const auto k = parse_kind(name);
      if (!k || !v.is_number()) throw Error(Errc::ConfigError, std::string(key) + ": bad entry '" + name + "'");
      out[kind_index(*k)] = v.get<double>();
    }
  };
  try {
    n.seed = doc.value("seed", std::uint64_t{0});
    n.sigma_ed = doc.value("sigma_ed", 0.0);
    n.sigma_es = doc.value("sigma_es", 0.0);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("noise profile: ") + e.what());
  }
  per_kind("false_negative_rate", n.false_negative_rate);
  per_kind("false_positive_rate", n.false_positive_rate);
  per_kind("sigma_cm", n.sigma_cm);
  validate_noise(n);
  return n;
}

int phase_shift(const EchoStudy& study, Phase phase, int frame, const NoiseProfile& noise) {
  const double sigma = phase == Phase::ED ? noise.sigma_ed : noise.sigma_es;
  if (sigma == 0.0) return 0;
  Rng rng = substream(noise, study, kPhaseTool, static_cast<std::uint64_t>(frame), static_cast<std::uint64_t>(phase));
  return static_cast<int>(std::lround(sigma * rng.normal()));
}

PhaseResult detect_phases(const EchoStudy& study, const NoiseProfile& noise) {
  require_cycle(study);
  return {shifted(study, Phase::ED, noise), shifted(study, Phase::ES, noise)};
}

FeasibilityResult predict_feasibility(const EchoStudy& study, int frame, const NoiseProfile& noise) {
  require_frame(study, frame);
  const auto truth = study.feasibility(frame);
  FeasibilityResult r;
  r.frame = frame;
  Rng rng = substream(noise, study, kFeasibilityTool, static_cast<std::uint64_t>(frame), 0);
  for (std::size_t j = 0; j < kKindCount; ++j) {
    const double fnr = noise.false_negative_rate[j];
    const double fpr = noise.false_positive_rate[j];
    // One draw per kind regardless of rates keeps kinds independent.
    const double u = rng.uniform();
    const bool flip = truth.test(j) ? u < fnr : u < fpr;
    const bool bit = truth.test(j) != flip;
    r.predicted.set(j, bit);
    // Posterior of a feasible label given the prediction, under an even prior.
    const double on = bit ? 1.0 - fnr : fnr;
    const double off = bit ? fpr : 1.0 - fpr;
    r.confidence[j] = on + off > 0.0 ? on / (on + off) : 0.5;
  }
  return r;
}

Measurement measure(const EchoStudy& study, int frame, Kind kind, const NoiseProfile& noise) {
  require_frame(study, frame);
  if (!study.feasibility(frame).test(kind_index(kind))) {
    throw Error(Errc::NotMeasurable,
                std::string(kind_name(kind)) + " is not measurable on frame " + std::to_string(frame));
  }
  double value = study.true_value(kind, frame);
  const double sigma = noise.sigma_cm[kind_index(kind)];
  if (sigma > 0.0) {
    Rng rng = substream(noise, study, kMeasureTool, static_cast<std::uint64_t>(frame), kind_index(kind));
    value = std::max(0.0, value + sigma * rng.normal());
  }
  Measurement m;
  m.kind = kind;
  m.frame = frame;
  m.value_cm = value;
  m.endpoints = caliper_endpoints(study, kind, value);
  m.source = MeasurementSource::Oracle;
  return m;
}

std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> src, int height, int width, int out_height,
                                          int out_width) {
  if (height <= 0 || width <= 0 || out_height <= 0 || out_width <= 0 ||
      src.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(Errc::InvalidArgument, "bad image dimensions for resize");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) * static_cast<std::size_t>(out_width));
  const double sy = static_cast<double>(height) / out_height;
  const double sx = static_cast<double>(width) / out_width;
  auto at = [&](int y, int x) {
    return static_cast<double>(src[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                                   static_cast<std::size_t>(x)]);
  };
  for (int y = 0; y < out_height; ++y) {
    // Pixel-centre alignment.
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) + wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(out_width) + static_cast<std::size_t>(x)] =
          static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

VisionAdapter::VisionAdapter(AdapterConfig config)
    : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {}

namespace {

void require_pixels(const EchoStudy& study) {
  if (!study.has_pixels()) {
    throw Error(Errc::ExecutionFailure, "study " + study.study_id + " has no pixel payload for the external adapter");
  }
}

json parse_response(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::AdapterProtocolError, "response is not a JSON object");
  return doc;
}

std::vector<int> frame_list(const json& doc, const char* key, int frame_count) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) throw Error(Errc::AdapterProtocolError, std::string("missing ") + key);
  std::vector<int> out;
  for (const auto& v : *it) {
    if (!v.is_number_integer()) throw Error(Errc::AdapterProtocolError, std::string(key) + " must hold integers");
    const auto f = v.get<std::int64_t>();
    if (f < 0 || f >= frame_count) throw Error(Errc::AdapterProtocolError, std::string(key) + " index out of range");
    out.push_back(static_cast<int>(f));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string as_body(const std::vector<std::uint8_t>& bytes) { return std::string(bytes.begin(), bytes.end()); }

}  // namespace

std::string VisionAdapter::post(const std::string& tool, const std::string& body, const HttpHeaders& headers) const {
  const auto res = http_post(endpoint_, "/v1/" + tool, body, "application/octet-stream", headers,
                             std::chrono::milliseconds(config_.timeout_ms));
  if (!res.received()) throw Error(Errc::ExecutionFailure, "adapter unreachable: " + res.transport_error);
  if (res.status != 200) throw Error(Errc::ExecutionFailure, "adapter returned HTTP " + std::to_string(res.status));
  return res.body;
}

PhaseResult VisionAdapter::detect_phases(const EchoStudy& study) const {
  require_pixels(study);
  std::string body;
  body.reserve(static_cast<std::size_t>(study.frame_count) * kPhaseInputSize * kPhaseInputSize);
  for (int t = 0; t < study.frame_count; ++t) {
    body += as_body(resize_bilinear(study.frame_pixels(t), study.height, study.width, kPhaseInputSize, kPhaseInputSize));
  }
  const HttpHeaders headers{{"X-Echo-Width", std::to_string(kPhaseInputSize)},
                            {"X-Echo-Height", std::to_string(kPhaseInputSize)},
                            {"X-Echo-Frames", std::to_string(study.frame_count)},
                            {"X-Echo-Study", study.study_id}};
  const json doc = parse_response(post("phases", body, headers));
  return {frame_list(doc, "ed_frames", study.frame_count), frame_list(doc, "es_frames", study.frame_count)};
}

FeasibilityResult VisionAdapter::predict_feasibility(const EchoStudy& study, int frame) const {
  require_frame(study, frame);
  require_pixels(study);
  const auto image = resize_bilinear(study.frame_pixels(frame), study.height, study.width, kPhaseInputSize, kPhaseInputSize);
  const HttpHeaders headers{{"X-Echo-Width", std::to_string(kPhaseInputSize)},
                            {"X-Echo-Height", std::to_string(kPhaseInputSize)},
                            {"X-Echo-Frames", "1"},
                            {"X-Echo-Study", study.study_id},
                            {"X-Echo-Frame-Index", std::to_string(frame)}};
  const json doc = parse_response(post("feasibility", as_body(image), headers));
  const auto it = doc.find("feasible");
  if (it == doc.end() || !it->is_array() || it->size() != kKindCount) {
    throw Error(Errc::AdapterProtocolError, "feasible must be an array of " + std::to_string(kKindCount) + " flags");
  }
  FeasibilityResult r;
  r.frame = frame;
  for (std::size_t j = 0; j < kKindCount; ++j) {
    const auto& v = (*it)[j];
    if (v.is_boolean()) r.predicted.set(j, v.get<bool>());
    else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) r.predicted.set(j, v.get<int>() == 1);
    else throw Error(Errc::AdapterProtocolError, "feasible entries must be 0/1 or booleans");
    r.confidence[j] = r.predicted.test(j) ? 1.0 : 0.0;
  }
  if (const auto c = doc.find("confidence"); c != doc.end()) {
    if (!c->is_array() || c->size() != kKindCount) throw Error(Errc::AdapterProtocolError, "confidence length");
    for (std::size_t j = 0; j < kKindCount; ++j) {
      if (!(*c)[j].is_number()) throw Error(Errc::AdapterProtocolError, "confidence must be numeric");
      const double v = (*c)[j].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::AdapterProtocolError, "confidence outside [0, 1]");
      r.confidence[j] = v;
    }
  }
  return r;
}

Measurement VisionAdapter::measure(const EchoStudy& study, int frame, Kind kind) const {
  require_frame(study, frame);
  require_pixels(study);
  const auto image =
      resize_bilinear(study.frame_pixels(frame), study.height, study.width, kMeasureInputHeight, kMeasureInputWidth);
  const HttpHeaders headers{{"X-Echo-Width", std::to_string(kMeasureInputWidth)},
                            {"X-Echo-Height", std::to_string(kMeasureInputHeight)},
                            {"X-Echo-Frames", "1"},
                            {"X-Echo-Study", study.study_id},
                            {"X-Echo-Frame-Index", std::to_string(frame)},
                            {"X-Echo-Kind", std::string(kind_name(kind))}};
  const json doc = parse_response(post("measure", as_body(image), headers));
  const auto it = doc.find("endpoints");
  if (it == doc.end() || !it->is_array() || it->size() != 2) {
    throw Error(Errc::AdapterProtocolError, "endpoints must be two [x, y] points");
  }
  std::array<Point2, 2> pts;
  const double sx = static_cast<double>(study.width) / kMeasureInputWidth;
  const double sy = static_cast<double>(study.height) / kMeasureInputHeight;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& p = (*it)[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(Errc::AdapterProtocolError, "endpoints must be two [x, y] points");
    }
    pts[i] = {p[0].get<double>() * sx, p[1].get<double>() * sy};
  }
  Measurement m;
  m.kind = kind;
  m.frame = frame;
  m.endpoints = pts;
  m.value_cm = pixels_to_cm(pts[0], pts[1], study.pixel_scale);
  m.source = MeasurementSource::External;
  return m;
}

}  // namespace echoreason

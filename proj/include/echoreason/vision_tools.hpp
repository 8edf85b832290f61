#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "echoreason/domain.hpp"
#include "echoreason/http.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

struct NoiseProfile {
  // Discretized Gaussian shift scale, in frames.
  double sigma_ed = 0.0;
  double sigma_es = 0.0;
  // Per-kind bit flip rates of the feasibility oracle.
  std::array<double, kKindCount> false_negative_rate{};
  std::array<double, kKindCount> false_positive_rate{};
  // Per-kind additive Gaussian deviation of measured values, in cm.
  std::array<double, kKindCount> sigma_cm{};
  std::uint64_t seed = 0;

  static NoiseProfile zero(std::uint64_t seed = 0) {
    NoiseProfile p;
    p.seed = seed;
    return p;
  }
  bool is_zero() const noexcept;
};

// Throws InvalidArgument for negative sigmas or rates outside [0, 1].
void validate_noise(const NoiseProfile& noise);

// Per-kind arrays are keyed by kind name; zero entries are omitted.
json noise_to_json(const NoiseProfile& noise);
NoiseProfile noise_from_json(const json& doc);

struct PhaseResult {
  std::vector<int> ed_frames;
  std::vector<int> es_frames;
};

struct FeasibilityResult {
  int frame = 0;
  FeasibilityVector predicted;
  std::array<double, kKindCount> confidence{};
};

// Ground-truth oracles with seeded error injection. Each call draws from a
// substream keyed by (noise seed, study, tool, frame, kind), so results do
// not depend on call order and one tool's noise never perturbs another's.
PhaseResult detect_phases(const EchoStudy& study, const NoiseProfile& noise);
FeasibilityResult predict_feasibility(const EchoStudy& study, int frame, const NoiseProfile& noise);
Measurement measure(const EchoStudy& study, int frame, Kind kind, const NoiseProfile& noise);

// Raw discretized shift drawn for one key frame; exposed for calibration runs.
int phase_shift(const EchoStudy& study, Phase phase, int frame, const NoiseProfile& noise);

// Bilinear resampling of a row-major grayscale image.
std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> src, int height, int width, int out_height,
                                          int out_width);

inline constexpr int kPhaseInputSize = 224;
inline constexpr int kMeasureInputHeight = 480;
inline constexpr int kMeasureInputWidth = 640;

struct AdapterConfig {
  std::string endpoint;  // http://host:port[/prefix]
  int timeout_ms = 30000;
};

// Client for an external vision service. Requests are POST
// {endpoint}/v1/{phases|feasibility|measure} with a raw u8 body and
// X-Echo-Width/Height/Frames/Study/Frame-Index/Kind headers.
// Transport failures throw ExecutionFailure, bad responses AdapterProtocolError.
class VisionAdapter {
 public:
  explicit VisionAdapter(AdapterConfig config);

  PhaseResult detect_phases(const EchoStudy& study) const;
  FeasibilityResult predict_feasibility(const EchoStudy& study, int frame) const;
  Measurement measure(const EchoStudy& study, int frame, Kind kind) const;

  const AdapterConfig& config() const noexcept { return config_; }

 private:
  std::string post(const std::string& tool, const std::string& body, const HttpHeaders& headers) const;

  AdapterConfig config_;
  HttpEndpoint endpoint_;
};

}  // namespace echoreason

#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace echoreason {

inline constexpr std::size_t kKindCount = 16;
inline constexpr std::size_t kEvaluatedKindCount = 7;
inline constexpr std::size_t kViewCount = 13;

// Linear measurement kinds. The first seven are the benchmark-evaluated ones;
// their ids are stable and index feasibility vectors.
enum class Kind : std::uint8_t {
  IVS,
  LVID,
  LVPW,
  LA,
  Aorta,
  AorticRoot,
  RVBase,
  LVOT,
  RVOT,
  TAPSE,
  IVC,
  PA,
  LALength,
  RADimension,
  AscendingAorta,
  SinotubularJunction,
};

// Cavity dimensions shrink from ED to ES, wall thicknesses grow.
enum class KindCategory : std::uint8_t { Cavity, Wall, Vessel, Other };

struct MeasurementKind {
  Kind kind;
  std::string_view name;
  std::string_view description;
  bool evaluated;
  KindCategory category;

  int id() const noexcept { return static_cast<int>(kind); }
};

std::span<const MeasurementKind, kKindCount> measurement_kinds() noexcept;
const MeasurementKind& kind_info(Kind kind) noexcept;
inline std::string_view kind_name(Kind kind) noexcept { return kind_info(kind).name; }
inline std::size_t kind_index(Kind kind) noexcept { return static_cast<std::size_t>(kind); }
Kind kind_from_index(std::size_t index);
// Case-insensitive lookup by canonical name.
std::optional<Kind> parse_kind(std::string_view name);
std::span<const Kind, kEvaluatedKindCount> evaluated_kinds() noexcept;

enum class View : std::uint8_t {
  PLAX,
  PSAXAV,
  PSAXMV,
  PSAXPM,
  A4C,
  A2C,
  A3C,
  A5C,
  Subcostal4C,
  SubcostalIVC,
  Suprasternal,
  RVInflow,
  PLAXZoom,
};

std::span<const View, kViewCount> all_views() noexcept;
std::string_view view_name(View view) noexcept;
std::optional<View> parse_view(std::string_view name);
// Kinds conventionally measured in this view. Never empty.
std::span<const Kind> view_kinds(View view) noexcept;
bool view_supports(View view, Kind kind) noexcept;

enum class Phase : std::uint8_t { ED, ES };

std::string_view phase_name(Phase phase) noexcept;
std::string_view phase_long_name(Phase phase) noexcept;
// Accepts "ED"/"ES" and "end-diastole"/"end-systole", any casing.
std::optional<Phase> parse_phase(std::string_view text);

using FeasibilityVector = std::bitset<kKindCount>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// Euclidean distance between two pixel points, in cm.
double pixels_to_cm(Point2 a, Point2 b, double cm_per_pixel);

struct PhaseValues {
  double ed_cm = 0.0;
  double es_cm = 0.0;

  double at(Phase phase) const noexcept { return phase == Phase::ED ? ed_cm : es_cm; }
  bool operator==(const PhaseValues&) const = default;
};

// Periodic ground-truth geometry. Every kind follows
//   v(t) = es + (ed - es) * (1 + cos(2*pi*(t - offset) / period)) / 2
// so ED frames sit at t = offset (mod period) and ES half a period later.
struct CycleParams {
  int period_frames = 0;
  int phase_offset_frames = 0;
  std::map<Kind, PhaseValues> values;

  double value_at(Kind kind, double frame) const;
  bool operator==(const CycleParams&) const = default;
};

// Frames [begin_frame, end_frame) on which the listed kinds are not
// reliably measurable.
struct DegradedWindow {
  int begin_frame = 0;
  int end_frame = 0;
  std::vector<Kind> kinds;

  bool covers(int frame, Kind kind) const noexcept;
  bool operator==(const DegradedWindow&) const = default;
};

struct StudyQuality {
  // Kinds anatomically visible somewhere in the clip.
  FeasibilityVector visible;
  std::vector<DegradedWindow> degraded;
  bool operator==(const StudyQuality&) const = default;
};

struct EchoStudy {
  std::string study_id;
  View view = View::PLAX;
  int frame_count = 0;
  double frame_rate = 0.0;
  double pixel_scale = 0.0;  // cm per pixel
  int height = 0;
  int width = 0;
  CycleParams cycle;
  StudyQuality quality;
  // Optional grayscale payload, frame_count * height * width bytes, row-major.
  std::shared_ptr<const std::vector<std::uint8_t>> pixels;

  bool has_pixels() const noexcept { return pixels != nullptr && !pixels->empty(); }
  std::span<const std::uint8_t> frame_pixels(int frame) const;

  // Ground-truth channel, read by the oracle tools.
  std::vector<int> key_frames(Phase phase) const;
  bool kind_present(Kind kind) const noexcept;
  FeasibilityVector feasibility(int frame) const;
  double true_value(Kind kind, double frame) const;
  bool in_range(int frame) const noexcept { return frame >= 0 && frame < frame_count; }
};

enum class MeasurementSource : std::uint8_t { Oracle, External };

struct Measurement {
  Kind kind = Kind::IVS;
  int frame = 0;
  std::optional<std::array<Point2, 2>> endpoints;
  double value_cm = 0.0;
  MeasurementSource source = MeasurementSource::Oracle;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// Lists every violated invariant; never throws.
ValidationReport validate_study(const EchoStudy& study);

}  // namespace echoreason

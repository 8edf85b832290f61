#include "echoreason/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoreason/error.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

namespace {

constexpr std::array<MeasurementKind, kKindCount> kKinds{{
    {Kind::IVS, "IVS", "interventricular septal thickness", true, KindCategory::Wall},
    {Kind::LVID, "LVID", "left ventricular internal dimension", true, KindCategory::Cavity},
    {Kind::LVPW, "LVPW", "left ventricular posterior wall thickness", true, KindCategory::Wall},
    {Kind::LA, "LA", "left atrial anteroposterior dimension", true, KindCategory::Cavity},
    {Kind::Aorta, "Aorta", "aortic diameter", true, KindCategory::Vessel},
    {Kind::AorticRoot, "Aortic root", "aortic root diameter at the sinuses", true, KindCategory::Vessel},
    {Kind::RVBase, "RV base", "right ventricular basal dimension", true, KindCategory::Cavity},
    {Kind::LVOT, "LVOT diameter", "left ventricular outflow tract diameter", false, KindCategory::Other},
    {Kind::RVOT, "RVOT", "right ventricular outflow tract dimension", false, KindCategory::Other},
    {Kind::TAPSE, "TAPSE", "tricuspid annular plane systolic excursion", false, KindCategory::Other},
    {Kind::IVC, "IVC", "inferior vena cava diameter", false, KindCategory::Other},
    {Kind::PA, "PA", "main pulmonary artery diameter", false, KindCategory::Other},
    {Kind::LALength, "LA length", "left atrial length", false, KindCategory::Other},
    {Kind::RADimension, "RA dimension", "right atrial minor-axis dimension", false, KindCategory::Other},
    {Kind::AscendingAorta, "Asc. aorta", "ascending aorta diameter", false, KindCategory::Other},
    {Kind::SinotubularJunction, "Sinotubular junction", "sinotubular junction diameter", false,
     KindCategory::Other},
}};

constexpr std::array<Kind, kEvaluatedKindCount> kEvaluated{
    Kind::IVS, Kind::LVID, Kind::LVPW, Kind::LA, Kind::Aorta, Kind::AorticRoot, Kind::RVBase};

constexpr std::array<View, kViewCount> kViews{
    View::PLAX, View::PSAXAV,       View::PSAXMV,       View::PSAXPM, View::A4C,
    View::A2C,  View::A3C,          View::A5C,          View::Subcostal4C,
    View::SubcostalIVC,             View::Suprasternal, View::RVInflow, View::PLAXZoom};

constexpr std::array<std::string_view, kViewCount> kViewNames{
    "PLAX", "PSAX-AV", "PSAX-MV", "PSAX-PM", "A4C", "A2C", "A3C",
    "A5C",  "Subcostal-4C", "Subcostal-IVC", "Suprasternal", "RV-inflow", "PLAX-zoom"};

constexpr std::array<Kind, 9> kPlax{Kind::IVS,   Kind::LVID,       Kind::LVPW,
                                    Kind::LA,    Kind::Aorta,      Kind::AorticRoot,
                                    Kind::LVOT,  Kind::RVOT,       Kind::SinotubularJunction};
constexpr std::array<Kind, 4> kPsaxAv{Kind::Aorta, Kind::LA, Kind::RVOT, Kind::PA};
constexpr std::array<Kind, 3> kPsaxLv{Kind::IVS, Kind::LVID, Kind::LVPW};
constexpr std::array<Kind, 4> kA4c{Kind::RVBase, Kind::LALength, Kind::RADimension, Kind::TAPSE};
constexpr std::array<Kind, 1> kA2c{Kind::LALength};
constexpr std::array<Kind, 1> kOutflow{Kind::LVOT};
constexpr std::array<Kind, 2> kSubcostal4c{Kind::RVBase, Kind::RADimension};
constexpr std::array<Kind, 1> kSubcostalIvc{Kind::IVC};
constexpr std::array<Kind, 1> kSuprasternal{Kind::AscendingAorta};
constexpr std::array<Kind, 2> kRvInflow{Kind::RADimension, Kind::TAPSE};
constexpr std::array<Kind, 4> kPlaxZoom{Kind::AorticRoot, Kind::LVOT, Kind::SinotubularJunction,
                                        Kind::AscendingAorta};

int positive_mod(int a, int m) {
  const int r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

std::span<const MeasurementKind, kKindCount> measurement_kinds() noexcept { return kKinds; }

const MeasurementKind& kind_info(Kind kind) noexcept { return kKinds[kind_index(kind)]; }

Kind kind_from_index(std::size_t index) {
  if (index >= kKindCount) throw Error(Errc::InvalidArgument, "kind index " + std::to_string(index));
  return kKinds[index].kind;
}

std::optional<Kind> parse_kind(std::string_view name) {
  const auto wanted = trim(name);
  for (const auto& k : kKinds) {
    if (iequals(k.name, wanted)) return k.kind;
  }
  return std::nullopt;
}

std::span<const Kind, kEvaluatedKindCount> evaluated_kinds() noexcept { return kEvaluated; }

std::span<const View, kViewCount> all_views() noexcept { return kViews; }

std::string_view view_name(View view) noexcept { return kViewNames[static_cast<std::size_t>(view)]; }

std::optional<View> parse_view(std::string_view name) {
  const auto wanted = trim(name);
  for (std::size_t i = 0; i < kViewCount; ++i) {
    if (iequals(kViewNames[i], wanted)) return kViews[i];
  }
  return std::nullopt;
}

std::span<const Kind> view_kinds(View view) noexcept {
  switch (view) {
    case View::PLAX: return kPlax;
    case View::PSAXAV: return kPsaxAv;
    case View::PSAXMV:
    case View::PSAXPM: return kPsaxLv;
    case View::A4C: return kA4c;
    case View::A2C: return kA2c;
    case View::A3C:
    case View::A5C: return kOutflow;
    case View::Subcostal4C: return kSubcostal4c;
    case View::SubcostalIVC: return kSubcostalIvc;
    case View::Suprasternal: return kSuprasternal;
    case View::RVInflow: return kRvInflow;
    case View::PLAXZoom: return kPlaxZoom;
  }
  return {};
}

bool view_supports(View view, Kind kind) noexcept {
  for (Kind k : view_kinds(view)) {
    if (k == kind) return true;
  }
  return false;
}

std::string_view phase_name(Phase phase) noexcept { return phase == Phase::ED ? "ED" : "ES"; }

std::string_view phase_long_name(Phase phase) noexcept {
  return phase == Phase::ED ? "end-diastole" : "end-systole";
}

std::optional<Phase> parse_phase(std::string_view text) {
  const auto t = trim(text);
  if (iequals(t, "ED") || iequals(t, "end-diastole") || iequals(t, "end-diastolic")) return Phase::ED;
  if (iequals(t, "ES") || iequals(t, "end-systole") || iequals(t, "end-systolic")) return Phase::ES;
  return std::nullopt;
}

double pixels_to_cm(Point2 a, Point2 b, double cm_per_pixel) {
  if (!(cm_per_pixel > 0.0)) throw Error(Errc::InvalidScale, "scale must be positive");
  return std::hypot(b.x - a.x, b.y - a.y) * cm_per_pixel;
}

double CycleParams::value_at(Kind kind, double frame) const {
  const auto it = values.find(kind);
  if (it == values.end()) {
    throw Error(Errc::UnsupportedKind, std::string("no cycle values for ") + std::string(kind_name(kind)));
  }
  const auto& v = it->second;
  const double angle =
      2.0 * std::numbers::pi * (frame - phase_offset_frames) / static_cast<double>(period_frames);
  return v.es_cm + (v.ed_cm - v.es_cm) * (1.0 + std::cos(angle)) / 2.0;
}

bool DegradedWindow::covers(int frame, Kind kind) const noexcept {
  if (frame < begin_frame || frame >= end_frame) return false;
  for (Kind k : kinds) {
    if (k == kind) return true;
  }
  return false;
}

std::span<const std::uint8_t> EchoStudy::frame_pixels(int frame) const {
  if (!has_pixels()) throw Error(Errc::NotFound, "study " + study_id + " has no pixel payload");
  if (!in_range(frame)) throw Error(Errc::BadFrame, "frame " + std::to_string(frame));
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  return std::span<const std::uint8_t>(*pixels).subspan(static_cast<std::size_t>(frame) * plane, plane);
}

std::vector<int> EchoStudy::key_frames(Phase phase) const {
  std::vector<int> frames;
  if (cycle.period_frames <= 0) return frames;
  const int shift = phase == Phase::ED ? 0 : cycle.period_frames / 2;
  for (int t = 0; t < frame_count; ++t) {
    if (positive_mod(t - cycle.phase_offset_frames - shift, cycle.period_frames) == 0) frames.push_back(t);
  }
  return frames;
}

bool EchoStudy::kind_present(Kind kind) const noexcept {
  return view_supports(view, kind) && quality.visible.test(kind_index(kind));
}

FeasibilityVector EchoStudy::feasibility(int frame) const {
  FeasibilityVector y;
  for (const auto& k : kKinds) {
    if (!kind_present(k.kind)) continue;
    bool degraded = false;
    for (const auto& w : quality.degraded) degraded = degraded || w.covers(frame, k.kind);
    y.set(kind_index(k.kind), !degraded);
  }
  return y;
}

double EchoStudy::true_value(Kind kind, double frame) const { return cycle.value_at(kind, frame); }

ValidationReport validate_study(const EchoStudy& study) {
  ValidationReport report;
  auto violate = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (study.study_id.empty()) violate("study_id empty");
  if (study.frame_count < 2) violate("frame_count < 2");
  if (!(study.pixel_scale > 0.0)) violate("pixel_scale <= 0");
  if (!(study.frame_rate > 0.0)) violate("frame_rate <= 0");
  if (study.height <= 0 || study.width <= 0) violate("frame dimensions not positive");
  if (study.cycle.period_frames < 4) violate("cycle period < 4 frames");
  if (study.cycle.period_frames > 0 &&
      (study.cycle.phase_offset_frames < 0 || study.cycle.phase_offset_frames >= study.cycle.period_frames)) {
    violate("phase offset outside [0, period)");
  }
  for (const auto& [kind, v] : study.cycle.values) {
    const auto& info = kind_info(kind);
    const std::string name(info.name);
    if (!info.evaluated) violate("cycle values for non-evaluated kind " + name);
    if (!(v.ed_cm > 0.0) || !(v.es_cm > 0.0)) violate("non-positive value for " + name);
    if (info.category == KindCategory::Cavity && v.es_cm > v.ed_cm) {
      violate("cavity dimension ordering (" + name + ": es > ed)");
    }
    if (info.category == KindCategory::Wall && v.ed_cm > v.es_cm) {
      violate("wall thickness ordering (" + name + ": ed > es)");
    }
  }
  for (const auto& w : study.quality.degraded) {
    if (w.begin_frame < 0 || w.end_frame > study.frame_count || w.begin_frame >= w.end_frame) {
      violate("degraded window outside frame range");
    }
  }
  if (study.pixels) {
    const auto expected = static_cast<std::size_t>(std::max(study.frame_count, 0)) *
                          static_cast<std::size_t>(std::max(study.height, 0)) *
                          static_cast<std::size_t>(std::max(study.width, 0));
    if (study.pixels->size() != expected) violate("pixel payload size mismatch");
  }
  return report;
}

}  // namespace echoreason

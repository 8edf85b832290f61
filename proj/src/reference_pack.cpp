#include "echoreason/reference_pack.hpp"

#include <array>

#include "echoreason/text.hpp"

namespace echoreason {

namespace {

constexpr std::array<ReferenceRange, 9> kRanges{{
    {"IVS", "end-diastole", 0.6, 1.0, "cm"},
    {"LVID", "end-diastole", 3.8, 5.8, "cm"},
    {"LVPW", "end-diastole", 0.6, 1.0, "cm"},
    {"LA", "end-diastole", 2.7, 4.0, "cm"},
    {"Aorta", "end-diastole", 2.0, 3.7, "cm"},
    {"Aortic root", "end-diastole", 2.6, 3.7, "cm"},
    {"RV base", "end-diastole", 2.5, 4.1, "cm"},
    {"RWT", "", 0.22, 0.42, ""},
    {"LA/Ao", "", 0.8, 1.5, ""},
}};

constexpr std::string_view kDisclaimer =
    "Reference values in this pack are placeholders for software testing, not clinical guidance.";

std::string range_sentence(const ReferenceRange& r) {
  std::string s = reference_marker(r.quantity) + " " + format_value(r.lower) + "\xE2\x80\x93" + format_value(r.upper);
  if (!r.unit.empty()) s += " " + std::string(r.unit);
  return s + ".";
}

GuidelineDoc range_doc(std::string id, std::string title, std::string_view intro, std::string_view quantity,
                       std::string_view outro) {
  const auto range = find_reference_range(quantity);
  std::string body = "# " + title + "\n\n" + std::string(intro) + " " + range_sentence(*range) + " " +
                     std::string(outro) + " " + std::string(kDisclaimer) + "\n";
  return {std::move(id), std::move(title), "reference-pack/" + std::string(quantity), std::move(body)};
}

}  // namespace

std::span<const ReferenceRange> reference_ranges() noexcept { return kRanges; }

std::optional<ReferenceRange> find_reference_range(std::string_view quantity) {
  for (const auto& r : kRanges) {
    if (iequals(r.quantity, quantity)) return r;
  }
  return std::nullopt;
}

std::string classify_value(double value, double lower, double upper) {
  if (value < lower) return "reduced";
  if (value > upper) return "increased";
  return "normal";
}

std::string reference_marker(std::string_view quantity) {
  const auto r = find_reference_range(quantity);
  std::string marker = "Normal range (" + std::string(quantity);
  if (r && !r->phase.empty()) marker += ", " + std::string(r->phase);
  return marker + "):";
}

std::vector<GuidelineDoc> reference_pack_documents() {
  constexpr std::string_view kAbove =
      "Values above the upper limit are classified as increased and values below the lower limit as reduced.";
  std::vector<GuidelineDoc> docs;
  docs.push_back(range_doc("ivs-thickness", "Septal wall thickness",
                           "Interventricular septal thickness (IVS) is measured in the parasternal long-axis view "
                           "at end-diastole, perpendicular to the septum.",
                           "IVS", kAbove));
  docs.push_back(range_doc("lvpw-thickness", "Posterior wall thickness",
                           "Left ventricular posterior wall thickness (LVPW) is measured at end-diastole in the "
                           "parasternal long-axis view, excluding chordae and pericardium.",
                           "LVPW", kAbove));
  docs.push_back(range_doc("lvid-dimension", "Left ventricular internal dimension",
                           "The left ventricular internal dimension (LVID) is measured at the level of the mitral "
                           "leaflet tips; the end-diastolic LVID describes chamber size.",
                           "LVID", kAbove));
  docs.push_back(range_doc("la-dimension", "Left atrial dimension",
                           "The left atrial anteroposterior dimension (LA) is measured in the parasternal long-axis "
                           "view from the posterior aortic wall to the posterior atrial wall. The LA is reported at "
                           "end-diastole in this pack.",
                           "LA", kAbove));
  docs.push_back(range_doc("aorta-diameter", "Aortic diameter",
                           "The aortic diameter (Aorta) is measured leading edge to leading edge in the parasternal "
                           "long-axis view.",
                           "Aorta", kAbove));
  docs.push_back(range_doc("aortic-root", "Aortic root",
                           "The aortic root diameter (Aortic root) is measured at the sinuses of Valsalva at "
                           "end-diastole.",
                           "Aortic root", kAbove));
  docs.push_back(range_doc("rv-base", "Right ventricular basal dimension",
                           "The right ventricular basal dimension (RV base) is measured in the apical four-chamber "
                           "view at the basal third of the right ventricle.",
                           "RV base", kAbove));
  docs.push_back(range_doc("relative-wall-thickness", "Relative wall thickness",
                           "Relative wall thickness (RWT) is derived as 2 x LVPW / LVID, with both linear "
                           "measurements taken at end-diastole.",
                           "RWT",
                           "An RWT above the upper limit is classified as increased and indicates concentric "
                           "geometry."));
  docs.push_back(range_doc("la-ao-ratio", "LA/Ao ratio",
                           "The left atrium to aorta ratio divides the left atrial dimension at end-systole by the "
                           "aortic diameter at end-diastole.",
                           "LA/Ao",
                           "A ratio above the upper limit is classified as increased and suggests left atrial "
                           "enlargement."));
  docs.push_back({"measurement-timing", "Timing of linear measurements", "reference-pack/timing",
                  "# Timing of linear measurements\n\n"
                  "End-diastole (ED) is the frame of maximal ventricular volume, usually the frame after mitral "
                  "valve closure or the frame with the largest LV dimension. End-systole (ES) is the frame of "
                  "minimal ventricular volume. Cavity dimensions such as LVID are reported at both ED and ES; wall "
                  "thicknesses (IVS, LVPW) are reported at ED unless stated otherwise. When several cardiac cycles "
                  "are available, measurements should be taken on a cycle where the structures are clearly "
                  "visible. Frames with dropout, foreshortening or off-axis cuts should not be used for linear "
                  "measurements; choose another cycle instead. If no frame in the clip supports the measurement, "
                  "report it as not measurable rather than estimating it. " +
                      std::string(kDisclaimer) + "\n"});
  return docs;
}

GuidelineIndex build_reference_index(IndexOptions options) {
  return build_index_from_documents(reference_pack_documents(), ChunkOptions{}, std::move(options));
}

}  // namespace echoreason

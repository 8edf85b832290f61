#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echoreason/guideline_store.hpp"

namespace echoreason {

// Reference range of one quantity as stated in the shipped guideline pack.
// The numbers are placeholders that exercise retrieval and interpretation;
// they are not clinical guidance.
struct ReferenceRange {
  std::string_view quantity;  // "IVS", "RWT", "LA/Ao", ...
  std::string_view phase;     // "end-diastole" or empty
  double lower = 0.0;
  double upper = 0.0;
  std::string_view unit;  // "cm" or empty
};

std::span<const ReferenceRange> reference_ranges() noexcept;
std::optional<ReferenceRange> find_reference_range(std::string_view quantity);

// "reduced", "normal" or "increased" relative to [lower, upper].
std::string classify_value(double value, double lower, double upper);
inline const std::vector<std::string>& interpretation_labels() {
  static const std::vector<std::string> labels{"reduced", "normal", "increased"};
  return labels;
}

// Marker text that precedes a range in the pack, e.g. "Normal range (IVS, end-diastole):".
std::string reference_marker(std::string_view quantity);

std::vector<GuidelineDoc> reference_pack_documents();
GuidelineIndex build_reference_index(IndexOptions options = {});

}  // namespace echoreason

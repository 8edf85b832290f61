#pragma once

#include <optional>

#include "echoreason/tool_protocol.hpp"
#include "echoreason/vision_tools.hpp"

namespace echoreason {

struct ToolFlags {
  bool feasibility = true;
  bool retrieval = true;
  bool operator==(const ToolFlags&) const = default;
};

struct ToolSuiteOptions {
  ToolFlags flags;
  NoiseProfile noise;
  // When set, video tools call the external adapter instead of the oracles.
  std::optional<AdapterConfig> adapter;
};

// detect_phases, predict_feasibility, measure and search_guideline; disabled
// tools are left out of the registry entirely.
ToolRegistry build_tool_registry(const ToolSuiteOptions& options);

json measurement_to_json(const Measurement& m);
// Inverse of measurement_to_json for ok measure payloads.
std::optional<Measurement> measurement_from_json(const json& payload);

}  // namespace echoreason

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "echoreason/benchmark_case.hpp"
#include "echoreason/domain.hpp"

namespace echoreason {

struct ValueRange {
  double ed_min = 0.0;
  double ed_max = 0.0;
  // es = ed * ratio; below 1 for cavities and vessels, above 1 for walls.
  double ratio_min = 1.0;
  double ratio_max = 1.0;
};

struct SimConfig {
  std::uint64_t seed = 0;
  int study_count = 100;
  std::array<double, kViewCount> view_weights{0.45,  0.05,  0.05,  0.05,  0.20,  0.025, 0.025,
                                              0.025, 0.025, 0.025, 0.025, 0.025, 0.025};
  std::map<Kind, ValueRange> value_ranges{
      {Kind::IVS, {0.6, 1.4, 1.3, 1.6}},        {Kind::LVID, {3.6, 6.4, 0.55, 0.75}},
      {Kind::LVPW, {0.6, 1.4, 1.3, 1.6}},       {Kind::LA, {2.6, 4.8, 0.75, 0.95}},
      {Kind::Aorta, {2.2, 4.0, 0.92, 1.0}},     {Kind::AorticRoot, {2.4, 4.2, 0.92, 1.0}},
      {Kind::RVBase, {2.4, 4.8, 0.7, 0.9}},
  };
  // Only even periods are drawn so that ES falls on a whole frame.
  int period_min = 32;
  int period_max = 60;
  int cycles_min = 2;
  int cycles_max = 3;
  double frame_rate_min = 30.0;
  double frame_rate_max = 60.0;
  double pixel_scale_min = 0.12;
  double pixel_scale_max = 0.14;
  // Chance that a view-associated kind is not visible anywhere in the clip.
  double invisible_probability = 0.1;
  // Chance that a study carries a degraded window, and that the window
  // covers the first ED frame.
  double degraded_probability = 0.5;
  double degraded_first_ed_probability = 0.5;
  bool pixels = false;
  int pixel_height = 120;
  int pixel_width = 160;
};

// Throws ConfigError on the first violated constraint.
void validate_config(const SimConfig& config);

struct GroundTruth {
  std::vector<int> ed_frames;
  std::vector<int> es_frames;
  std::map<Kind, PhaseValues> values;
  std::vector<FeasibilityVector> feasibility;  // one per frame
};

// Deterministic in (config.seed, study_index).
EchoStudy generate_study(const SimConfig& config, int study_index);
std::vector<EchoStudy> generate_dataset(const SimConfig& config);
GroundTruth ground_truth(const EchoStudy& study);
// Throws NotFeasible when the kind is not present in the study.
double ground_truth_measurement(const EchoStudy& study, Kind kind, Phase phase);

// Vertical caliper centred in the frame whose length is value_cm.
std::array<Point2, 2> caliper_endpoints(const EchoStudy& study, Kind kind, double value_cm);

// Writes manifest.json plus studies/<id>.json (and .u8 payloads).
void write_dataset(const std::filesystem::path& dir, const std::vector<EchoStudy>& studies);

struct DifficultyMix {
  int easy = 25;
  int medium = 21;
  int difficult = 14;

  int total() const noexcept { return easy + medium + difficult; }
};

struct BenchmarkOptions {
  DifficultyMix mix;
  std::uint64_t seed = 0;
  // Template ids to draw from; empty means all templates of each tier.
  std::vector<std::string> templates;
};

struct GeneratedBenchmark {
  std::vector<BenchmarkCase> cases;
  std::vector<std::string> warnings;
};

std::vector<std::string> benchmark_template_ids();
GeneratedBenchmark generate_benchmark(const std::vector<EchoStudy>& studies, const BenchmarkOptions& options);

}  // namespace echoreason

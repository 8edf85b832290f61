#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "echoreason/domain.hpp"
#include "echoreason/vision_tools.hpp"

namespace echoreason {

struct MaeTarget {
  Kind kind;
  double mae_cm;
};

// Per-kind measurement MAE targets in cm.
std::span<const MaeTarget> measurement_mae_targets() noexcept;

inline constexpr double kPhaseMaeEd = 1.95;
inline constexpr double kPhaseMaeEs = 4.25;

// For additive N(0, sigma^2) noise, E|e| = sigma * sqrt(2/pi).
double sigma_for_mae(double mae);

// E|round(sigma * Z)| for standard normal Z.
double expected_abs_rounded_normal(double sigma);
// Inverse of the above by bisection; target must be positive.
double solve_rounded_normal_sigma(double target_mae);

struct FeasibilityTarget {
  double precision = 0.845;
  double recall = 0.865;
};

struct LabelCounts {
  std::array<std::uint64_t, kKindCount> positives{};
  std::array<std::uint64_t, kKindCount> negatives{};
  std::uint64_t frames = 0;
};

// Label prevalence over the ED and ES frames of the studies that carry at
// least one feasible kind.
LabelCounts count_key_frame_labels(std::span<const EchoStudy> studies);

struct FlipRates {
  std::array<double, kKindCount> false_negative{};
  std::array<double, kKindCount> false_positive{};
};

// Per-kind rates such that each supported kind reaches the target precision
// and recall in expectation:
//   FNR = 1 - R,  FPR = n_pos * R * (1/P - 1) / n_neg  (clamped to [0, 1]).
FlipRates solve_flip_rates(const LabelCounts& counts, FeasibilityTarget target = {});

// Noise profile with all three tools set to their calibrated error levels.
NoiseProfile calibrated_noise_profile(std::uint64_t seed, const FlipRates& rates);

}  // namespace echoreason

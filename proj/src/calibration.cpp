#include "echoreason/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoreason/error.hpp"

namespace echoreason {

namespace {

constexpr std::array<MaeTarget, kEvaluatedKindCount> kMaeTargets{{
    {Kind::IVS, 0.13},
    {Kind::LVID, 0.31},
    {Kind::LVPW, 0.22},
    {Kind::LA, 0.29},
    {Kind::Aorta, 0.28},
    {Kind::AorticRoot, 0.27},
    {Kind::RVBase, 0.28},
}};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

std::span<const MaeTarget> measurement_mae_targets() noexcept { return kMaeTargets; }

double sigma_for_mae(double mae) {
  if (mae < 0.0) throw Error(Errc::InvalidArgument, "MAE must be non-negative");
  return mae * std::sqrt(std::numbers::pi / 2.0);
}

double expected_abs_rounded_normal(double sigma) {
  if (sigma < 0.0) throw Error(Errc::InvalidArgument, "sigma must be non-negative");
  if (sigma == 0.0) return 0.0;
  // P(round(sigma Z) = +-k) = 2 (Phi((k + 1/2)/sigma) - Phi((k - 1/2)/sigma)).
  double total = 0.0;
  const int limit = static_cast<int>(std::ceil(40.0 * sigma)) + 10;
  for (int k = 1; k <= limit; ++k) {
    const double p = normal_cdf((k + 0.5) / sigma) - normal_cdf((k - 0.5) / sigma);
    total += 2.0 * k * p;
  }
  return total;
}

double solve_rounded_normal_sigma(double target_mae) {
  if (!(target_mae > 0.0)) throw Error(Errc::InvalidArgument, "target MAE must be positive");
  double lo = 0.0;
  double hi = 1.0;
  while (expected_abs_rounded_normal(hi) < target_mae) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (expected_abs_rounded_normal(mid) < target_mae ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LabelCounts count_key_frame_labels(std::span<const EchoStudy> studies) {
  LabelCounts counts;
  for (const auto& s : studies) {
    for (Phase p : {Phase::ED, Phase::ES}) {
      for (int f : s.key_frames(p)) {
        const auto y = s.feasibility(f);
        if (y.none()) continue;
        ++counts.frames;
        for (std::size_t j = 0; j < kKindCount; ++j) ++(y.test(j) ? counts.positives[j] : counts.negatives[j]);
      }
    }
  }
  return counts;
}

FlipRates solve_flip_rates(const LabelCounts& counts, FeasibilityTarget target) {
  if (!(target.precision > 0.0 && target.precision <= 1.0 && target.recall >= 0.0 && target.recall <= 1.0)) {
    throw Error(Errc::InvalidArgument, "precision must lie in (0, 1] and recall in [0, 1]");
  }
  FlipRates rates;
  for (std::size_t j = 0; j < kKindCount; ++j) {
    if (counts.positives[j] == 0) continue;
    rates.false_negative[j] = 1.0 - target.recall;
    if (counts.negatives[j] > 0) {
      const double fp = static_cast<double>(counts.positives[j]) * target.recall * (1.0 / target.precision - 1.0);
      rates.false_positive[j] = std::clamp(fp / static_cast<double>(counts.negatives[j]), 0.0, 1.0);
    }
  }
  return rates;
}

NoiseProfile calibrated_noise_profile(std::uint64_t seed, const FlipRates& rates) {
  NoiseProfile p;
  p.seed = seed;
  p.sigma_ed = solve_rounded_normal_sigma(kPhaseMaeEd);
  p.sigma_es = solve_rounded_normal_sigma(kPhaseMaeEs);
  p.false_negative_rate = rates.false_negative;
  p.false_positive_rate = rates.false_positive;
  for (const auto& t : kMaeTargets) p.sigma_cm[kind_index(t.kind)] = sigma_for_mae(t.mae_cm);
  return p;
}

}  // namespace echoreason

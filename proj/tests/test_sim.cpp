#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "echoreason/calibration.hpp"
#include "echoreason/echo_sim.hpp"
#include "echoreason/reference_pack.hpp"
#include "echoreason/study_io.hpp"
#include "support.hpp"

using namespace echoreason;

namespace {

SimConfig small_config(std::uint64_t seed, int count) {
  SimConfig c;
  c.seed = seed;
  c.study_count = count;
  return c;
}

bool on_cent_grid(double v) { return std::fabs(v * 100.0 - std::round(v * 100.0)) < 1e-6; }

}  // namespace

TEST(EchoSim, GenerationIsDeterministicPerIndex) {
  const auto c = small_config(5, 10);
  const auto a = generate_study(c, 3);
  const auto b = generate_study(c, 3);
  EXPECT_EQ(study_to_json(a), study_to_json(b));
  EXPECT_NE(study_to_json(a), study_to_json(generate_study(c, 4)));
  EXPECT_EQ(a.study_id, "study-0003");
}

TEST(EchoSim, GeneratedStudiesSatisfyInvariants) {
  const auto studies = generate_dataset(small_config(17, 400));
  ASSERT_EQ(studies.size(), 400u);
  for (const auto& s : studies) {
    SCOPED_TRACE(s.study_id);
    EXPECT_TRUE(validate_study(s).ok());
    const int p = s.cycle.period_frames;
    EXPECT_EQ(p % 2, 0);
    EXPECT_GE(p, 32);
    EXPECT_LE(p, 60);
    EXPECT_EQ(s.frame_count % p, 0);
    EXPECT_GE(s.cycle.phase_offset_frames, 0);
    EXPECT_LT(s.cycle.phase_offset_frames, p);
    EXPECT_EQ(s.cycle.values.size(), 7u);
    for (const auto& [k, v] : s.cycle.values) {
      EXPECT_TRUE(on_cent_grid(v.ed_cm));
      EXPECT_TRUE(on_cent_grid(v.es_cm));
    }
    EXPECT_FALSE(s.key_frames(Phase::ED).empty());
    EXPECT_FALSE(s.key_frames(Phase::ES).empty());
  }
}

TEST(EchoSim, DegradedWindowsAppearAtRoughlyTheConfiguredRate) {
  const auto studies = generate_dataset(small_config(3, 1000));
  int degraded = 0;
  for (const auto& s : studies) degraded += !s.quality.degraded.empty();
  EXPECT_NEAR(degraded / 1000.0, 0.5, 0.06);
}

TEST(EchoSim, RejectsBadConfig) {
  SimConfig c;
  c.period_min = 40;
  c.period_max = 30;
  EXPECT_THROW(validate_config(c), Error);
  c = SimConfig{};
  c.value_ranges[Kind::LVID].ratio_max = 1.2;
  EXPECT_THROW(validate_config(c), Error);
  c = SimConfig{};
  c.invisible_probability = 1.5;
  EXPECT_THROW(validate_config(c), Error);
}

TEST(EchoSim, GroundTruthMatchesCycle) {
  const auto s = fixtures::plax_study();
  const auto gt = ground_truth(s);
  EXPECT_EQ(gt.ed_frames, (std::vector<int>{5, 45}));
  EXPECT_EQ(gt.es_frames, (std::vector<int>{25, 65}));
  EXPECT_EQ(gt.feasibility.size(), 80u);
  EXPECT_DOUBLE_EQ(ground_truth_measurement(s, Kind::IVS, Phase::ES), 1.4);
  EXPECT_THROW(ground_truth_measurement(s, Kind::TAPSE, Phase::ED), Error);
}

TEST(EchoSim, CaliperLengthEqualsValue) {
  const auto s = fixtures::plax_study();
  for (double v : {0.5, 1.0, 4.6}) {
    const auto e = caliper_endpoints(s, Kind::LVID, v);
    EXPECT_NEAR(pixels_to_cm(e[0], e[1], s.pixel_scale), v, 1e-9);
  }
}

TEST(EchoSim, DatasetRoundTripsThroughDisk) {
  auto c = small_config(9, 5);
  c.pixels = true;
  const auto studies = generate_dataset(c);
  const auto dir = fixtures::temp_dir("dataset");
  write_dataset(dir, studies);
  const auto catalog = StudyCatalog::load(dir);
  ASSERT_EQ(catalog.size(), 5u);
  for (const auto& s : studies) {
    const auto* back = catalog.find(s.study_id);
    ASSERT_NE(back, nullptr);
    EXPECT_EQ(study_to_json(*back), study_to_json(s));
    ASSERT_TRUE(back->has_pixels());
    EXPECT_EQ(*back->pixels, *s.pixels);
  }
}

TEST(Benchmark, DefaultMixHasSixtyCasesInTierOrder) {
  const auto studies = generate_dataset(small_config(21, 200));
  const auto b = generate_benchmark(studies, {});
  ASSERT_EQ(b.cases.size(), 60u);
  int counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < b.cases.size(); ++i) {
    counts[static_cast<int>(b.cases[i].difficulty)]++;
    char id[32];
    std::snprintf(id, sizeof id, "case-%04d", static_cast<int>(i) + 1);
    EXPECT_EQ(b.cases[i].case_id, id);
    for (const auto& g : b.cases[i].gold.values) EXPECT_GT(g.tolerance, 0.0);
  }
  EXPECT_EQ(counts[0], 25);
  EXPECT_EQ(counts[1], 21);
  EXPECT_EQ(counts[2], 14);
}

TEST(Benchmark, DeterministicForSeed) {
  const auto studies = generate_dataset(small_config(21, 100));
  BenchmarkOptions o;
  o.seed = 4;
  const auto a = generate_benchmark(studies, o);
  const auto b = generate_benchmark(studies, o);
  ASSERT_EQ(a.cases.size(), b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) EXPECT_EQ(case_to_json(a.cases[i]), case_to_json(b.cases[i]));
}

TEST(Benchmark, GoldValuesComeFromGroundTruth) {
  const auto studies = generate_dataset(small_config(8, 200));
  const StudyCatalog catalog(studies);
  const auto b = generate_benchmark(studies, {});
  for (const auto& c : b.cases) {
    const auto* s = catalog.find(c.study_id);
    ASSERT_NE(s, nullptr);
    for (const auto& g : c.gold.values) {
      if (g.unit != "cm") continue;
      const auto us = g.name.rfind('_');
      const auto kind = parse_kind(g.name.substr(0, us));
      const auto phase = parse_phase(g.name.substr(us + 1));
      ASSERT_TRUE(kind && phase) << g.name;
      EXPECT_DOUBLE_EQ(g.value, ground_truth_measurement(*s, *kind, *phase));
    }
  }
}

TEST(Benchmark, RwtGoldFromFormula) {
  auto s = fixtures::plax_study("study-rwt");
  s.cycle.values[Kind::LVPW] = {1.1, 1.5};
  s.cycle.values[Kind::LVID] = {4.4, 3.0};
  BenchmarkOptions o;
  o.mix = {0, 0, 1};
  o.templates = {"difficult.rwt"};
  const auto b = generate_benchmark({s}, o);
  ASSERT_EQ(b.cases.size(), 1u);
  ASSERT_EQ(b.cases[0].gold.values.size(), 1u);
  EXPECT_NEAR(b.cases[0].gold.values[0].value, 0.5, 1e-12);
  EXPECT_EQ(b.cases[0].gold.values[0].unit, "");
}

TEST(Benchmark, LaAoUsesSystolicAtriumOverDiastolicAorta) {
  auto s = fixtures::plax_study("study-laao");
  s.cycle.values[Kind::LA] = {3.0, 3.6};  // unusual but valid for the formula
  s.cycle.values[Kind::Aorta] = {3.0, 2.9};
  BenchmarkOptions o;
  o.mix = {0, 0, 1};
  o.templates = {"difficult.la_ao"};
  const auto b = generate_benchmark({s}, o);
  ASSERT_EQ(b.cases.size(), 1u);
  EXPECT_NEAR(b.cases[0].gold.values[0].value, 1.2, 1e-12);
}

TEST(Benchmark, TrapCasesAskForAKindDegradedOnTheFirstEdFrame) {
  const auto studies = generate_dataset(small_config(30, 300));
  const StudyCatalog catalog(studies);
  BenchmarkOptions o;
  o.mix = {12, 0, 0};
  o.templates = {"easy.trap_ed"};
  const auto b = generate_benchmark(studies, o);
  ASSERT_EQ(b.cases.size(), 12u);
  for (const auto& c : b.cases) {
    const auto* s = catalog.find(c.study_id);
    const auto name = c.gold.values.at(0).name;
    const auto kind = *parse_kind(name.substr(0, name.rfind('_')));
    EXPECT_FALSE(s->feasibility(s->key_frames(Phase::ED).front()).test(kind_index(kind)));
    bool some_ed_feasible = false;
    for (int f : s->key_frames(Phase::ED)) some_ed_feasible = some_ed_feasible || s->feasibility(f).test(kind_index(kind));
    EXPECT_TRUE(some_ed_feasible);
  }
}

TEST(Benchmark, ThresholdCasesAreBorderlineAbnormal) {
  const auto studies = generate_dataset(small_config(31, 300));
  BenchmarkOptions o;
  o.mix = {0, 0, 10};
  o.templates = {"difficult.threshold"};
  const auto b = generate_benchmark(studies, o);
  ASSERT_EQ(b.cases.size(), 10u);
  for (const auto& c : b.cases) {
    ASSERT_TRUE(c.gold.label.has_value());
    EXPECT_NE(*c.gold.label, "normal");
    const auto& g = c.gold.values.at(0);
    const auto range = find_reference_range(g.name.substr(0, g.name.rfind('_')));
    ASSERT_TRUE(range.has_value());
    EXPECT_EQ(*c.gold.label, classify_value(g.value, range->lower, range->upper));
  }
}

TEST(Benchmark, UnknownTemplateAndEmptyInputs) {
  BenchmarkOptions o;
  o.templates = {"easy.nonexistent"};
  EXPECT_THROW(generate_benchmark({}, o), Error);
  const auto empty = generate_benchmark({}, {});
  EXPECT_TRUE(empty.cases.empty());
  EXPECT_FALSE(empty.warnings.empty());
}

TEST(Calibration, MeasurementSigmaMatchesOracle) {
  // Oracle: mae * sqrt(pi / 2), evaluated independently at 30 digits.
  EXPECT_NEAR(sigma_for_mae(0.13), 0.162930837851015038, 1e-15);
  EXPECT_NEAR(sigma_for_mae(0.31), 0.388527382567805075, 1e-15);
  EXPECT_EQ(measurement_mae_targets().size(), 7u);
}

TEST(Calibration, PhaseSigmaMatchesOracle) {
  // Oracle: root of sum_k erfc((k - 1/2) / (sigma sqrt 2)) = target, 30-digit arithmetic.
  EXPECT_NEAR(solve_rounded_normal_sigma(kPhaseMaeEd), 2.46097614343508058, 1e-9);
  EXPECT_NEAR(solve_rounded_normal_sigma(kPhaseMaeEs), 5.33440404387380085, 1e-9);
}

TEST(Calibration, RoundedNormalExpectationProperties) {
  EXPECT_DOUBLE_EQ(expected_abs_rounded_normal(0.0), 0.0);
  double prev = 0.0;
  for (double s = 0.1; s < 10.0; s += 0.1) {
    const double e = expected_abs_rounded_normal(s);
    EXPECT_GT(e, prev);
    prev = e;
  }
  // Large sigma: rounding adds little to sigma * sqrt(2 / pi).
  EXPECT_NEAR(expected_abs_rounded_normal(20.0), 20.0 * std::sqrt(2.0 / std::numbers::pi), 0.01);
  EXPECT_THROW(solve_rounded_normal_sigma(0.0), Error);
}

TEST(Calibration, FlipRatesHandFixture) {
  LabelCounts c;
  c.positives[0] = 100;
  c.negatives[0] = 300;
  c.positives[1] = 1000;
  c.negatives[1] = 1;
  c.negatives[2] = 50;  // never positive
  const auto r = solve_flip_rates(c);
  EXPECT_NEAR(r.false_negative[0], 0.135, 1e-12);
  EXPECT_NEAR(r.false_positive[0], 100 * 0.865 * (1 / 0.845 - 1) / 300, 1e-12);
  EXPECT_DOUBLE_EQ(r.false_positive[1], 1.0);
  EXPECT_DOUBLE_EQ(r.false_negative[2], 0.0);
  EXPECT_DOUBLE_EQ(r.false_positive[2], 0.0);
  EXPECT_THROW(solve_flip_rates(c, {0.0, 0.5}), Error);
}

TEST(Calibration, KeyFrameLabelCounts) {
  const auto s = fixtures::plax_study();
  const auto c = count_key_frame_labels(std::vector<EchoStudy>{s});
  EXPECT_EQ(c.frames, 4u);
  EXPECT_EQ(c.positives[kind_index(Kind::IVS)], 4u);
  EXPECT_EQ(c.negatives[kind_index(Kind::TAPSE)], 4u);
}

TEST(Calibration, ProfileCombinesAllTargets) {
  FlipRates r;
  r.false_negative[0] = 0.1;
  const auto p = calibrated_noise_profile(77, r);
  EXPECT_EQ(p.seed, 77u);
  EXPECT_NEAR(p.sigma_ed, 2.460976143435, 1e-9);
  EXPECT_DOUBLE_EQ(p.false_negative_rate[0], 0.1);
  for (const auto& t : measurement_mae_targets()) {
    EXPECT_DOUBLE_EQ(p.sigma_cm[kind_index(t.kind)], sigma_for_mae(t.mae_cm));
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "echoreason/benchmark_case.hpp"
#include "echoreason/domain.hpp"
#include "echoreason/error.hpp"
#include "echoreason/rng.hpp"
#include "echoreason/study_io.hpp"
#include "echoreason/text.hpp"
#include "support.hpp"

using namespace echoreason;

TEST(Rng, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, DeriveSeedIsOrderSensitive) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
}

TEST(Rng, UniformIntStaysInRangeAndHitsBounds) {
  Rng r(7);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_int(-2, 3);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 3);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Text, FormatValue) {
  EXPECT_EQ(format_value(1.0), "1.0");
  EXPECT_EQ(format_value(4.6), "4.6");
  EXPECT_EQ(format_value(4.64), "4.64");
  EXPECT_EQ(format_value(0.126), "0.13");
  EXPECT_EQ(format_fixed(2.0, 3), "2.000");
}

TEST(Text, CaseHelpers) {
  EXPECT_TRUE(iequals("FINISH", "finish"));
  EXPECT_FALSE(iequals("FINISH", "finis"));
  EXPECT_EQ(trim("  a b \n"), "a b");
  EXPECT_TRUE(icontains("Normal Range", "range"));
}

TEST(Text, ExtractNumbersUnits) {
  const auto c = extract_numbers("IVS is 1.1 cm and LVID 46 mm, EF 55%.");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c[0].value, 1.1);
  EXPECT_EQ(c[0].unit, "cm");
  EXPECT_EQ(c[0].decimals, 1);
  EXPECT_EQ(c[1].unit, "mm");
  EXPECT_EQ(c[1].decimals, 0);
  EXPECT_EQ(c[2].unit, "%");
}

TEST(Text, ExtractNumbersSkipsGluedDigits) {
  const auto c = extract_numbers("A4C view, LVID_d2 measured 4.2cm");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].value, 4.2);
  EXPECT_EQ(c[0].unit, "cm");
}

TEST(Text, RangeLowerBoundInheritsUnit) {
  const auto c = extract_numbers("normal 0.6\xE2\x80\x93" "1.0 cm or 0.6-1.0 cm");
  ASSERT_EQ(c.size(), 4u);
  for (const auto& x : c) EXPECT_EQ(x.unit, "cm");
}

TEST(Text, NoNumbers) { EXPECT_TRUE(extract_numbers("mildly thickened septum").empty()); }

TEST(Text, CollectNumbersWalksStrings) {
  const json j = {{"a", 1.5}, {"b", {2, "value 3.25 cm"}}};
  const auto v = collect_numbers(j);
  EXPECT_EQ(v, (std::vector<double>{1.5, 2, 3.25}));
}

TEST(Text, DumpJsonToleratesBadUtf8) {
  const json j = std::string("\xff\xfe");
  EXPECT_NO_THROW(dump_json(j));
}

TEST(Domain, KindCatalog) {
  EXPECT_EQ(measurement_kinds().size(), 16u);
  EXPECT_EQ(evaluated_kinds().size(), 7u);
  for (std::size_t i = 0; i < kKindCount; ++i) {
    EXPECT_EQ(kind_index(kind_from_index(i)), i);
    EXPECT_EQ(parse_kind(kind_name(kind_from_index(i))), kind_from_index(i));
  }
  EXPECT_EQ(parse_kind("rv BASE"), Kind::RVBase);
  EXPECT_FALSE(parse_kind("LV mass").has_value());
  EXPECT_THROW(kind_from_index(16), Error);
}

TEST(Domain, EveryViewHasKinds) {
  for (View v : all_views()) {
    EXPECT_FALSE(view_kinds(v).empty());
    EXPECT_EQ(parse_view(view_name(v)), v);
  }
}

TEST(Domain, PhaseParsing) {
  EXPECT_EQ(parse_phase("ED"), Phase::ED);
  EXPECT_EQ(parse_phase("End-Systole"), Phase::ES);
  EXPECT_FALSE(parse_phase("diastole").has_value());
}

TEST(Domain, CycleGeometry) {
  const auto s = fixtures::plax_study();
  EXPECT_EQ(s.key_frames(Phase::ED), (std::vector<int>{5, 45}));
  EXPECT_EQ(s.key_frames(Phase::ES), (std::vector<int>{25, 65}));
  EXPECT_DOUBLE_EQ(s.true_value(Kind::LVID, 5), 4.6);
  EXPECT_DOUBLE_EQ(s.true_value(Kind::LVID, 25), 3.0);
  EXPECT_NEAR(s.true_value(Kind::LVID, 15), 3.8, 1e-12);
}

TEST(Domain, ValueAtIsPeriodicAndBounded) {
  const auto s = fixtures::plax_study();
  for (int t = 0; t < 80; ++t) {
    for (const auto& [k, v] : s.cycle.values) {
      const double x = s.true_value(k, t);
      EXPECT_NEAR(x, s.true_value(k, t + 40), 1e-9);
      EXPECT_GE(x, std::min(v.ed_cm, v.es_cm) - 1e-12);
      EXPECT_LE(x, std::max(v.ed_cm, v.es_cm) + 1e-12);
    }
  }
}

TEST(Domain, FeasibilityFollowsVisibilityAndWindows) {
  auto s = fixtures::plax_study();
  s.quality.degraded.push_back({0, 10, {Kind::IVS}});
  EXPECT_FALSE(s.feasibility(5).test(kind_index(Kind::IVS)));
  EXPECT_TRUE(s.feasibility(10).test(kind_index(Kind::IVS)));
  EXPECT_TRUE(s.feasibility(5).test(kind_index(Kind::LVID)));
  EXPECT_FALSE(s.feasibility(5).test(kind_index(Kind::TAPSE)));
}

TEST(Domain, PixelDistance) {
  EXPECT_DOUBLE_EQ(pixels_to_cm({0, 0}, {3, 4}, 0.1), 0.5);
}

TEST(Domain, ValidationReportsViolations) {
  auto s = fixtures::plax_study();
  EXPECT_TRUE(validate_study(s).ok());
  s.cycle.values[Kind::LVID] = {3.0, 4.6};  // cavity larger at ES
  s.frame_count = 0;
  EXPECT_GE(validate_study(s).violations.size(), 2u);
}

TEST(StudyIo, RoundTripWithPixels) {
  auto s = fixtures::plax_study("study-io");
  s.quality.degraded.push_back({3, 9, {Kind::LA, Kind::Aorta}});
  auto px = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(80 * 120 * 160));
  for (std::size_t i = 0; i < px->size(); ++i) (*px)[i] = static_cast<std::uint8_t>(i * 31);
  s.pixels = px;
  const auto dir = fixtures::temp_dir("io");
  const auto doc = write_study(s, dir);
  const auto back = read_study(doc);
  EXPECT_EQ(back.study_id, s.study_id);
  EXPECT_EQ(back.cycle, s.cycle);
  EXPECT_EQ(back.quality, s.quality);
  ASSERT_TRUE(back.has_pixels());
  EXPECT_EQ(*back.pixels, *px);
  EXPECT_EQ(back.frame_pixels(3).size(), 120u * 160u);
}

TEST(StudyIo, MissingFieldIsFormatError) {
  json doc = study_to_json(fixtures::plax_study());
  doc.erase("frame_count");
  try {
    study_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FormatError);
  }
}

TEST(StudyIo, CatalogLoadsManifest) {
  const auto dir = fixtures::temp_dir("catalog");
  std::filesystem::create_directories(dir / "studies");
  write_study(fixtures::plax_study("study-a"), dir / "studies");
  write_study(fixtures::plax_study("study-b"), dir / "studies");
  std::ofstream(dir / "manifest.json") << R"({"schema":"echodataset/1","studies":[{"study_id":"study-a","path":"studies/study-a.json"},{"study_id":"study-b","path":"studies/study-b.json"}]})";
  const auto catalog = StudyCatalog::load(dir);
  EXPECT_EQ(catalog.size(), 2u);
  EXPECT_NE(catalog.find("study-b"), nullptr);
  EXPECT_EQ(catalog.find("study-c"), nullptr);
}

TEST(BenchmarkCase, ToleranceIsMaxOfAbsAndRel) {
  EXPECT_DOUBLE_EQ(kLengthTolerance.for_value(1.0), 0.2);
  EXPECT_DOUBLE_EQ(kLengthTolerance.for_value(4.0), 0.4);
  EXPECT_DOUBLE_EQ(kRatioTolerance.for_value(0.4), 0.05);
}

TEST(BenchmarkCase, JsonAndFileRoundTrip) {
  BenchmarkCase c;
  c.case_id = "case-0001";
  c.study_id = "study-0001";
  c.question = "What is the IVS?";
  c.gold.text = "IVS_ed 1.0 cm (normal)";
  c.gold.values.push_back({"IVS_ed", 1.0, "cm", 0.2});
  c.gold.label = "normal";
  c.gold.label_set = {"reduced", "normal", "increased"};
  c.difficulty = Difficulty::Difficult;
  c.template_id = "difficult.threshold";
  const auto back = case_from_json(case_to_json(c));
  EXPECT_EQ(back.case_id, c.case_id);
  EXPECT_EQ(back.gold.label, c.gold.label);
  EXPECT_EQ(back.gold.values.size(), 1u);
  EXPECT_EQ(back.difficulty, Difficulty::Difficult);

  const auto dir = fixtures::temp_dir("bench-file");
  write_benchmark(dir / "b.jsonl", {c, c});
  EXPECT_EQ(read_benchmark(dir / "b.jsonl").size(), 2u);
}

TEST(BenchmarkCase, DifficultyNames) {
  for (Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult}) {
    EXPECT_EQ(parse_difficulty(difficulty_name(d)), d);
  }
  EXPECT_FALSE(parse_difficulty("hard").has_value());
}

TEST(Errors, CodeIsPrefixed) {
  const Error e(Errc::NotFound, "x");
  EXPECT_EQ(std::string(e.what()), "NotFound: x");
  Expected<int, std::string> ok(3), bad(std::string("no"));
  EXPECT_TRUE(ok);
  EXPECT_FALSE(bad);
  EXPECT_EQ(bad.error(), "no");
}

#include <gtest/gtest.h>

#include <cmath>

#include "echoreason/calibration.hpp"
#include "echoreason/echo_sim.hpp"
#include "echoreason/vision_tools.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace echoreason;

namespace {

EchoStudy with_pixels(EchoStudy s) {
  auto px = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(s.frame_count) * static_cast<std::size_t>(s.height * s.width), 50);
  s.pixels = px;
  return s;
}

NoiseProfile noisy(std::uint64_t seed) {
  NoiseProfile n;
  n.seed = seed;
  n.sigma_ed = 2.0;
  n.sigma_es = 4.0;
  n.sigma_cm.fill(0.2);
  n.false_negative_rate.fill(0.2);
  n.false_positive_rate.fill(0.1);
  return n;
}

}  // namespace

TEST(Oracle, ZeroNoiseIsExact) {
  const auto s = fixtures::plax_study();
  const auto zero = NoiseProfile::zero();
  const auto phases = detect_phases(s, zero);
  EXPECT_EQ(phases.ed_frames, s.key_frames(Phase::ED));
  EXPECT_EQ(phases.es_frames, s.key_frames(Phase::ES));
  for (int f = 0; f < s.frame_count; ++f) {
    const auto r = predict_feasibility(s, f, zero);
    EXPECT_EQ(r.predicted, s.feasibility(f));
    for (std::size_t j = 0; j < kKindCount; ++j) EXPECT_DOUBLE_EQ(r.confidence[j], r.predicted.test(j) ? 1.0 : 0.0);
  }
  const auto m = measure(s, 5, Kind::LVID, zero);
  EXPECT_DOUBLE_EQ(m.value_cm, 4.6);
  ASSERT_TRUE(m.endpoints.has_value());
  EXPECT_NEAR(pixels_to_cm((*m.endpoints)[0], (*m.endpoints)[1], s.pixel_scale), 4.6, 1e-9);
}

TEST(Oracle, Errors) {
  auto s = fixtures::plax_study();
  const auto zero = NoiseProfile::zero();
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code([&] { measure(s, 80, Kind::IVS, zero); }), Errc::BadFrame);
  EXPECT_EQ(code([&] { measure(s, -1, Kind::IVS, zero); }), Errc::BadFrame);
  EXPECT_EQ(code([&] { measure(s, 5, Kind::TAPSE, zero); }), Errc::NotMeasurable);
  EXPECT_EQ(code([&] { predict_feasibility(s, 80, zero); }), Errc::BadFrame);
  s.frame_count = 30;  // shorter than one period
  EXPECT_EQ(code([&] { detect_phases(s, zero); }), Errc::NoCycle);
}

TEST(Oracle, NoiseIsReproducibleAndOrderIndependent) {
  const auto s = fixtures::plax_study();
  const auto n = noisy(9);
  const double a = measure(s, 45, Kind::IVS, n).value_cm;
  measure(s, 5, Kind::LVID, n);
  predict_feasibility(s, 7, n);
  EXPECT_DOUBLE_EQ(measure(s, 45, Kind::IVS, n).value_cm, a);
  EXPECT_EQ(predict_feasibility(s, 12, n).predicted, predict_feasibility(s, 12, n).predicted);
  EXPECT_EQ(detect_phases(s, n).ed_frames, detect_phases(s, n).ed_frames);
  // A different seed changes the draws.
  EXPECT_NE(measure(s, 45, Kind::IVS, noisy(10)).value_cm, a);
}

TEST(Oracle, MeasurementsStayNonNegative) {
  auto s = fixtures::plax_study();
  s.cycle.values[Kind::IVS] = {0.01, 0.01};
  NoiseProfile n = noisy(1);
  n.sigma_cm.fill(5.0);
  for (int f = 0; f < s.frame_count; ++f) EXPECT_GE(measure(s, f, Kind::IVS, n).value_cm, 0.0);
}

TEST(Oracle, PhasePredictionsAreSortedUniqueAndInRange) {
  const auto studies = generate_dataset([] {
    SimConfig c;
    c.seed = 4;
    c.study_count = 200;
    return c;
  }());
  NoiseProfile n = noisy(3);
  n.sigma_ed = 30.0;
  n.sigma_es = 30.0;
  for (const auto& s : studies) {
    const auto r = detect_phases(s, n);
    for (const auto* frames : {&r.ed_frames, &r.es_frames}) {
      EXPECT_TRUE(std::is_sorted(frames->begin(), frames->end()));
      EXPECT_EQ(std::adjacent_find(frames->begin(), frames->end()), frames->end());
      for (int f : *frames) {
        EXPECT_GE(f, 0);
        EXPECT_LT(f, s.frame_count);
      }
    }
  }
}

TEST(Oracle, ConfidenceIsPosteriorUnderEvenPrior) {
  const auto s = fixtures::plax_study();
  NoiseProfile n;
  n.false_negative_rate.fill(0.2);
  n.false_positive_rate.fill(0.1);
  const auto r = predict_feasibility(s, 5, n);
  for (std::size_t j = 0; j < kKindCount; ++j) {
    const double expected = r.predicted.test(j) ? 0.8 / (0.8 + 0.1) : 0.2 / (0.2 + 0.9);
    EXPECT_NEAR(r.confidence[j], expected, 1e-12);
  }
}

TEST(Noise, ValidationAndJsonRoundTrip) {
  NoiseProfile n = noisy(5);
  EXPECT_NO_THROW(validate_noise(n));
  const auto back = noise_from_json(noise_to_json(n));
  EXPECT_EQ(noise_to_json(back), noise_to_json(n));
  EXPECT_FALSE(n.is_zero());
  EXPECT_TRUE(NoiseProfile::zero(3).is_zero());
  n.false_positive_rate[2] = 1.5;
  EXPECT_THROW(validate_noise(n), Error);
  n = noisy(5);
  n.sigma_ed = -1;
  EXPECT_THROW(validate_noise(n), Error);
}

TEST(Resize, IdentityAndConstantImages) {
  std::vector<std::uint8_t> img(6 * 4);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(i * 10);
  EXPECT_EQ(resize_bilinear(img, 4, 6, 4, 6), img);
  const std::vector<std::uint8_t> flat(12 * 9, 77);
  for (auto v : resize_bilinear(flat, 9, 12, 31, 17)) EXPECT_EQ(v, 77);
  EXPECT_THROW(resize_bilinear(img, 5, 6, 2, 2), Error);
}

TEST(Adapter, SpeaksTheWireProtocol) {
  std::vector<fixtures::StubRequest> seen;
  std::mutex mu;
  fixtures::StubServer server([&](const fixtures::StubRequest& r) {
    std::lock_guard lock(mu);
    seen.push_back(r);
    if (r.path == "/v1/phases") return fixtures::StubResponse{200, R"({"ed_frames":[45,5,5],"es_frames":[25]})"};
    if (r.path == "/v1/feasibility") {
      return fixtures::StubResponse{200, R"({"feasible":[1,0,true,0,0,0,0,0,0,0,0,0,0,0,0,0]})"};
    }
    // A 640x480 vertical segment of 160 input rows = 40 native rows = 5 cm.
    return fixtures::StubResponse{200, R"({"endpoints":[[320,100],[320,260]]})"};
  });
  const auto s = with_pixels(fixtures::plax_study());
  VisionAdapter adapter({server.url(), 5000});

  const auto p = adapter.detect_phases(s);
  EXPECT_EQ(p.ed_frames, (std::vector<int>{5, 45}));
  EXPECT_EQ(p.es_frames, (std::vector<int>{25}));
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].body.size(), static_cast<std::size_t>(80 * kPhaseInputSize * kPhaseInputSize));
  EXPECT_EQ(seen[0].headers["X-Echo-Frames"], "80");
  EXPECT_EQ(seen[0].headers["X-Echo-Study"], "study-test");

  const auto f = adapter.predict_feasibility(s, 7);
  EXPECT_TRUE(f.predicted.test(0));
  EXPECT_FALSE(f.predicted.test(1));
  EXPECT_TRUE(f.predicted.test(2));
  EXPECT_EQ(seen[1].headers["X-Echo-Frame-Index"], "7");

  const auto m = adapter.measure(s, 5, Kind::LVID);
  EXPECT_EQ(seen[2].headers["X-Echo-Kind"], "LVID");
  EXPECT_EQ(seen[2].body.size(), static_cast<std::size_t>(kMeasureInputWidth * kMeasureInputHeight));
  EXPECT_EQ(m.source, MeasurementSource::External);
  EXPECT_NEAR(m.value_cm, 40 * 0.125, 1e-9);
  EXPECT_NEAR((*m.endpoints)[0].x, 80.0, 1e-9);
}

TEST(Adapter, ProtocolAndTransportFailures) {
  std::string reply = "not json";
  int status = 200;
  fixtures::StubServer server([&](const fixtures::StubRequest&) { return fixtures::StubResponse{status, reply}; });
  const auto s = with_pixels(fixtures::plax_study());
  VisionAdapter adapter({server.url(), 5000});
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code([&] { adapter.detect_phases(s); }), Errc::AdapterProtocolError);
  reply = R"({"ed_frames":[500],"es_frames":[]})";
  EXPECT_EQ(code([&] { adapter.detect_phases(s); }), Errc::AdapterProtocolError);
  reply = R"({"feasible":[1,0]})";
  EXPECT_EQ(code([&] { adapter.predict_feasibility(s, 0); }), Errc::AdapterProtocolError);
  reply = R"({"endpoints":[[1,2]]})";
  EXPECT_EQ(code([&] { adapter.measure(s, 0, Kind::IVS); }), Errc::AdapterProtocolError);
  status = 500;
  EXPECT_EQ(code([&] { adapter.measure(s, 0, Kind::IVS); }), Errc::ExecutionFailure);
  EXPECT_EQ(code([&] { VisionAdapter({server.url(), 5000}).measure(fixtures::plax_study(), 0, Kind::IVS); }),
            Errc::ExecutionFailure);  // no pixels
  VisionAdapter dead({"http://127.0.0.1:1", 500});
  EXPECT_EQ(code([&] { dead.detect_phases(s); }), Errc::ExecutionFailure);
}

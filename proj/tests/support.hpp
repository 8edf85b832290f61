#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "echoreason/domain.hpp"
#include "echoreason/error.hpp"

namespace echoreason::fixtures {

// Two-cycle PLAX clip: period 40, offset 5, so ED = {5, 45}, ES = {25, 65}.
inline EchoStudy plax_study(std::string id = "study-test") {
  EchoStudy s;
  s.study_id = std::move(id);
  s.view = View::PLAX;
  s.frame_count = 80;
  s.frame_rate = 50.0;
  s.pixel_scale = 0.125;
  s.height = 120;
  s.width = 160;
  s.cycle.period_frames = 40;
  s.cycle.phase_offset_frames = 5;
  s.cycle.values = {{Kind::IVS, {1.0, 1.4}},   {Kind::LVID, {4.6, 3.0}},  {Kind::LVPW, {0.9, 1.3}},
                    {Kind::LA, {3.2, 2.9}},    {Kind::Aorta, {3.0, 2.9}}, {Kind::AorticRoot, {3.1, 3.0}},
                    {Kind::RVBase, {3.5, 2.9}}};
  for (Kind k : {Kind::IVS, Kind::LVID, Kind::LVPW, Kind::LA, Kind::Aorta, Kind::AorticRoot}) {
    s.quality.visible.set(kind_index(k));
  }
  return s;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("echoreason-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace echoreason::fixtures

#pragma once

#include "bostomo/scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace testing {

inline std::filesystem::path source_dir() { return BOSTOMO_SOURCE_DIR; }

inline std::filesystem::path config(const std::string& name) { return source_dir() / "configs" / name; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bostomo_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small room with a camera looking along +y at a self-luminous wall on the far face.
inline nlohmann::json small_scene_json() {
  return {
      {"room", {{"min_m", {-1.0, -1.0, 0.0}}, {"max_m", {1.0, 1.0, 2.0}}}},
      {"wall",
       {{"point_m", {0.0, 1.0, 1.0}},
        {"normal", {0.0, -1.0, 0.0}},
        {"extent_m", {2.0, 2.0}},
        {"texture", {{"type", "noise"}, {"seed", 5}, {"resolution", 64}, {"band", {2.0, 6.0}}}}}},
      {"camera",
       {{"position_m", {0.0, -6.0, 1.0}}, {"sensor_extent_m", {0.036, 0.036}}, {"resolution", {16, 16}}}},
      {"boundary_plane", {{"axis", "x"}, {"offset_m", -1.0}}},
      {"trace", {{"step_m", 0.05}}},
  };
}

inline bos::Scene small_scene() { return bos::scene_from_json(small_scene_json()); }

}  // namespace testing

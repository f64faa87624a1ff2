#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mealsense/image/frame.h"

namespace mealsense::synth {

// A dish drawn as a solid ellipse in a key colour that no background pixel uses.
struct Dish {
  std::string label;
  std::array<std::uint8_t, 3> rgb{};
  int cx = 0, cy = 0;  // centre
  int rx = 1, ry = 1;  // radii
};

struct MealScene {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;  // inclusive
  std::vector<Dish> dishes;
};

// What the outward camera sees over time: wall and table everywhere, plus
// the dishes of whichever scene covers the capture time. Dishes jitter by up
// to 2 px per frame, deterministically from the timestamp.
struct SceneScript {
  int width = 160;
  int height = 120;
  std::uint64_t seed = 1;
  std::vector<MealScene> scenes;

  static SceneScript from_json(const nlohmann::json& j);
  static SceneScript load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

image::FrameImage render_frame(const SceneScript& script, std::int64_t captured_ns, const std::string& frame_id);

}  // namespace mealsense::synth

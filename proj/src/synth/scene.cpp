#include "mealsense/synth/scene.h"

#include <algorithm>
#include <fstream>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::synth {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  util::Fnv1a h;
  h.update_u64(a);
  h.update_u64(b);
  return h.digest();
}

}  // namespace

SceneScript SceneScript::from_json(const nlohmann::json& j) {
  SceneScript s;
  s.width = j.value("width", 160);
  s.height = j.value("height", 120);
  s.seed = j.value("seed", std::uint64_t{1});
  require(s.width >= 8 && s.height >= 8, ErrorCode::InvalidArgument, "scene frame too small");
  for (const auto& js : j.value("scenes", nlohmann::json::array())) {
    MealScene scene;
    scene.start_ns = js.at("start_ns").get<std::int64_t>();
    scene.end_ns = js.at("end_ns").get<std::int64_t>();
    require(scene.end_ns >= scene.start_ns, ErrorCode::InvalidArgument, "scene ends before it starts");
    for (const auto& jd : js.at("dishes")) {
      Dish d;
      d.label = jd.at("label").get<std::string>();
      const auto rgb = jd.at("rgb").get<std::vector<int>>();
      require(rgb.size() == 3, ErrorCode::InvalidArgument, "dish colour needs 3 channels");
      for (int c = 0; c < 3; ++c) d.rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::clamp(rgb[c], 0, 255));
      d.cx = jd.at("cx").get<int>();
      d.cy = jd.at("cy").get<int>();
      d.rx = jd.at("rx").get<int>();
      d.ry = jd.at("ry").get<int>();
      require(d.rx > 0 && d.ry > 0, ErrorCode::InvalidArgument, "dish radii must be positive");
      scene.dishes.push_back(std::move(d));
    }
    s.scenes.push_back(std::move(scene));
  }
  return s;
}

SceneScript SceneScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "bad scene script " + path.string() + ": " + e.what());
  }
}

nlohmann::json SceneScript::to_json() const {
  nlohmann::json scenes_json = nlohmann::json::array();
  for (const auto& scene : scenes) {
    nlohmann::json dishes = nlohmann::json::array();
    for (const auto& d : scene.dishes) {
      nlohmann::json jd = nlohmann::json::object();
      jd["label"] = d.label;
      jd["rgb"] = nlohmann::json::array({d.rgb[0], d.rgb[1], d.rgb[2]});
      jd["cx"] = d.cx;
      jd["cy"] = d.cy;
      jd["rx"] = d.rx;
      jd["ry"] = d.ry;
      dishes.push_back(std::move(jd));
    }
    nlohmann::json js = nlohmann::json::object();
    js["start_ns"] = scene.start_ns;
    js["end_ns"] = scene.end_ns;
    js["dishes"] = std::move(dishes);
    scenes_json.push_back(std::move(js));
  }
  nlohmann::json j = nlohmann::json::object();
  j["width"] = width;
  j["height"] = height;
  j["seed"] = seed;
  j["scenes"] = std::move(scenes_json);
  return j;
}

image::FrameImage render_frame(const SceneScript& script, std::int64_t captured_ns, const std::string& frame_id) {
  image::FrameImage f;
  f.frame_id = frame_id;
  f.width = script.width;
  f.height = script.height;
  f.captured_ns = captured_ns;
  f.pixels.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  const int table_top = f.height * 2 / 5;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      // greys for the wall, browns for the table; neither reaches a key colour
      const auto n = static_cast<int>(mix(script.seed, static_cast<std::uint64_t>(y) * 65536U + x) % 9) - 4;
      int r, g, b;
      if (y < table_top) {
        const int shade = 170 + 30 * y / std::max(table_top, 1);
        r = g = b = shade + n;
      } else {
        r = 150 + n;
        g = 110 + n;
        b = 70 + n;
      }
      f.at(x, y, 0) = static_cast<std::uint8_t>(r);
      f.at(x, y, 1) = static_cast<std::uint8_t>(g);
      f.at(x, y, 2) = static_cast<std::uint8_t>(b);
    }
  const MealScene* scene = nullptr;
  for (const auto& s : script.scenes)
    if (captured_ns >= s.start_ns && captured_ns <= s.end_ns) {
      scene = &s;
      break;
    }
  if (!scene) return f;
  const auto jitter = mix(script.seed ^ 0x5eedULL, static_cast<std::uint64_t>(captured_ns));
  const int dx = static_cast<int>(jitter % 5) - 2;
  const int dy = static_cast<int>((jitter / 5) % 5) - 2;
  for (const auto& d : scene->dishes) {
    const int cx = d.cx + dx, cy = d.cy + dy;
    for (int y = std::max(0, cy - d.ry); y <= std::min(f.height - 1, cy + d.ry); ++y)
      for (int x = std::max(0, cx - d.rx); x <= std::min(f.width - 1, cx + d.rx); ++x) {
        const double u = static_cast<double>(x - cx) / d.rx, v = static_cast<double>(y - cy) / d.ry;
        if (u * u + v * v > 1.0) continue;
        for (int c = 0; c < 3; ++c) f.at(x, y, c) = d.rgb[static_cast<std::size_t>(c)];
      }
  }
  return f;
}

}  // namespace mealsense::synth

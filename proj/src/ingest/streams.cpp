#include "mealsense/ingest/streams.h"

#include <array>

namespace mealsense::ingest {

double axis_value(const ImuSample& s, int axis) {
  switch (axis) {
    case 0: return s.ax;
    case 1: return s.ay;
    case 2: return s.az;
    case 3: return s.gx;
    case 4: return s.gy;
    default: return s.gz;
  }
}

void set_axis_value(ImuSample& s, int axis, double value) {
  switch (axis) {
    case 0: s.ax = value; break;
    case 1: s.ay = value; break;
    case 2: s.az = value; break;
    case 3: s.gx = value; break;
    case 4: s.gy = value; break;
    default: s.gz = value; break;
  }
}

std::string imu_channel_name(int channel) {
  static constexpr std::array<const char*, 6> kAxes = {"ax", "ay", "az", "gx", "gy", "gz"};
  const char* side = channel < 6 ? "left" : "right";
  return std::string(side) + "_" + kAxes[static_cast<std::size_t>(channel % 6)];
}

}  // namespace mealsense::ingest

#pragma once

// First-person camera view synthesised by raycasting the occupancy grid.
//
// Column j of a FrameBuffer is the ray at camera_heading + hfov*(j/(W-1) - 1/2),
// i.e. columns run in order of increasing ray angle (counter-clockwise).
// Viewer-facing encoders flip columns so the operator sees left on the left.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "spyrover/kinematics.hpp"

namespace spyrover::video {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kSkyColor{142, 178, 214};
inline constexpr Rgb kFloorColor{96, 86, 74};
inline constexpr Rgb kWallEastWest{186, 78, 62};  // faces crossed on an x step
inline constexpr Rgb kWallNorthSouth{142, 60, 48};
inline constexpr double kShadeFalloffM = 5.0;

struct RenderSettings {
  int width_px = 320;
  int height_px = 240;
  double hfov_deg = 60.0;
  double wall_height_m = 0.5;
  double camera_height_m = 0.15;
  double max_ray_m = 30.0;
  double target_fps = 15.0;

  void validate() const {
    if (width_px <= 1 || height_px <= 0) throw std::invalid_argument("render: image must be at least 2x1 pixels");
    if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw std::invalid_argument("render: hfov must lie in (0, 180)");
    if (!(max_ray_m > 0.0)) throw std::invalid_argument("render: max_ray_m must be positive");
    if (!(wall_height_m > 0.0) || !(camera_height_m >= 0.0)) throw std::invalid_argument("render: bad heights");
    if (!(target_fps > 0.0)) throw std::invalid_argument("render: target_fps must be positive");
  }

  double hfov_rad() const noexcept { return hfov_deg * std::numbers::pi / 180.0; }

  /// Pinhole focal length in pixels.
  double focal_px() const noexcept { return 0.5 * width_px / std::tan(0.5 * hfov_rad()); }

  double vfov_deg() const noexcept {
    return 2.0 * std::atan(std::tan(0.5 * hfov_rad()) * height_px / width_px) * 180.0 / std::numbers::pi;
  }
};

struct FrameBuffer {
  int width_px = 0;
  int height_px = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
  std::uint64_t frame_seq = 0;
  double sim_time_s = 0.0;

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_px + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }

  friend bool operator==(const FrameBuffer&, const FrameBuffer&) = default;
};

inline double camera_heading(const kinematics::Pose2D& pose, double pan_deg) noexcept {
  return kinematics::normalize_angle(pose.heading_rad + pan_deg * std::numbers::pi / 180.0);
}

enum class Face : std::uint8_t { None, EastWest, NorthSouth };

struct RayHit {
  bool hit = false;
  double distance_m = std::numeric_limits<double>::infinity();
  Face face = Face::None;
  int cell_x = -1;
  int cell_y = -1;
};

/// Grid DDA from (x, y) along `angle`. Out-of-grid cells count as Wall so
/// traversal never indexes past the map.
inline RayHit cast_ray(const kinematics::WorldMap& map, double x_m, double y_m, double angle, double max_ray_m) {
  const double cell = map.cell_size_m();
  const double px = x_m / cell;
  const double py = y_m / cell;
  const double dir_x = std::cos(angle);
  const double dir_y = std::sin(angle);
  int mx = static_cast<int>(std::floor(px));
  int my = static_cast<int>(std::floor(py));

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double delta_x = dir_x == 0.0 ? kInf : std::abs(1.0 / dir_x);
  const double delta_y = dir_y == 0.0 ? kInf : std::abs(1.0 / dir_y);
  const int step_x = dir_x < 0.0 ? -1 : 1;
  const int step_y = dir_y < 0.0 ? -1 : 1;
  double side_x = dir_x < 0.0 ? (px - mx) * delta_x : (mx + 1.0 - px) * delta_x;
  double side_y = dir_y < 0.0 ? (py - my) * delta_y : (my + 1.0 - py) * delta_y;
  const double max_cells = max_ray_m / cell;

  RayHit out;
  if (map.at(mx, my) == kinematics::Cell::Wall) {
    out.hit = true;
    out.distance_m = 0.0;
    out.cell_x = mx;
    out.cell_y = my;
    return out;
  }
  while (true) {
    double dist;
    Face face;
    if (side_x < side_y) {
      dist = side_x;
      side_x += delta_x;
      mx += step_x;
      face = Face::EastWest;
    } else {
      dist = side_y;
      side_y += delta_y;
      my += step_y;
      face = Face::NorthSouth;
    }
    if (dist > max_cells) return out;
    if (map.at(mx, my) == kinematics::Cell::Wall) {
      out.hit = true;
      out.distance_m = dist * cell;
      out.face = face;
      out.cell_x = mx;
      out.cell_y = my;
      return out;
    }
  }
}

/// Column half-height in pixels for a wall at perpendicular distance d.
inline double projected_half_height_px(double perp_distance_m, const RenderSettings& s) noexcept {
  return 0.5 * s.wall_height_m * s.focal_px() / perp_distance_m;
}

/// Horizon row (may be fractional or off-image); tilting up moves it down.
inline double horizon_row(double tilt_deg, const RenderSettings& s) noexcept {
  return 0.5 * s.height_px + tilt_deg / s.vfov_deg() * s.height_px;
}

/// Ray offset from the camera axis for column j, computed so that columns
/// j and W-1-j get exactly opposite angles.
inline double column_offset_rad(int j, const RenderSettings& s) noexcept {
  const double num = 2.0 * j - (s.width_px - 1);
  const double den = 2.0 * (s.width_px - 1);
  return s.hfov_rad() * (num / den);
}

struct ColumnSpan {
  double ray_angle = 0.0;
  RayHit hit;
  double perp_distance_m = std::numeric_limits<double>::infinity();
  int wall_top = 0;     // first wall row
  int wall_bottom = 0;  // one past the last wall row; equal to wall_top when empty
};

inline Rgb shade(Rgb base, double distance_m) noexcept {
  const double k = 1.0 / (1.0 + distance_m / kShadeFalloffM);
  auto ch = [k](std::uint8_t c) { return static_cast<std::uint8_t>(std::lround(c * k)); };
  return {ch(base.r), ch(base.g), ch(base.b)};
}

/// Renders one frame. Deterministic: identical inputs give identical bytes.
inline FrameBuffer render_frame(const kinematics::WorldMap& map, const kinematics::Pose2D& pose, double pan_deg,
                                double tilt_deg, const RenderSettings& s, std::uint64_t frame_seq = 0,
                                double sim_time_s = 0.0, std::vector<ColumnSpan>* columns = nullptr) {
  FrameBuffer fb;
  fb.width_px = s.width_px;
  fb.height_px = s.height_px;
  fb.frame_seq = frame_seq;
  fb.sim_time_s = sim_time_s;
  fb.pixels.resize(static_cast<std::size_t>(s.width_px) * s.height_px * 3);

  const double cam = camera_heading(pose, pan_deg);
  const double horizon = horizon_row(tilt_deg, s);
  const double focal = s.focal_px();
  if (columns) columns->assign(static_cast<std::size_t>(s.width_px), ColumnSpan{});

  auto put = [&fb](int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * fb.width_px + x) * 3;
    fb.pixels[i] = c.r;
    fb.pixels[i + 1] = c.g;
    fb.pixels[i + 2] = c.b;
  };

  for (int j = 0; j < s.width_px; ++j) {
    const double offset = column_offset_rad(j, s);
    const double angle = cam + offset;
    ColumnSpan col;
    col.ray_angle = angle;
    col.hit = cast_ray(map, pose.x_m, pose.y_m, angle, s.max_ray_m);

    int top = 0;
    int bottom = 0;
    Rgb wall{};
    if (col.hit.hit && col.hit.distance_m > 0.0) {
      col.perp_distance_m = col.hit.distance_m * std::cos(offset);
      const double half = 0.5 * s.wall_height_m * focal / col.perp_distance_m;
      // Wall spans floor..wall_height; camera sits at camera_height.
      const double center = horizon - (0.5 * s.wall_height_m - s.camera_height_m) * focal / col.perp_distance_m;
      const double top_f = std::ceil(center - half - 0.5);
      const double bottom_f = std::ceil(center + half - 0.5);
      top = static_cast<int>(std::clamp(top_f, 0.0, static_cast<double>(s.height_px)));
      bottom = static_cast<int>(std::clamp(bottom_f, 0.0, static_cast<double>(s.height_px)));
      wall = shade(col.hit.face == Face::NorthSouth ? kWallNorthSouth : kWallEastWest, col.hit.distance_m);
    } else if (col.hit.hit) {
      col.perp_distance_m = 0.0;
      top = 0;
      bottom = s.height_px;
      wall = kWallEastWest;
    }
    col.wall_top = top;
    col.wall_bottom = bottom;

    for (int y = 0; y < s.height_px; ++y) {
      if (y >= top && y < bottom) {
        put(j, y, wall);
      } else {
        put(j, y, (y + 0.5) < horizon ? kSkyColor : kFloorColor);
      }
    }
    if (columns) (*columns)[static_cast<std::size_t>(j)] = col;
  }
  return fb;
}

/// Counts pixels that are neither sky nor floor.
inline std::size_t count_wall_pixels(const FrameBuffer& fb) {
  std::size_t n = 0;
  for (int y = 0; y < fb.height_px; ++y) {
    for (int x = 0; x < fb.width_px; ++x) {
      const Rgb c = fb.at(x, y);
      if (c != kSkyColor && c != kFloorColor) ++n;
    }
  }
  return n;
}

/// Copy with columns reversed (viewer orientation, left on the left).
inline std::vector<std::uint8_t> viewer_rgb(const FrameBuffer& fb) {
  std::vector<std::uint8_t> out(fb.pixels.size());
  for (int y = 0; y < fb.height_px; ++y) {
    for (int x = 0; x < fb.width_px; ++x) {
      const std::size_t src = (static_cast<std::size_t>(y) * fb.width_px + x) * 3;
      const std::size_t dst = (static_cast<std::size_t>(y) * fb.width_px + (fb.width_px - 1 - x)) * 3;
      out[dst] = fb.pixels[src];
      out[dst + 1] = fb.pixels[src + 1];
      out[dst + 2] = fb.pixels[src + 2];
    }
  }
  return out;
}

inline bool frame_pacer(double target_fps, double now, double last_emit) noexcept {
  return now - last_emit >= 1.0 / target_fps;
}

/// Schedule-keeping wrapper around frame_pacer: the reference time advances
/// by whole periods so a tick rate that is not a multiple of the frame rate
/// still averages target_fps. Falls back to `now` after a stall.
class FramePacer {
 public:
  explicit FramePacer(double target_fps) : fps_(target_fps), period_(1.0 / target_fps) {}

  bool poll(double now) noexcept {
    // Tolerance absorbs summation error in accumulated periods.
    if (!frame_pacer(fps_, now + kSlack, last_emit_)) return false;
    if (now - last_emit_ >= 2.0 * period_) {
      last_emit_ = now;
    } else {
      last_emit_ += period_;
    }
    return true;
  }

  double last_emit() const noexcept { return last_emit_; }

 private:
  static constexpr double kSlack = 1e-9;
  double fps_;
  double period_;
  double last_emit_ = -std::numeric_limits<double>::infinity();
};

}  // namespace spyrover::video

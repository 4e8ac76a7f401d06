#pragma once

// Differential-drive kinematics over a 2D occupancy grid.
//
// World frame is right-handed: x east, y north, heading counter-clockwise
// from +x. The world-map text format lists rows north first.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spyrover/device.hpp"

namespace spyrover::kinematics {

struct KinematicsParams {
  double wheel_radius_m = 0.03;
  double track_width_m = 0.15;
  double max_wheel_speed_mps = 1.0;
  int stall_duty = 20;

  void validate() const {
    if (!(wheel_radius_m > 0) || !(track_width_m > 0) || !(max_wheel_speed_mps > 0)) {
      throw std::invalid_argument("kinematics parameters must be strictly positive");
    }
    if (stall_duty < 0 || stall_duty > 255) throw std::invalid_argument("stall_duty must lie in [0, 255]");
  }
};

struct Pose2D {
  double x_m = 0.0;
  double y_m = 0.0;
  double heading_rad = 0.0;

  friend constexpr bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) noexcept {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::remainder(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

/// Signed wheel surface speed for a motor channel's duty and direction.
inline double wheel_speed(std::uint8_t duty, device::Direction direction, const KinematicsParams& p) noexcept {
  if (direction == device::Direction::Brake || duty < p.stall_duty) return 0.0;
  const double mag = p.max_wheel_speed_mps * duty / 255.0;
  return direction == device::Direction::Forward ? mag : -mag;
}

/// Speed of the wheel a channel drives, after lead polarity.
inline double wheel_speed(const device::MotorChannel& ch, const KinematicsParams& p) noexcept {
  return wheel_speed(ch.duty, device::effective_direction(ch), p);
}

inline constexpr double kStraightOmegaThreshold = 1e-9;

/// Exact constant-speed arc. The chord form below is algebraically the
/// usual R(sin(th + w dt) - sin th) update but stays well conditioned as w -> 0.
inline Pose2D integrate_pose(const Pose2D& pose, double v_left, double v_right, double track, double dt) noexcept {
  const double v = 0.5 * (v_left + v_right);
  const double omega = (v_right - v_left) / track;
  Pose2D out = pose;
  if (std::abs(omega) < kStraightOmegaThreshold) {
    out.x_m += v * std::cos(pose.heading_rad) * dt;
    out.y_m += v * std::sin(pose.heading_rad) * dt;
    out.heading_rad = normalize_angle(pose.heading_rad);
    return out;
  }
  const double half = 0.5 * omega * dt;
  const double chord = v * dt * (std::sin(half) / half);
  const double mid = pose.heading_rad + half;
  out.x_m += chord * std::cos(mid);
  out.y_m += chord * std::sin(mid);
  out.heading_rad = normalize_angle(pose.heading_rad + omega * dt);
  return out;
}

enum class Cell : std::uint8_t { Free, Wall };

class WorldParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x_m = 0.0;
  double y_m = 0.0;
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

class WorldMap {
 public:
  WorldMap() = default;

  /// Builds an arena of the given size; the border is Wall, the rest Free.
  static WorldMap open_arena(int width_cells, int height_cells, double cell_size_m, Point2 base) {
    WorldMap m;
    m.width_ = width_cells;
    m.height_ = height_cells;
    m.cell_size_ = cell_size_m;
    m.base_ = base;
    m.cells_.assign(static_cast<std::size_t>(width_cells) * height_cells, Cell::Free);
    for (int i = 0; i < width_cells; ++i) {
      m.set(i, 0, Cell::Wall);
      m.set(i, height_cells - 1, Cell::Wall);
    }
    for (int j = 0; j < height_cells; ++j) {
      m.set(0, j, Cell::Wall);
      m.set(width_cells - 1, j, Cell::Wall);
    }
    m.validate();
    return m;
  }

  int width_cells() const noexcept { return width_; }
  int height_cells() const noexcept { return height_; }
  double cell_size_m() const noexcept { return cell_size_; }
  Point2 base_station() const noexcept { return base_; }
  double width_m() const noexcept { return width_ * cell_size_; }
  double height_m() const noexcept { return height_ * cell_size_; }

  bool in_grid(int i, int j) const noexcept { return i >= 0 && j >= 0 && i < width_ && j < height_; }

  /// Cells outside the grid read as Wall.
  Cell at(int i, int j) const noexcept {
    if (!in_grid(i, j)) return Cell::Wall;
    return cells_[static_cast<std::size_t>(j) * width_ + i];
  }

  void set(int i, int j, Cell c) {
    if (!in_grid(i, j)) throw std::out_of_range("cell outside world grid");
    cells_[static_cast<std::size_t>(j) * width_ + i] = c;
  }

  int cell_index_x(double x_m) const noexcept { return static_cast<int>(std::floor(x_m / cell_size_)); }
  int cell_index_y(double y_m) const noexcept { return static_cast<int>(std::floor(y_m / cell_size_)); }

  bool is_free(double x_m, double y_m) const noexcept {
    return at(cell_index_x(x_m), cell_index_y(y_m)) == Cell::Free;
  }

  /// Throws WorldParseError when the border is open or the base station
  /// is not on a free cell.
  void validate() const {
    if (width_ <= 0 || height_ <= 0) throw WorldParseError("world dimensions must be positive");
    if (!(cell_size_ > 0)) throw WorldParseError("cell size must be positive");
    for (int i = 0; i < width_; ++i) {
      if (at(i, 0) != Cell::Wall || at(i, height_ - 1) != Cell::Wall) throw WorldParseError("border must be wall");
    }
    for (int j = 0; j < height_; ++j) {
      if (at(0, j) != Cell::Wall || at(width_ - 1, j) != Cell::Wall) throw WorldParseError("border must be wall");
    }
    if (!is_free(base_.x_m, base_.y_m)) throw WorldParseError("base station must lie in a free cell");
  }

  /// FNV-1a over the text form; identifies a world in mission logs.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : to_text()) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  std::string to_text() const;
  static WorldMap parse(std::string_view text);
  static WorldMap load(const std::string& path);

  friend bool operator==(const WorldMap&, const WorldMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.25;
  Point2 base_;
  std::vector<Cell> cells_;
};

namespace detail {

inline std::string format_real(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

template <class T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw WorldParseError(std::string("bad ") + what + " in world header: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline std::string WorldMap::to_text() const {
  std::string out;
  out += std::to_string(width_) + ' ' + std::to_string(height_) + ' ' + detail::format_real(cell_size_) + ' ' +
         detail::format_real(base_.x_m) + ' ' + detail::format_real(base_.y_m) + '\n';
  for (int r = 0; r < height_; ++r) {
    const int j = height_ - 1 - r;
    for (int i = 0; i < width_; ++i) out.push_back(at(i, j) == Cell::Wall ? '#' : '.');
    out.push_back('\n');
  }
  return out;
}

/// Grammar: "W H CELL_M BX BY\n" then H rows of exactly W characters from
/// {'.', '#'}, each newline-terminated (the final newline may be omitted).
/// Fields are separated by single spaces.
inline WorldMap WorldMap::parse(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw WorldParseError("empty world file");

  std::vector<std::string_view> fields;
  {
    std::string_view h = lines[0];
    std::size_t s = 0;
    for (std::size_t i = 0; i <= h.size(); ++i) {
      if (i == h.size() || h[i] == ' ') {
        fields.push_back(h.substr(s, i - s));
        s = i + 1;
      }
    }
  }
  if (fields.size() != 5) throw WorldParseError("world header must be 'W H CELL_M BX BY'");

  WorldMap m;
  m.width_ = detail::parse_number<int>(fields[0], "width");
  m.height_ = detail::parse_number<int>(fields[1], "height");
  m.cell_size_ = detail::parse_number<double>(fields[2], "cell size");
  m.base_ = {detail::parse_number<double>(fields[3], "base x"), detail::parse_number<double>(fields[4], "base y")};
  if (m.width_ <= 0 || m.height_ <= 0) throw WorldParseError("world dimensions must be positive");
  if (!(m.cell_size_ > 0)) throw WorldParseError("cell size must be positive");
  if (lines.size() - 1 != static_cast<std::size_t>(m.height_)) {
    throw WorldParseError("expected " + std::to_string(m.height_) + " rows, found " +
                          std::to_string(lines.size() - 1));
  }
  m.cells_.assign(static_cast<std::size_t>(m.width_) * m.height_, Cell::Free);
  for (int r = 0; r < m.height_; ++r) {
    const std::string_view row = lines[1 + r];
    if (row.size() != static_cast<std::size_t>(m.width_)) {
      throw WorldParseError("row " + std::to_string(r) + " has " + std::to_string(row.size()) + " cells, expected " +
                            std::to_string(m.width_));
    }
    const int j = m.height_ - 1 - r;
    for (int i = 0; i < m.width_; ++i) {
      const char c = row[i];
      if (c == '#') {
        m.cells_[static_cast<std::size_t>(j) * m.width_ + i] = Cell::Wall;
      } else if (c != '.') {
        throw WorldParseError("invalid cell character at row " + std::to_string(r) + ", column " + std::to_string(i));
      }
    }
  }
  m.validate();
  return m;
}

inline WorldMap WorldMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WorldParseError("cannot open world file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

/// Sweeps the straight segment between the two positions at no more than
/// cell_size/4 spacing. On the first Wall sample the rover stops at the
/// previous free sample, keeping the proposed heading.
inline Pose2D move_with_collisions(const WorldMap& map, const Pose2D& pose, const Pose2D& proposed) {
  const double dx = proposed.x_m - pose.x_m;
  const double dy = proposed.y_m - pose.y_m;
  const double len = std::hypot(dx, dy);
  const double spacing = map.cell_size_m() / 4.0;
  const auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(len / spacing)));
  Pose2D last = pose;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    const double px = k == n ? proposed.x_m : pose.x_m + dx * t;
    const double py = k == n ? proposed.y_m : pose.y_m + dy * t;
    if (!map.is_free(px, py)) return {last.x_m, last.y_m, proposed.heading_rad};
    last.x_m = px;
    last.y_m = py;
  }
  return proposed;
}

inline double distance_to_base(const WorldMap& map, const Pose2D& pose) noexcept {
  const auto b = map.base_station();
  return std::hypot(pose.x_m - b.x_m, pose.y_m - b.y_m);
}

}  // namespace spyrover::kinematics

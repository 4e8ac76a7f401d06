#pragma once

// Mission log: one JSON object per line, ordered by (sim_time_s, counter).
// The first line is a Header carrying everything replay needs besides the
// world itself; CmdApplied records carry the tick and frame so the pose
// trajectory can be rebuilt exactly.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spyrover/physics.hpp"

namespace spyrover::mission {

using Json = nlohmann::ordered_json;

enum class RecordKind : std::uint8_t {
  CmdApplied,
  CmdDropped,
  Telemetry,
  FrameEmitted,
  Collision,
  BatteryOut,
  WatchdogStop,
};

constexpr std::string_view to_string(RecordKind k) noexcept {
  switch (k) {
    case RecordKind::CmdApplied: return "CmdApplied";
    case RecordKind::CmdDropped: return "CmdDropped";
    case RecordKind::Telemetry: return "Telemetry";
    case RecordKind::FrameEmitted: return "FrameEmitted";
    case RecordKind::Collision: return "Collision";
    case RecordKind::BatteryOut: return "BatteryOut";
    case RecordKind::WatchdogStop: return "WatchdogStop";
  }
  return "Unknown";
}

inline constexpr std::string_view kHeaderKind = "Header";

inline Json pose_json(const kinematics::Pose2D& p) {
  return Json{{"x_m", p.x_m}, {"y_m", p.y_m}, {"heading_rad", p.heading_rad}};
}

inline kinematics::Pose2D pose_from_json(const Json& j) {
  return {j.at("x_m").get<double>(), j.at("y_m").get<double>(), j.at("heading_rad").get<double>()};
}

inline Json command_json(const protocol::CommandFrame& f) {
  return Json{{"verb", protocol::verb_token(f.verb)}, {"arg", f.arg}, {"seq", f.seq}};
}

class MissionLog {
 public:
  /// In-memory log, optionally mirrored to a file (truncated on open).
  explicit MissionLog(std::optional<std::string> path = std::nullopt) {
    if (path) {
      file_.open(*path, std::ios::out | std::ios::trunc | std::ios::binary);
      if (!file_) {
        std::cerr << "mission log: cannot open " << *path << ", recording to file disabled\n";
      } else {
        path_ = *path;
      }
    }
  }

  void write_header(Json detail) {
    Json rec;
    rec["sim_time_s"] = 0.0;
    rec["counter"] = counter_++;
    rec["tick"] = 0;
    rec["kind"] = kHeaderKind;
    rec["detail"] = std::move(detail);
    emit(rec.dump());
  }

  void append(double sim_time_s, std::uint64_t tick, RecordKind kind, Json detail = Json::object()) {
    Json rec;
    rec["sim_time_s"] = sim_time_s;
    rec["counter"] = counter_++;
    rec["tick"] = tick;
    rec["kind"] = to_string(kind);
    rec["detail"] = std::move(detail);
    emit(rec.dump());
  }

  const std::vector<std::string>& lines() const noexcept { return lines_; }
  bool file_active() const noexcept { return file_.is_open(); }
  std::uint64_t next_counter() const noexcept { return counter_; }

  std::string joined() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

 private:
  void emit(std::string line) {
    if (file_.is_open()) {
      file_ << line << '\n';
      file_.flush();
      if (!file_) {
        std::cerr << "mission log: write to " << path_ << " failed, recording to file disabled\n";
        file_.close();
      }
    }
    lines_.push_back(std::move(line));
  }

  std::uint64_t counter_ = 0;
  std::vector<std::string> lines_;
  std::ofstream file_;
  std::string path_;
};

struct ReplayResult {
  kinematics::Pose2D final_pose;
  std::uint64_t ticks = 0;
  std::size_t commands_applied = 0;
  std::size_t telemetry_checked = 0;
  std::size_t telemetry_mismatches = 0;
  std::vector<kinematics::Pose2D> trajectory;  // pose after each tick
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rebuilds the pose trajectory from a mission log. Runs `ticks` steps, or
/// up to the last recorded tick when absent. Telemetry records' poses are
/// compared for exact equality along the way.
inline ReplayResult replay_mission(const std::vector<std::string>& lines, const kinematics::WorldMap& world,
                                   std::optional<std::uint64_t> ticks = std::nullopt) {
  if (lines.empty()) throw ReplayError("empty mission log");
  const Json header = Json::parse(lines.front());
  if (header.at("kind").get<std::string>() != kHeaderKind) throw ReplayError("first record is not a Header");
  const Json& h = header.at("detail");
  if (h.at("world").at("fingerprint").get<std::uint64_t>() != world.fingerprint()) {
    throw ReplayError("world does not match the recorded fingerprint");
  }

  kinematics::KinematicsParams params;
  const Json& k = h.at("kinematics");
  params.wheel_radius_m = k.at("wheel_radius_m").get<double>();
  params.track_width_m = k.at("track_width_m").get<double>();
  params.max_wheel_speed_mps = k.at("max_wheel_speed_mps").get<double>();
  params.stall_duty = k.at("stall_duty").get<int>();
  const double tick_hz = h.at("tick_hz").get<double>();
  const double dt = 1.0 / tick_hz;

  std::multimap<std::uint64_t, protocol::CommandFrame> commands;
  std::multimap<std::uint64_t, kinematics::Pose2D> checkpoints;
  std::uint64_t last_tick = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Json rec = Json::parse(lines[i]);
    const auto tick = rec.at("tick").get<std::uint64_t>();
    last_tick = std::max(last_tick, tick);
    const auto kind = rec.at("kind").get<std::string>();
    if (kind == to_string(RecordKind::CmdApplied)) {
      const Json& d = rec.at("detail");
      const auto verb = protocol::verb_from_token(d.at("verb").get<std::string>());
      if (!verb) throw ReplayError("unknown verb in CmdApplied record");
      commands.emplace(tick, protocol::CommandFrame{*verb, d.at("arg").get<std::int32_t>(),
                                                    d.at("seq").get<std::uint16_t>()});
    } else if (kind == to_string(RecordKind::Telemetry)) {
      checkpoints.emplace(tick, pose_from_json(rec.at("detail").at("pose")));
    }
  }

  const std::uint64_t n = ticks.value_or(lines.size() > 1 ? last_tick + 1 : 0);
  RoverPhysics physics(world, params, h.at("watchdog_timeout_s").get<double>());
  ReplayResult out;
  out.trajectory.reserve(n);
  for (std::uint64_t t = 0; t < n; ++t) {
    const double now = static_cast<double>(t) / tick_hz;
    auto [lo, hi] = commands.equal_range(t);
    for (auto it = lo; it != hi; ++it) {
      physics.apply(it->second, now);
      ++out.commands_applied;
    }
    physics.advance(dt);
    out.trajectory.push_back(physics.pose());
    auto [clo, chi] = checkpoints.equal_range(t);
    for (auto it = clo; it != chi; ++it) {
      ++out.telemetry_checked;
      if (!(it->second == physics.pose())) ++out.telemetry_mismatches;
    }
  }
  out.final_pose = physics.pose();
  out.ticks = n;
  return out;
}

}  // namespace spyrover::mission

#pragma once

// Gateway configuration and its key-value file form.
//
//   # comment
//   listen_address = 0.0.0.0:8080
//   world_file = data/worlds/arena.txt
//   link.d_full_m = 50
//   kinematics.track_width_m = 0.15
//   render.width_px = 320
//
// Keys mirror the GatewayConfig field names; nested profiles use a dotted
// prefix. Unknown keys are an error.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "spyrover/kinematics.hpp"
#include "spyrover/link.hpp"
#include "spyrover/video.hpp"

namespace spyrover {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HostPort {
  std::string host = "0.0.0.0";
  int port = 8080;
};

inline HostPort parse_host_port(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("listen_address must be host:port");
  HostPort hp;
  hp.host = std::string(s.substr(0, colon));
  const auto port = s.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), hp.port);
  if (ec != std::errc{} || ptr != port.data() + port.size() || hp.port < 0 || hp.port > 65535) {
    throw ConfigError("listen_address has an invalid port: " + std::string(s));
  }
  return hp;
}

struct GatewayConfig {
  std::string listen_address = "0.0.0.0:8080";
  std::string world_file = "data/worlds/arena.txt";
  link::LinkProfile link;
  kinematics::KinematicsParams kinematics;
  video::RenderSettings render;
  double watchdog_timeout_s = 0.5;
  double tick_hz = 50.0;
  double telemetry_hz = 10.0;
  std::optional<std::string> mission_log;
  bool debug_pose_in_telemetry = false;
  std::string network_name = "Electro";
  /// Empty means the open network: no token required.
  std::string auth_token;

  double tick_period_s() const noexcept { return 1.0 / tick_hz; }

  void validate() const {
    parse_host_port(listen_address);
    link.validate();
    kinematics.validate();
    render.validate();
    if (!(tick_hz > 0.0) || !(telemetry_hz > 0.0)) throw ConfigError("tick_hz and telemetry_hz must be positive");
    if (tick_hz < telemetry_hz) throw ConfigError("tick_hz must be >= telemetry_hz");
    if (1.0 / tick_hz > 0.1) throw ConfigError("tick_hz must be >= 10 (device step is at most 0.1 s)");
    if (!(watchdog_timeout_s > 2.0 / telemetry_hz)) throw ConfigError("watchdog_timeout_s must exceed 2/telemetry_hz");
  }
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

inline bool boolean(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

using Setter = std::function<void(GatewayConfig&, std::string_view key, std::string_view value)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto real = [](double GatewayConfig::*field) -> Setter {
      return [field](GatewayConfig& c, std::string_view k, std::string_view v) { c.*field = number<double>(k, v); };
    };
    t["listen_address"] = [](GatewayConfig& c, std::string_view, std::string_view v) { c.listen_address = v; };
    t["world_file"] = [](GatewayConfig& c, std::string_view, std::string_view v) { c.world_file = v; };
    t["watchdog_timeout_s"] = real(&GatewayConfig::watchdog_timeout_s);
    t["tick_hz"] = real(&GatewayConfig::tick_hz);
    t["telemetry_hz"] = real(&GatewayConfig::telemetry_hz);
    t["mission_log"] = [](GatewayConfig& c, std::string_view, std::string_view v) {
      if (v.empty()) {
        c.mission_log.reset();
      } else {
        c.mission_log = std::string(v);
      }
    };
    t["debug_pose_in_telemetry"] = [](GatewayConfig& c, std::string_view k, std::string_view v) {
      c.debug_pose_in_telemetry = boolean(k, v);
    };
    t["network_name"] = [](GatewayConfig& c, std::string_view, std::string_view v) { c.network_name = v; };
    t["auth_token"] = [](GatewayConfig& c, std::string_view, std::string_view v) { c.auth_token = v; };

    t["link.d_full_m"] = [](GatewayConfig& c, auto k, auto v) { c.link.d_full_m = number<double>(k, v); };
    t["link.d_max_m"] = [](GatewayConfig& c, auto k, auto v) { c.link.d_max_m = number<double>(k, v); };
    t["link.base_latency_s"] = [](GatewayConfig& c, auto k, auto v) { c.link.base_latency_s = number<double>(k, v); };
    t["link.jitter_s"] = [](GatewayConfig& c, auto k, auto v) { c.link.jitter_s = number<double>(k, v); };
    t["link.bandwidth_bytes_per_s"] = [](GatewayConfig& c, auto k, auto v) {
      c.link.bandwidth_bytes_per_s = number<double>(k, v);
    };
    t["link.rng_seed"] = [](GatewayConfig& c, auto k, auto v) { c.link.rng_seed = number<std::uint64_t>(k, v); };

    t["kinematics.wheel_radius_m"] = [](GatewayConfig& c, auto k, auto v) {
      c.kinematics.wheel_radius_m = number<double>(k, v);
    };
    t["kinematics.track_width_m"] = [](GatewayConfig& c, auto k, auto v) {
      c.kinematics.track_width_m = number<double>(k, v);
    };
    t["kinematics.max_wheel_speed_mps"] = [](GatewayConfig& c, auto k, auto v) {
      c.kinematics.max_wheel_speed_mps = number<double>(k, v);
    };
    t["kinematics.stall_duty"] = [](GatewayConfig& c, auto k, auto v) { c.kinematics.stall_duty = number<int>(k, v); };

    t["render.width_px"] = [](GatewayConfig& c, auto k, auto v) { c.render.width_px = number<int>(k, v); };
    t["render.height_px"] = [](GatewayConfig& c, auto k, auto v) { c.render.height_px = number<int>(k, v); };
    t["render.hfov_deg"] = [](GatewayConfig& c, auto k, auto v) { c.render.hfov_deg = number<double>(k, v); };
    t["render.wall_height_m"] = [](GatewayConfig& c, auto k, auto v) {
      c.render.wall_height_m = number<double>(k, v);
    };
    t["render.camera_height_m"] = [](GatewayConfig& c, auto k, auto v) {
      c.render.camera_height_m = number<double>(k, v);
    };
    t["render.max_ray_m"] = [](GatewayConfig& c, auto k, auto v) { c.render.max_ray_m = number<double>(k, v); };
    t["render.target_fps"] = [](GatewayConfig& c, auto k, auto v) { c.render.target_fps = number<double>(k, v); };
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Applies `key = value` lines on top of `base`. Does not validate.
inline GatewayConfig parse_config(std::string_view text, GatewayConfig base = {}) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view raw = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    const std::string_view line = config_detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = config_detail::trim(line.substr(0, eq));
    const auto value = config_detail::trim(line.substr(eq + 1));
    const auto& table = config_detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    it->second(base, key, value);
  }
  return base;
}

inline GatewayConfig load_config(const std::string& path, GatewayConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace spyrover

#pragma once

// Rover electronics: dual H-bridge motor shield, pan-tilt servo pair,
// battery pack and the shield's 8-LED status panel, advanced by a
// fixed-step tick.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "spyrover/protocol.hpp"

namespace spyrover::device {

enum class Direction : std::uint8_t { Forward, Reverse, Brake };
enum class Polarity : std::uint8_t { Normal, Swapped };

/// Logical Arduino pin ids used by the servo header.
enum class LogicalPin : std::uint8_t { D6 = 6, D7 = 7 };

constexpr std::string_view pin_name(LogicalPin p) noexcept { return p == LogicalPin::D6 ? "D6" : "D7"; }

inline constexpr double kMaxChannelCurrentA = 2.0;
inline constexpr double kAmpSecondsPerMah = 3.6;

struct MotorChannel {
  std::uint8_t duty = 0;
  Direction direction = Direction::Brake;
  Polarity polarity = Polarity::Normal;
  double current_amps = 0.0;

  friend constexpr bool operator==(const MotorChannel&, const MotorChannel&) = default;
};

/// Direction the wheel actually turns once the motor leads are accounted
/// for. A swapped pair reverses Forward/Reverse; Brake is unaffected.
constexpr Direction effective_direction(const MotorChannel& ch) noexcept {
  if (ch.polarity == Polarity::Normal || ch.direction == Direction::Brake) return ch.direction;
  return ch.direction == Direction::Forward ? Direction::Reverse : Direction::Forward;
}

constexpr Polarity flipped(Polarity p) noexcept {
  return p == Polarity::Normal ? Polarity::Swapped : Polarity::Normal;
}

struct PanTiltUnit {
  static constexpr LogicalPin pan_pin = LogicalPin::D7;
  static constexpr LogicalPin tilt_pin = LogicalPin::D6;
  static constexpr double kPanMinDeg = -90.0;
  static constexpr double kPanMaxDeg = 90.0;
  static constexpr double kTiltMinDeg = -30.0;
  static constexpr double kTiltMaxDeg = 60.0;

  double pan_deg = 0.0;
  double tilt_deg = 0.0;
  double pan_target_deg = 0.0;
  double tilt_target_deg = 0.0;
  double slew_rate_deg_per_s = 180.0;

  void set_pan_target(double deg) noexcept { pan_target_deg = std::clamp(deg, kPanMinDeg, kPanMaxDeg); }
  void set_tilt_target(double deg) noexcept { tilt_target_deg = std::clamp(deg, kTiltMinDeg, kTiltMaxDeg); }

  friend constexpr bool operator==(const PanTiltUnit&, const PanTiltUnit&) = default;
};

struct BatteryPack {
  double nominal_voltage_v = 7.4;
  double capacity_mah = 2200.0;
  double remaining_mah = 2200.0;
  double cutoff_v = 6.0;

  /// Linear sag from nominal (full) down to cutoff (empty).
  constexpr double voltage_v() const noexcept {
    return cutoff_v + (nominal_voltage_v - cutoff_v) * (remaining_mah / capacity_mah);
  }
  constexpr bool above_cutoff() const noexcept { return remaining_mah > 0.0; }
  int percent() const noexcept {
    return static_cast<int>(std::lround(std::clamp(100.0 * remaining_mah / capacity_mah, 0.0, 100.0)));
  }

  friend constexpr bool operator==(const BatteryPack&, const BatteryPack&) = default;
};

struct LedPanel {
  static constexpr std::size_t kIndicatorCount = 8;

  bool power = false;
  bool rst = false;
  bool speed_ch1 = false;
  bool speed_ch2 = false;
  bool dir_ch1_fwd = false;
  bool dir_ch1_rev = false;
  bool dir_ch2_fwd = false;
  bool dir_ch2_rev = false;

  /// Indicators in wire bit order (LSB first).
  constexpr std::array<bool, kIndicatorCount> indicators() const noexcept {
    return {power, rst, speed_ch1, speed_ch2, dir_ch1_fwd, dir_ch1_rev, dir_ch2_fwd, dir_ch2_rev};
  }

  constexpr std::uint8_t to_mask() const noexcept {
    std::uint8_t m = 0;
    const auto bits = indicators();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) m = static_cast<std::uint8_t>(m | (1u << i));
    }
    return m;
  }

  static constexpr LedPanel from_mask(std::uint8_t m) noexcept {
    auto bit = [m](int i) { return ((m >> i) & 1u) != 0; };
    return {bit(0), bit(1), bit(2), bit(3), bit(4), bit(5), bit(6), bit(7)};
  }

  friend constexpr bool operator==(const LedPanel&, const LedPanel&) = default;
};

static_assert(LedPanel{}.indicators().size() == 8);

inline constexpr std::array<std::string_view, LedPanel::kIndicatorCount> kLedNames = {
    "POWER", "RST", "SPEED1", "SPEED2", "DIR1_FWD", "DIR1_REV", "DIR2_FWD", "DIR2_REV"};

/// Static description of the simulated hardware as assembled.
struct DeviceDescriptor {
  std::string_view controller = "Arduino Uno";
  std::string_view motor_driver = "L298P";
  int motor_channels = 2;
  double max_channel_current_a = kMaxChannelCurrentA;
  LogicalPin pan_servo_pin = PanTiltUnit::pan_pin;
  LogicalPin tilt_servo_pin = PanTiltUnit::tilt_pin;
  std::size_t led_count = LedPanel::kIndicatorCount;
  std::array<std::string_view, LedPanel::kIndicatorCount> led_names = kLedNames;
};

inline constexpr DeviceDescriptor kDeviceDescriptor{};

struct RoverDeviceState {
  MotorChannel left;
  MotorChannel right;
  PanTiltUnit pantilt;
  BatteryPack battery;
  LedPanel leds;
  double last_command_at = 0.0;
  std::uint64_t tick_count = 0;

  std::uint8_t speed_setting = 255;
  double clock_s = 0.0;
  double watchdog_timeout_s = 0.5;

  friend constexpr bool operator==(const RoverDeviceState&, const RoverDeviceState&) = default;
};

/// LED panel as a pure function of the rest of the state.
constexpr LedPanel compute_leds(const RoverDeviceState& s) noexcept {
  const bool live = s.battery.above_cutoff();
  LedPanel p;
  p.power = live;
  // RST is lit for exactly the first tick after reset.
  p.rst = s.tick_count == 1;
  p.speed_ch1 = live && s.left.duty > 0;
  p.speed_ch2 = live && s.right.duty > 0;
  p.dir_ch1_fwd = s.left.direction == Direction::Forward;
  p.dir_ch1_rev = s.left.direction == Direction::Reverse;
  p.dir_ch2_fwd = s.right.direction == Direction::Forward;
  p.dir_ch2_rev = s.right.direction == Direction::Reverse;
  return p;
}

/// Freshly reset device.
inline RoverDeviceState make_device(double watchdog_timeout_s = 0.5) {
  RoverDeviceState s;
  s.watchdog_timeout_s = watchdog_timeout_s;
  s.leds = compute_leds(s);
  return s;
}

enum class ApplyStatus : std::uint8_t { Applied, BatteryDepleted };

struct ApplyResult {
  RoverDeviceState state;
  ApplyStatus status = ApplyStatus::Applied;
};

namespace detail {
inline void brake(MotorChannel& ch) noexcept {
  ch.direction = Direction::Brake;
  ch.duty = 0;
  ch.current_amps = 0.0;
}

inline void drive(MotorChannel& ch, Direction d, std::uint8_t duty) noexcept {
  ch.direction = d;
  ch.duty = duty;
}

inline double slew(double current, double target, double max_step) noexcept {
  const double diff = target - current;
  if (std::abs(diff) <= max_step) return target;
  return current + (diff > 0 ? max_step : -max_step);
}

constexpr bool moving(const RoverDeviceState& s) noexcept {
  return s.left.direction != Direction::Brake || s.right.direction != Direction::Brake;
}
}  // namespace detail

/// The clock is a running sum of tick lengths, so exact multiples of the
/// timeout carry rounding noise; 1 ns of slack keeps "0.50 s idle" unexpired.
constexpr bool watchdog_expired(const RoverDeviceState& s) noexcept {
  return s.clock_s - s.last_command_at > s.watchdog_timeout_s + 1e-9;
}

/// Applies one decoded operator command. Out-of-range angles are clamped,
/// never rejected. With a depleted battery the command is accepted (the
/// watchdog is fed) but no output changes.
inline ApplyResult apply_command(const RoverDeviceState& state, const protocol::CommandFrame& cmd, double now) {
  using protocol::MoveDir;
  using protocol::Verb;
  assert(now >= state.last_command_at);

  ApplyResult r{state, ApplyStatus::Applied};
  RoverDeviceState& s = r.state;
  s.last_command_at = now;

  if (!s.battery.above_cutoff()) {
    r.status = ApplyStatus::BatteryDepleted;
    return r;
  }

  switch (cmd.verb) {
    case Verb::Move: {
      const auto duty = s.speed_setting;
      switch (static_cast<MoveDir>(cmd.arg)) {
        case MoveDir::Forward:
          detail::drive(s.left, Direction::Forward, duty);
          detail::drive(s.right, Direction::Forward, duty);
          break;
        case MoveDir::Backward:
          detail::drive(s.left, Direction::Reverse, duty);
          detail::drive(s.right, Direction::Reverse, duty);
          break;
        case MoveDir::Left:
          detail::drive(s.left, Direction::Reverse, duty);
          detail::drive(s.right, Direction::Forward, duty);
          break;
        case MoveDir::Right:
          detail::drive(s.left, Direction::Forward, duty);
          detail::drive(s.right, Direction::Reverse, duty);
          break;
      }
      break;
    }
    case Verb::Speed: {
      s.speed_setting = static_cast<std::uint8_t>(std::clamp(cmd.arg, 0, 255));
      for (MotorChannel* ch : {&s.left, &s.right}) {
        if (ch->direction != Direction::Brake) ch->duty = s.speed_setting;
      }
      break;
    }
    case Verb::Pan: s.pantilt.set_pan_target(cmd.arg); break;
    case Verb::Tilt: s.pantilt.set_tilt_target(cmd.arg); break;
    case Verb::Stop:
      detail::brake(s.left);
      detail::brake(s.right);
      break;
    case Verb::Ping: break;
  }
  s.leds = compute_leds(s);
  return r;
}

inline double channel_current(const MotorChannel& ch) noexcept {
  if (ch.direction == Direction::Brake) return 0.0;
  return std::min(kMaxChannelCurrentA, kMaxChannelCurrentA * ch.duty / 255.0);
}

/// Advances the device by dt seconds (0 < dt <= 0.1).
inline RoverDeviceState tick_device(const RoverDeviceState& state, double dt) {
  assert(dt > 0.0 && dt <= 0.1);
  RoverDeviceState s = state;
  s.clock_s += dt;

  if (watchdog_expired(s)) {
    detail::brake(s.left);
    detail::brake(s.right);
  }

  const bool live = s.battery.above_cutoff();
  if (live) {
    const double step = s.pantilt.slew_rate_deg_per_s * dt;
    s.pantilt.pan_deg = detail::slew(s.pantilt.pan_deg, s.pantilt.pan_target_deg, step);
    s.pantilt.tilt_deg = detail::slew(s.pantilt.tilt_deg, s.pantilt.tilt_target_deg, step);
  } else {
    detail::brake(s.left);
    detail::brake(s.right);
  }

  s.left.current_amps = channel_current(s.left);
  s.right.current_amps = channel_current(s.right);

  const double used_mah = (s.left.current_amps + s.right.current_amps) * dt / kAmpSecondsPerMah;
  s.battery.remaining_mah = std::max(0.0, s.battery.remaining_mah - used_mah);
  if (!s.battery.above_cutoff()) {
    detail::brake(s.left);
    detail::brake(s.right);
  }

  ++s.tick_count;
  s.leds = compute_leds(s);
  return s;
}

constexpr protocol::WireDirection to_wire(Direction d) noexcept {
  switch (d) {
    case Direction::Forward: return protocol::WireDirection::Forward;
    case Direction::Reverse: return protocol::WireDirection::Reverse;
    case Direction::Brake: return protocol::WireDirection::Brake;
  }
  return protocol::WireDirection::Brake;
}

constexpr char direction_letter(Direction d) noexcept { return protocol::direction_letter(to_wire(d)); }

}  // namespace spyrover::device

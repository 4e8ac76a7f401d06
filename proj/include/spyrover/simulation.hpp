#pragma once

// Deterministic fixed-step core of the gateway. Owns the rover, both link
// directions, the telemetry and frame pacers, and the mission log. Nothing
// here touches a clock or a socket: the same submissions at the same ticks
// give a byte-identical mission log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spyrover/config.hpp"
#include "spyrover/link.hpp"
#include "spyrover/mission.hpp"
#include "spyrover/physics.hpp"
#include "spyrover/protocol.hpp"
#include "spyrover/video.hpp"

namespace spyrover {

using FrameEncoder = std::function<std::vector<std::uint8_t>(const video::FrameBuffer&)>;

struct DeliveredFrame {
  std::uint64_t frame_seq = 0;
  double sim_time_s = 0.0;  // delivery time
  std::shared_ptr<const std::vector<std::uint8_t>> image;
};

struct StepOutput {
  std::vector<std::string> telemetry;  // encoded lines delivered this tick
  std::vector<DeliveredFrame> frames;
  std::vector<protocol::CommandFrame> applied;
};

/// Camera state needed to render outside the tick thread.
struct RenderView {
  kinematics::Pose2D pose;
  double pan_deg = 0.0;
  double tilt_deg = 0.0;
  std::uint64_t frame_seq = 0;
  double sim_time_s = 0.0;
};

class Simulation {
 public:
  Simulation(GatewayConfig config, std::shared_ptr<const kinematics::WorldMap> world, FrameEncoder encoder)
      : config_(validated(std::move(config))),
        world_(std::move(world)),
        encoder_(std::move(encoder)),
        physics_(*world_, config_.kinematics, config_.watchdog_timeout_s),
        uplink_(config_.link, link::mix_seed(config_.link.rng_seed)),
        downlink_(config_.link, link::mix_seed(config_.link.rng_seed ^ 0xD0D0D0D0D0D0D0D0ull)),
        telemetry_pacer_(config_.telemetry_hz),
        frame_pacer_(config_.render.target_fps),
        log_(config_.mission_log) {
    log_.write_header(header_json());
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Queues a frame for the uplink. It is put on the air at the first tick
  /// whose time is >= at_s (or the next tick when absent or in the past).
  void submit(const protocol::CommandFrame& frame, std::optional<double> at_s = std::nullopt) {
    std::uint64_t tick = tick_;
    if (at_s) {
      const double want = std::ceil(*at_s * config_.tick_hz - 1e-9);
      if (want > static_cast<double>(tick)) tick = static_cast<std::uint64_t>(want);
    }
    pending_.emplace(tick, frame);
    ++submitted_;
  }

  StepOutput step() {
    StepOutput out;
    const std::uint64_t k = tick_;
    const double t = time_of(k);
    const double t1 = time_of(k + 1);
    const double dist = physics_.distance_to_base();

    // Uplink: frames due this tick go on the air.
    for (auto it = pending_.begin(); it != pending_.end() && it->first <= k;) {
      const auto& frame = it->second;
      const auto wire = protocol::encode_command(frame);
      const auto sent = uplink_.send(wire.size(), dist);
      if (sent.is_dropped()) {
        auto d = mission::command_json(frame);
        d["distance_m"] = dist;
        log_.append(t, k, mission::RecordKind::CmdDropped, std::move(d));
      } else {
        // One ordered stream: a frame never overtakes the one sent before it.
        up_last_arrival_ = std::max(up_last_arrival_, t + sent.delay_s());
        up_air_.push_back({up_last_arrival_, t, order_++, frame});
      }
      it = pending_.erase(it);
    }

    // Deliveries reaching the rover by now, in arrival order.
    for (const auto& f : take_arrived(up_air_, t)) {
      const auto status = physics_.apply(f.frame, t);
      last_applied_seq_ = f.frame.seq;
      auto d = mission::command_json(f.frame);
      d["latency_s"] = t - f.sent_at;
      d["status"] = status == device::ApplyStatus::Applied ? "ok" : "battery_depleted";
      log_.append(t, k, mission::RecordKind::CmdApplied, std::move(d));
      out.applied.push_back(f.frame);
    }

    const auto ev = physics_.advance(config_.tick_period_s());
    const double dist1 = physics_.distance_to_base();
    if (ev.watchdog_stop) {
      const auto& dev = physics_.device();
      log_.append(t1, k, mission::RecordKind::WatchdogStop,
                  mission::Json{{"idle_s", dev.clock_s - dev.last_command_at}, {"distance_m", dist1},
                                {"pose", mission::pose_json(physics_.pose())}});
    }
    if (ev.battery_out) log_.append(t1, k, mission::RecordKind::BatteryOut, mission::Json::object());
    if (ev.collision) {
      log_.append(t1, k, mission::RecordKind::Collision, mission::Json{{"pose", mission::pose_json(physics_.pose())}});
    }

    if (telemetry_pacer_.poll(t1)) {
      const auto tel = telemetry();
      auto line = protocol::encode_telemetry(tel);
      const auto sent = downlink_.send(line.size(), dist1);
      mission::Json d{{"seq", tel.seq},
                      {"delivered", sent.is_delivered()},
                      {"battery_pct", tel.battery_pct},
                      {"duty", tel.duty},
                      {"leds", tel.leds},
                      {"rssi_dbm", tel.link_rssi_dbm},
                      {"distance_m", dist1},
                      {"pose", mission::pose_json(physics_.pose())}};
      log_.append(t1, k, mission::RecordKind::Telemetry, std::move(d));
      if (sent.is_delivered()) {
        down_last_arrival_ = std::max(down_last_arrival_, t1 + sent.delay_s());
        down_air_.push_back({down_last_arrival_, order_++, std::move(line), {}});
      }
    }

    if (frame_pacer_.poll(t1)) {
      const std::uint64_t seq = ++frames_emitted_;
      const auto& pt = physics_.device().pantilt;
      const auto fb = video::render_frame(*world_, physics_.pose(), pt.pan_deg, pt.tilt_deg, config_.render, seq, t1);
      auto image = std::make_shared<const std::vector<std::uint8_t>>(encoder_(fb));
      const auto sent = downlink_.send(std::max<std::size_t>(1, image->size()), dist1);
      log_.append(t1, k, mission::RecordKind::FrameEmitted,
                  mission::Json{{"frame_seq", seq}, {"bytes", image->size()}, {"delivered", sent.is_delivered()}});
      if (sent.is_delivered()) {
        down_last_arrival_ = std::max(down_last_arrival_, t1 + sent.delay_s());
        down_air_.push_back({down_last_arrival_, order_++, {}, DeliveredFrame{seq, 0.0, std::move(image)}});
      }
    }

    for (auto& d : take_arrived(down_air_, t1)) {
      if (d.frame.image) {
        d.frame.sim_time_s = t1;
        out.frames.push_back(std::move(d.frame));
      } else {
        out.telemetry.push_back(std::move(d.line));
      }
    }

    ++tick_;
    return out;
  }

  /// Steps until now() >= t_s; returns the number of ticks run.
  std::uint64_t run_until(double t_s) {
    std::uint64_t n = 0;
    while (now() < t_s - 1e-12) {
      step();
      ++n;
    }
    return n;
  }

  protocol::TelemetryFrame telemetry() const {
    const auto& dev = physics_.device();
    protocol::TelemetryFrame t;
    t.seq = last_applied_seq_;
    t.battery_pct = dev.battery.percent();
    t.duty = dev.left.duty;
    t.dir_left = device::to_wire(dev.left.direction);
    t.dir_right = device::to_wire(dev.right.direction);
    t.pan_deg = static_cast<std::int32_t>(std::lround(dev.pantilt.pan_deg));
    t.tilt_deg = static_cast<std::int32_t>(std::lround(dev.pantilt.tilt_deg));
    t.leds = dev.leds.to_mask();
    t.link_rssi_dbm = static_cast<std::int32_t>(std::lround(link::rssi(physics_.distance_to_base(), config_.link)));
    if (config_.debug_pose_in_telemetry) {
      const auto& p = physics_.pose();
      using protocol::telemetry_limits::kPosMaxCm;
      auto cm = [](double m) {
        return static_cast<std::int32_t>(std::clamp<long>(std::lround(m * 100.0), -kPosMaxCm, kPosMaxCm));
      };
      t.pose = protocol::TelemetryPose{cm(p.x_m), cm(p.y_m),
                                       static_cast<std::int32_t>(std::lround(p.heading_rad * 18000.0 / std::numbers::pi))};
    }
    return t;
  }

  RenderView render_view() const {
    const auto& pt = physics_.device().pantilt;
    return {physics_.pose(), pt.pan_deg, pt.tilt_deg, frames_emitted_, now()};
  }

  mission::Json status_json() const {
    auto stats = [](const link::LinkStats& s) {
      return mission::Json{{"sent", s.sent},
                           {"delivered", s.delivered},
                           {"dropped", s.dropped},
                           {"mean_delay_s", s.mean_delay_s},
                           {"last_rssi_dbm", s.last_rssi_dbm}};
    };
    const auto& dev = physics_.device();
    mission::Json j{{"network_name", config_.network_name},
                    {"open_network", config_.auth_token.empty()},
                    {"sim_time_s", now()},
                    {"tick", tick_},
                    {"battery_pct", dev.battery.percent()},
                    {"battery_v", dev.battery.voltage_v()},
                    {"last_applied_seq", last_applied_seq_},
                    {"leds", dev.leds.to_mask()},
                    {"rssi_dbm", link::rssi(physics_.distance_to_base(), config_.link)},
                    {"frames_emitted", frames_emitted_},
                    {"mission_records", log_.lines().size()},
                    {"uplink", stats(uplink_.stats())},
                    {"downlink", stats(downlink_.stats())}};
    if (config_.debug_pose_in_telemetry) {
      j["pose"] = mission::pose_json(physics_.pose());
      j["distance_m"] = physics_.distance_to_base();
    }
    return j;
  }

  /// Moves the rover without driving it there (test fixtures, debugging).
  /// Not recorded in the mission log, so replays of such runs diverge.
  void place_rover(const kinematics::Pose2D& pose) { physics_.set_pose(pose); }

  double now() const noexcept { return time_of(tick_); }
  std::uint64_t tick() const noexcept { return tick_; }
  const GatewayConfig& config() const noexcept { return config_; }
  const kinematics::WorldMap& world() const noexcept { return *world_; }
  const RoverPhysics& physics() const noexcept { return physics_; }
  const mission::MissionLog& log() const noexcept { return log_; }
  const link::LinkStats& uplink_stats() const noexcept { return uplink_.stats(); }
  const link::LinkStats& downlink_stats() const noexcept { return downlink_.stats(); }
  std::uint16_t last_applied_seq() const noexcept { return last_applied_seq_; }
  std::size_t pending() const noexcept { return pending_.size() + up_air_.size(); }
  std::uint64_t submitted() const noexcept { return submitted_; }

 private:
  struct UpAir {
    double arrival;
    double sent_at;
    std::uint64_t order;
    protocol::CommandFrame frame;
  };
  struct DownAir {
    double arrival;
    std::uint64_t order;
    std::string line;
    DeliveredFrame frame;
  };

  static GatewayConfig validated(GatewayConfig c) {
    c.validate();
    return c;
  }

  double time_of(std::uint64_t tick) const noexcept { return static_cast<double>(tick) / config_.tick_hz; }

  template <class T>
  static std::vector<T> take_arrived(std::vector<T>& air, double now) {
    std::vector<T> due;
    auto split = std::stable_partition(air.begin(), air.end(), [now](const T& a) { return a.arrival > now + 1e-12; });
    std::move(split, air.end(), std::back_inserter(due));
    air.erase(split, air.end());
    std::sort(due.begin(), due.end(), [](const T& a, const T& b) {
      return a.arrival != b.arrival ? a.arrival < b.arrival : a.order < b.order;
    });
    return due;
  }

  mission::Json header_json() const {
    const auto& k = config_.kinematics;
    const auto& l = config_.link;
    const auto& r = config_.render;
    const auto base = world_->base_station();
    return mission::Json{
        {"network_name", config_.network_name},
        {"open_network", config_.auth_token.empty()},
        {"tick_hz", config_.tick_hz},
        {"telemetry_hz", config_.telemetry_hz},
        {"watchdog_timeout_s", config_.watchdog_timeout_s},
        {"world",
         {{"width_cells", world_->width_cells()},
          {"height_cells", world_->height_cells()},
          {"cell_size_m", world_->cell_size_m()},
          {"base_station", {base.x_m, base.y_m}},
          {"fingerprint", world_->fingerprint()}}},
        {"kinematics",
         {{"wheel_radius_m", k.wheel_radius_m},
          {"track_width_m", k.track_width_m},
          {"max_wheel_speed_mps", k.max_wheel_speed_mps},
          {"stall_duty", k.stall_duty}}},
        {"link",
         {{"d_full_m", l.d_full_m},
          {"d_max_m", l.d_max_m},
          {"base_latency_s", l.base_latency_s},
          {"jitter_s", l.jitter_s},
          {"bandwidth_bytes_per_s", l.bandwidth_bytes_per_s},
          {"rng_seed", l.rng_seed}}},
        {"render",
         {{"width_px", r.width_px},
          {"height_px", r.height_px},
          {"hfov_deg", r.hfov_deg},
          {"target_fps", r.target_fps}}}};
  }

  GatewayConfig config_;
  std::shared_ptr<const kinematics::WorldMap> world_;
  FrameEncoder encoder_;
  RoverPhysics physics_;
  link::LinkChannel uplink_;
  link::LinkChannel downlink_;
  video::FramePacer telemetry_pacer_;
  video::FramePacer frame_pacer_;
  mission::MissionLog log_;

  std::multimap<std::uint64_t, protocol::CommandFrame> pending_;
  std::vector<UpAir> up_air_;
  std::vector<DownAir> down_air_;
  std::uint64_t tick_ = 0;
  std::uint64_t order_ = 0;
  std::uint64_t frames_emitted_ = 0;
  std::uint64_t submitted_ = 0;
  double up_last_arrival_ = 0.0;
  double down_last_arrival_ = 0.0;
  std::uint16_t last_applied_seq_ = 0;
};

}  // namespace spyrover

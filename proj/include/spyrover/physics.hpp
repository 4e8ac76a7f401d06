#pragma once

// Device model + drive train + world, stepped together. Shared by the live
// simulation and mission replay so both run identical arithmetic.

#include "spyrover/device.hpp"
#include "spyrover/kinematics.hpp"

namespace spyrover {

struct PhysicsEvents {
  bool watchdog_stop = false;
  bool battery_out = false;
  bool collision = false;  // first tick of a contact episode
};

class RoverPhysics {
 public:
  RoverPhysics(const kinematics::WorldMap& world, kinematics::KinematicsParams params, double watchdog_timeout_s)
      : world_(&world), params_(params), device_(device::make_device(watchdog_timeout_s)) {
    const auto base = world.base_station();
    pose_ = {base.x_m, base.y_m, 0.0};
  }

  device::ApplyStatus apply(const protocol::CommandFrame& cmd, double now) {
    auto r = device::apply_command(device_, cmd, now);
    device_ = r.state;
    return r.status;
  }

  PhysicsEvents advance(double dt) {
    PhysicsEvents ev;
    const bool was_moving = device::detail::moving(device_);
    const bool had_charge = device_.battery.above_cutoff();

    device_ = device::tick_device(device_, dt);

    if (was_moving && !device::detail::moving(device_) && device::watchdog_expired(device_)) ev.watchdog_stop = true;
    if (had_charge && !device_.battery.above_cutoff()) ev.battery_out = true;

    const double vl = kinematics::wheel_speed(device_.left, params_);
    const double vr = kinematics::wheel_speed(device_.right, params_);
    const auto proposed = kinematics::integrate_pose(pose_, vl, vr, params_.track_width_m, dt);
    const auto moved = kinematics::move_with_collisions(*world_, pose_, proposed);
    const bool blocked = !(moved == proposed);
    ev.collision = blocked && !in_contact_;
    in_contact_ = blocked;
    pose_ = moved;
    return ev;
  }

  const device::RoverDeviceState& device() const noexcept { return device_; }
  device::RoverDeviceState& mutable_device() noexcept { return device_; }
  const kinematics::Pose2D& pose() const noexcept { return pose_; }
  void set_pose(const kinematics::Pose2D& p) noexcept { pose_ = p; }
  const kinematics::WorldMap& world() const noexcept { return *world_; }
  const kinematics::KinematicsParams& params() const noexcept { return params_; }
  double distance_to_base() const noexcept { return kinematics::distance_to_base(*world_, pose_); }

 private:
  const kinematics::WorldMap* world_;
  kinematics::KinematicsParams params_;
  device::RoverDeviceState device_;
  kinematics::Pose2D pose_;
  bool in_contact_ = false;
};

}  // namespace spyrover

#pragma once

// Distance-parameterised Wi-Fi channel: Bernoulli loss on a quadratic ramp
// between the loss-free radius and the hard cutoff, plus latency, uniform
// jitter and serialisation delay at a fixed byte rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace spyrover::link {

struct LinkProfile {
  double d_full_m = 50.0;
  double d_max_m = 100.0;
  double base_latency_s = 0.020;
  double jitter_s = 0.010;
  double bandwidth_bytes_per_s = 250000.0;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (!(d_full_m > 0.0) || !(d_full_m < d_max_m)) throw std::invalid_argument("link: require 0 < d_full_m < d_max_m");
    if (!(base_latency_s > 0.0) || !(jitter_s > 0.0) || !(bandwidth_bytes_per_s > 0.0)) {
      throw std::invalid_argument("link: latency, jitter and bandwidth must be positive");
    }
  }
};

inline double loss_probability(double d_m, const LinkProfile& p) noexcept {
  if (d_m <= p.d_full_m) return 0.0;
  if (d_m >= p.d_max_m) return 1.0;
  const double u = (d_m - p.d_full_m) / (p.d_max_m - p.d_full_m);
  return u * u;
}

/// Synthetic signal strength for display, -40 dBm at 1 m and closer.
inline double rssi(double d_m, const LinkProfile& /*p*/) noexcept {
  const double v = -40.0 - 25.0 * std::log10(std::max(d_m, 1.0));
  return std::clamp(v, -95.0, -40.0);
}

/// mt19937_64 with a fixed bits-to-double mapping so outcomes do not depend
/// on the standard library's distribution implementations.
class LinkRng {
 public:
  explicit LinkRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform01() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 step, used to derive independent per-direction seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class TransmitOutcome {
 public:
  static TransmitOutcome delivered(double delay_s) { return TransmitOutcome(delay_s); }
  static TransmitOutcome dropped() { return TransmitOutcome(std::nullopt); }

  bool is_delivered() const noexcept { return delay_.has_value(); }
  bool is_dropped() const noexcept { return !delay_; }
  double delay_s() const { return delay_.value(); }

  friend bool operator==(const TransmitOutcome&, const TransmitOutcome&) = default;

 private:
  explicit TransmitOutcome(std::optional<double> d) : delay_(d) {}
  std::optional<double> delay_;
};

/// One frame over the link. Always consumes one draw for the loss decision
/// and one more for jitter when the frame survives.
inline TransmitOutcome transmit(std::size_t payload_len, double d_m, const LinkProfile& p, LinkRng& rng) {
  if (payload_len == 0) throw std::invalid_argument("transmit: payload_len must be positive");
  const double loss = loss_probability(d_m, p);
  if (rng.uniform01() < loss) return TransmitOutcome::dropped();
  const double jitter = (2.0 * rng.uniform01() - 1.0) * p.jitter_s;
  return TransmitOutcome::delivered(p.base_latency_s + jitter +
                                    static_cast<double>(payload_len) / p.bandwidth_bytes_per_s);
}

struct LinkStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  double mean_delay_s = 0.0;
  double last_rssi_dbm = -40.0;
};

/// One direction of the link: profile, its own generator and counters.
class LinkChannel {
 public:
  LinkChannel(LinkProfile profile, std::uint64_t seed) : profile_(profile), rng_(seed) {}

  TransmitOutcome send(std::size_t payload_len, double d_m) {
    const auto out = transmit(payload_len, d_m, profile_, rng_);
    ++stats_.sent;
    stats_.last_rssi_dbm = rssi(d_m, profile_);
    if (out.is_delivered()) {
      ++stats_.delivered;
      stats_.mean_delay_s += (out.delay_s() - stats_.mean_delay_s) / static_cast<double>(stats_.delivered);
    } else {
      ++stats_.dropped;
    }
    return out;
  }

  const LinkStats& stats() const noexcept { return stats_; }
  const LinkProfile& profile() const noexcept { return profile_; }

 private:
  LinkProfile profile_;
  LinkRng rng_;
  LinkStats stats_;
};

}  // namespace spyrover::link

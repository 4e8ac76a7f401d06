#include <gtest/gtest.h>

#include <fstream>

#include "harness.hpp"
#include "spyrover/config.hpp"

using namespace spyrover;

TEST(Config, DefaultsAreValid) {
  GatewayConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.network_name, "Electro");
  EXPECT_TRUE(c.auth_token.empty());
  EXPECT_EQ(c.tick_hz, 50.0);
  EXPECT_EQ(c.watchdog_timeout_s, 0.5);
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  const auto c = parse_config(
      "# comment\n"
      "listen_address = 127.0.0.1:9000\n"
      "  link.rng_seed=42  \n"
      "link.jitter_s = 0.000001\r\n"
      "\n"
      "render.width_px = 160\n"
      "debug_pose_in_telemetry = true\n"
      "mission_log = out.jsonl\n"
      "auth_token = hunter2\n");
  EXPECT_EQ(parse_host_port(c.listen_address).port, 9000);
  EXPECT_EQ(parse_host_port(c.listen_address).host, "127.0.0.1");
  EXPECT_EQ(c.link.rng_seed, 42u);
  EXPECT_DOUBLE_EQ(c.link.jitter_s, 1e-6);
  EXPECT_EQ(c.render.width_px, 160);
  EXPECT_TRUE(c.debug_pose_in_telemetry);
  EXPECT_EQ(c.mission_log, "out.jsonl");
  EXPECT_EQ(c.auth_token, "hunter2");
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, LaterValuesOverrideEarlier) {
  const auto c = parse_config("tick_hz = 100\ntick_hz = 60\n");
  EXPECT_EQ(c.tick_hz, 60.0);
  EXPECT_FALSE(parse_config("mission_log = a\nmission_log =\n").mission_log);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("nonsense\n"), ConfigError);
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("tick_hz = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("render.width_px = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("debug_pose_in_telemetry = maybe\n"), ConfigError);
  EXPECT_THROW(parse_host_port("8080"), ConfigError);
  EXPECT_THROW(parse_host_port("host:99999"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/spyrover.conf"), ConfigError);
}

TEST(Config, ValidationCatchesInconsistentValues) {
  auto bad = [](const std::string& text) { return parse_config(text); };
  EXPECT_ANY_THROW(bad("tick_hz = 5\n").validate());
  EXPECT_ANY_THROW(bad("telemetry_hz = 100\n").validate());
  EXPECT_ANY_THROW(bad("watchdog_timeout_s = 0.1\n").validate());
  EXPECT_ANY_THROW(bad("link.d_full_m = 200\n").validate());
  EXPECT_ANY_THROW(bad("render.hfov_deg = 0\n").validate());
}

TEST(Config, BundledSamplesLoad) {
  for (const char* name : {"field.conf"}) {
    const auto c = load_config(harness::samples(name));
    EXPECT_NO_THROW(c.validate()) << name;
  }
}

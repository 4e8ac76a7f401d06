#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>

#include <json.hpp>

#include "harness.hpp"
#include "net.hpp"
#include "process.hpp"
#include "spyrover/protocol.hpp"

using namespace std::chrono_literals;
using spyrover::protocol::CommandFrame;

// Ten wall-clock minutes with one quiet operator on the raw socket.
TEST(Soak, SilentClientKeepsSessionForTenMinutes) {
  const auto conf = (testproc::temp_dir("soak") / "soak.conf").string();
  std::ofstream(conf) << "render.width_px = 32\nrender.height_px = 24\n";
  testproc::GatewayProcess gw({SPYROVER_GATEWAY_BIN, "--world", harness::worlds("arena.txt"), "--config", conf, "--port",
                               "0", "--debug-pose"});
  testnet::LineClient tcp(gw.tcp_port());
  ASSERT_TRUE(tcp.connected());
  ASSERT_TRUE(tcp.send(spyrover::protocol::encode_command(CommandFrame::move(spyrover::protocol::MoveDir::Forward, 1))));

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t lines = 0;
  std::optional<std::string> last;
  while (std::chrono::steady_clock::now() - t0 < 600s) {
    if (auto l = tcp.read_line(1000)) {
      ++lines;
      last = l;
    }
  }
  // 10 Hz telemetry for 600 s.
  EXPECT_NEAR(static_cast<double>(lines), 6000.0, 60.0);
  ASSERT_TRUE(last);
  const auto t = spyrover::protocol::decode_telemetry(*last);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->duty, 0);
  EXPECT_EQ(t->seq, 1);

  // The same session still carries commands.
  ASSERT_TRUE(tcp.send(spyrover::protocol::encode_command(CommandFrame::ping(2))));
  bool echoed = false;
  for (int i = 0; i < 30 && !echoed; ++i) {
    if (auto l = tcp.read_line(200)) {
      const auto e = spyrover::protocol::decode_telemetry(*l);
      echoed = e && e->seq == 2;
    }
  }
  EXPECT_TRUE(echoed);

  httplib::Client http("127.0.0.1", gw.http_port());
  const auto res = http.Get("/mission");
  ASSERT_TRUE(res);
  std::size_t watchdog = 0, applied = 0;
  std::istringstream in(res->body);
  for (std::string line; std::getline(in, line);) {
    const auto r = nlohmann::json::parse(line);
    watchdog += r["kind"] == "WatchdogStop";
    applied += r["kind"] == "CmdApplied";
  }
  EXPECT_EQ(watchdog, 1u);
  EXPECT_EQ(applied, 2u);
}

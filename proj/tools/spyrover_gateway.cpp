// spyrover-gateway: hosts the simulated rover.
//
//   spyrover-gateway --world data/worlds/arena.txt --port 8080
//   spyrover-gateway --config samples/gateway.conf --fast --port 0
//
// Prints one banner line once both listeners are bound:
//   spyrover-gateway network=Electro http=8080 tcp=8081 mode=realtime

#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "spyrover/gateway.hpp"

namespace {

std::atomic<bool> g_signalled{false};

void on_signal(int) { g_signalled = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated Wi-Fi spy rover gateway"};
  std::string config_path;
  std::string world_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> port;
  std::optional<double> duration;
  std::optional<std::string> mission_log;
  bool fast = false;
  bool debug_pose = false;
  app.add_option("--config", config_path, "Gateway config file (key = value lines)");
  app.add_option("--world", world_path, "World file; overrides world_file");
  app.add_option("--seed", seed, "Link RNG seed; overrides link.rng_seed");
  app.add_option("--port", port, "HTTP port (0 = ephemeral); raw TCP listens on port+1")->check(CLI::Range(0, 65534));
  app.add_flag("--fast", fast, "Headless lockstep: the clock moves only on POST /advance");
  app.add_option("--duration", duration, "Exit when simulation time reaches this many seconds");
  app.add_option("--mission-log", mission_log, "Mission log path; overrides mission_log");
  app.add_flag("--debug-pose", debug_pose, "Include pose in telemetry and status");
  CLI11_PARSE(app, argc, argv);

  using namespace spyrover;
  GatewayConfig config;
  std::shared_ptr<const kinematics::WorldMap> world;
  try {
    if (!config_path.empty()) {
      config = load_config(config_path);
      // Relative paths inside a config file are relative to that file.
      const auto dir = std::filesystem::path(config_path).parent_path();
      if (std::filesystem::path(config.world_file).is_relative()) config.world_file = (dir / config.world_file).string();
      if (config.mission_log && std::filesystem::path(*config.mission_log).is_relative()) {
        config.mission_log = (dir / *config.mission_log).string();
      }
    }
    if (!world_path.empty()) config.world_file = world_path;
    if (seed) config.link.rng_seed = *seed;
    if (mission_log) config.mission_log = *mission_log;
    if (debug_pose) config.debug_pose_in_telemetry = true;
    if (port) {
      auto hp = parse_host_port(config.listen_address);
      config.listen_address = hp.host + ":" + std::to_string(*port);
    }
    config.validate();
    world = std::make_shared<const kinematics::WorldMap>(kinematics::WorldMap::load(config.world_file));
  } catch (const std::exception& e) {
    std::cerr << "spyrover-gateway: " << e.what() << "\n";
    return 2;
  }

  gateway::GatewayOptions options;
  options.fast = fast;
  options.duration_s = duration;
  std::unique_ptr<gateway::Gateway> gw;
  try {
    gw = std::make_unique<gateway::Gateway>(config, world, options);
    gw->start();
  } catch (const std::exception& e) {
    std::cerr << "spyrover-gateway: " << e.what() << "\n";
    return 3;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "spyrover-gateway network=" << config.network_name << " http=" << gw->http_port()
            << " tcp=" << gw->tcp_port() << " mode=" << (fast ? "fast" : "realtime") << std::endl;

  std::thread waiter([&] { gw->wait(); });
  while (!g_signalled) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (gw->finished()) break;
  }
  gw->stop();
  waiter.join();
  return 0;
}

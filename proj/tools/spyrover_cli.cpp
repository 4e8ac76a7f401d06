// spyrover: headless operator client.
//
//   spyrover send "SPD 128"
//   spyrover drive --script samples/square.script --fast
//   spyrover stats
//   spyrover snapshot --out view.jpg
//
// Output is one record per line, `name key=value ...`, stable across runs.
// Exit codes:
//   0 ok
//   1 invalid command text (nothing sent)
//   2 gateway unreachable
//   3 no telemetry echo within 2 s while the gateway is alive (link drop)
//   4 no telemetry echo and the gateway stopped answering
//   5 drive: a step was not delivered
//   6 gateway rejected a line (E reply) or returned an HTTP error

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "spyrover/jpeg.hpp"
#include "spyrover/protocol.hpp"
#include "spyrover/script.hpp"

namespace {

using Json = nlohmann::ordered_json;
using namespace spyrover;

enum Exit : int {
  kOk = 0,
  kBadCommand = 1,
  kUnreachable = 2,
  kLinkTimeout = 3,
  kGatewayTimeout = 4,
  kStepFailed = 5,
  kRejected = 6,
};

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<int> tcp_port;
  std::string token;

  int tcp() const { return tcp_port.value_or(port + 1); }
};

int g_last_http_status = 0;  // 0 when no response arrived

class Http {
 public:
  explicit Http(const Endpoint& ep) : client_(ep.host, ep.port) {
    client_.set_connection_timeout(2, 0);
    client_.set_read_timeout(120, 0);
    if (!ep.token.empty()) client_.set_default_headers({{"X-Auth-Token", ep.token}});
  }

  std::optional<std::string> get(const std::string& path) {
    auto res = client_.Get(path);
    g_last_http_status = res ? res->status : 0;
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
  }

  std::optional<std::string> post(const std::string& path, const std::string& body = {}) {
    auto res = client_.Post(path, body, "text/plain");
    g_last_http_status = res ? res->status : 0;
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
  }

  std::optional<Json> status() {
    auto body = get("/status");
    if (!body) return std::nullopt;
    try {
      return Json::parse(*body);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

 private:
  httplib::Client client_;
};

/// Raw TCP line connection to the gateway's message port.
class LineSocket {
 public:
  ~LineSocket() {
    if (fd_ >= 0) ::close(fd_);
  }

  bool connect(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return false;
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
    ::freeaddrinfo(res);
    return ok;
  }

  bool send_line(const std::string& line) {
    std::string_view rest = line;
    while (!rest.empty()) {
      const auto n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
      if (n <= 0) return false;
      rest.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  /// Next full line (with '\n'), or nullopt after `timeout_ms` or on close.
  std::optional<std::string> read_line(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl + 1);
        buf_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
      char chunk[512];
      const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string format_telemetry(const protocol::TelemetryFrame& t) {
  char leds[8];
  std::snprintf(leds, sizeof(leds), "0x%02X", t.leds);
  std::string out = "telemetry seq=" + std::to_string(t.seq) + " battery_pct=" + std::to_string(t.battery_pct) +
                    " duty=" + std::to_string(t.duty) + " left=" + protocol::direction_letter(t.dir_left) +
                    " right=" + protocol::direction_letter(t.dir_right) + " pan_deg=" + std::to_string(t.pan_deg) +
                    " tilt_deg=" + std::to_string(t.tilt_deg) + " leds=" + leds +
                    " rssi_dbm=" + std::to_string(t.link_rssi_dbm);
  if (t.pose) {
    out += " x_cm=" + std::to_string(t.pose->x_cm) + " y_cm=" + std::to_string(t.pose->y_cm) +
           " heading_cdeg=" + std::to_string(t.pose->heading_cdeg);
  }
  return out;
}

void print_link(const Json& status) {
  for (const char* dir : {"uplink", "downlink"}) {
    if (!status.contains(dir)) continue;
    const auto& s = status[dir];
    std::cout << "link " << dir << " sent=" << s.value("sent", 0) << " delivered=" << s.value("delivered", 0)
              << " dropped=" << s.value("dropped", 0) << " mean_delay_s=" << fixed(s.value("mean_delay_s", 0.0), 6)
              << "\n";
  }
}

void print_pose(const Json& status) {
  if (!status.contains("pose")) return;
  const auto& p = status["pose"];
  std::cout << "final_pose x_m=" << fixed(p.value("x_m", 0.0), 4) << " y_m=" << fixed(p.value("y_m", 0.0), 4)
            << " heading_deg=" << fixed(p.value("heading_rad", 0.0) * 180.0 / std::numbers::pi, 3) << "\n";
}

int unreachable(const Endpoint& ep) {
  if (g_last_http_status == 401) {
    std::cerr << "error Unauthorized gateway=" << ep.host << ":" << ep.port << "\n";
    return kRejected;
  }
  if (g_last_http_status != 0) {
    std::cerr << "error Rejected http_status=" << g_last_http_status << "\n";
    return kRejected;
  }
  std::cerr << "error ConnectionRefused gateway=" << ep.host << ":" << ep.port << "\n";
  return kUnreachable;
}

int cmd_send(const Endpoint& ep, const std::string& text, bool fast) {
  const auto parsed = script::parse_command_text(text);
  if (!parsed) {
    std::cerr << "error " << protocol::to_string(parsed.error()) << " command=\"" << text << "\"\n";
    return kBadCommand;
  }
  Http http(ep);
  const auto st = http.status();
  if (!st) return unreachable(ep);
  const bool gateway_fast = st->value("mode", "") == "fast";
  fast = fast || gateway_fast;

  LineSocket sock;
  if (!sock.connect(ep.host, ep.tcp())) return unreachable(ep);
  if (!ep.token.empty()) sock.send_line("AUTH " + ep.token + "\n");

  auto frame = *parsed;
  frame.seq = static_cast<std::uint16_t>(st->value("last_applied_seq", 0) + 1);
  const auto wire = protocol::encode_command(frame);

  auto echo_of = [&](const std::string& line) -> std::optional<protocol::TelemetryFrame> {
    auto t = protocol::decode_telemetry(line);
    if (!t || !protocol::seq_at_or_after(t->seq, frame.seq)) return std::nullopt;
    return *t;
  };
  auto rejected = [&](const std::string& body) {
    if (auto code = protocol::decode_error(body.substr(0, body.find('\n') + 1))) {
      std::cerr << "error " << protocol::to_string(*code) << " rejected_by=gateway\n";
      return true;
    }
    return false;
  };

  std::optional<protocol::TelemetryFrame> echo;
  if (fast) {
    auto reply = http.post("/ctl", wire);
    if (!reply) return unreachable(ep);
    if (!reply->empty() && rejected(*reply)) return kRejected;
    for (int i = 0; i < 20 && !echo; ++i) {
      if (!http.post("/advance?by=0.1")) break;
      while (auto line = sock.read_line(300)) {
        if ((echo = echo_of(*line))) break;
      }
    }
  } else {
    if (!sock.send_line(wire)) return unreachable(ep);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (!echo) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      auto line = sock.read_line(static_cast<int>(left.count()));
      if (!line) break;
      if (line->front() == 'E' && rejected(*line)) return kRejected;
      echo = echo_of(*line);
    }
  }
  if (echo) {
    std::cout << format_telemetry(*echo) << "\n";
    return kOk;
  }
  if (Http(ep).status()) {
    std::cerr << "error Timeout seq=" << frame.seq << " cause=link_drop\n";
    return kLinkTimeout;
  }
  std::cerr << "error Timeout seq=" << frame.seq << " cause=gateway_unreachable\n";
  return kGatewayTimeout;
}

int cmd_drive(const Endpoint& ep, const std::string& path, bool fast) {
  script::DriveScript drive;
  try {
    drive = script::load_script(path);
  } catch (const std::exception& e) {
    std::cerr << "error Script " << e.what() << "\n";
    return kBadCommand;
  }
  std::cout << "drive steps=" << drive.steps.size() << "\n";
  if (drive.steps.empty()) {
    std::cout << "summary steps=0 applied=0 dropped=0 pending=0\nresult ok\n";
    return kOk;
  }

  Http http(ep);
  const auto initial = http.status();
  if (!initial) return unreachable(ep);
  // The gateway's clock mode decides how the script is paced.
  const bool gateway_fast = initial->value("mode", "") == "fast";
  if (gateway_fast != fast) {
    std::cerr << "warning gateway_mode=" << (gateway_fast ? "fast" : "realtime") << " following the gateway\n";
  }
  fast = gateway_fast;
  if (!http.post("/reset")) {
    std::cerr << "error Rejected request=/reset\n";
    return kRejected;
  }
  for (std::size_t i = 0; i < drive.steps.size(); ++i) {
    auto frame = drive.steps[i].frame;
    frame.seq = static_cast<std::uint16_t>(i + 1);
    auto reply = http.post("/ctl?at=" + fixed(drive.steps[i].at_s, 6), protocol::encode_command(frame));
    if (!reply) return unreachable(ep);
    if (!reply->empty()) {
      std::cerr << "error Rejected step=" << i + 1 << " reply=" << *reply;
      return kRejected;
    }
  }

  const double end_s = drive.duration_s() + 1.0;
  if (fast) {
    if (!http.post("/advance?to=" + fixed(end_s, 6))) return unreachable(ep);
  } else {
    if (!http.post("/resume")) return unreachable(ep);
    while (true) {
      const auto st = http.status();
      if (!st) return unreachable(ep);
      if (st->value("sim_time_s", 0.0) >= end_s - 1e-9) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

  const auto log = http.get("/mission");
  const auto st = http.status();
  if (!log || !st) return unreachable(ep);

  struct Outcome {
    std::string result = "pending";
    double latency_s = 0.0;
  };
  std::map<std::uint16_t, Outcome> outcomes;
  std::size_t start = 0;
  while (start < log->size()) {
    auto nl = log->find('\n', start);
    if (nl == std::string::npos) nl = log->size();
    const auto rec = Json::parse(log->substr(start, nl - start));
    start = nl + 1;
    const auto kind = rec.value("kind", "");
    if (kind != "CmdApplied" && kind != "CmdDropped") continue;
    const auto seq = rec["detail"].value("seq", 0);
    auto& o = outcomes[static_cast<std::uint16_t>(seq)];
    if (o.result != "pending") continue;
    o.result = kind == "CmdApplied" ? "applied" : "dropped";
    o.latency_s = rec["detail"].value("latency_s", 0.0);
  }

  std::size_t applied = 0, dropped = 0, pending = 0;
  std::optional<std::size_t> first_failed;
  for (std::size_t i = 0; i < drive.steps.size(); ++i) {
    const auto seq = static_cast<std::uint16_t>(i + 1);
    const auto& o = outcomes[seq];
    const auto& s = drive.steps[i];
    std::cout << "step " << i + 1 << " at=" << fixed(s.at_s, 3) << " cmd=\"" << s.text << "\" seq=" << seq
              << " result=" << o.result;
    if (o.result == "applied") std::cout << " latency_s=" << fixed(o.latency_s, 4);
    std::cout << "\n";
    if (o.result == "applied") {
      ++applied;
    } else {
      o.result == "dropped" ? ++dropped : ++pending;
      if (!first_failed) first_failed = i;
    }
  }
  std::cout << "summary steps=" << drive.steps.size() << " applied=" << applied << " dropped=" << dropped
            << " pending=" << pending << "\n";
  print_pose(*st);
  print_link(*st);
  if (first_failed) {
    const auto& s = drive.steps[*first_failed];
    std::cout << "result failed first_failed_step=" << *first_failed + 1 << " line=" << s.line_no
              << " at=" << fixed(s.at_s, 3) << " cmd=\"" << s.text << "\" reason=" << outcomes[*first_failed + 1].result
              << "\n";
    return kStepFailed;
  }
  std::cout << "result ok\n";
  return kOk;
}

void flatten(const std::string& prefix, const Json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(key, *it);
    } else if (it->is_string()) {
      std::cout << key << " " << it->get<std::string>() << "\n";
    } else {
      std::cout << key << " " << it->dump() << "\n";
    }
  }
}

int cmd_stats(const Endpoint& ep) {
  const auto st = Http(ep).status();
  if (!st) return unreachable(ep);
  flatten("", *st);
  return kOk;
}

int cmd_snapshot(const Endpoint& ep, const std::string& out_path) {
  const auto body = Http(ep).get("/snapshot");
  if (!body) return unreachable(ep);
  std::ofstream out(out_path, std::ios::binary);
  out.write(body->data(), static_cast<std::streamsize>(body->size()));
  if (!out) {
    std::cerr << "error Write path=" << out_path << "\n";
    return kRejected;
  }
  std::string dims;
  try {
    const auto img = jpeg::decode(reinterpret_cast<const std::uint8_t*>(body->data()), body->size());
    dims = " width=" + std::to_string(img.width) + " height=" + std::to_string(img.height);
  } catch (const std::exception&) {
    dims = " width=0 height=0";
  }
  std::cout << "snapshot bytes=" << body->size() << dims << " path=" << out_path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Headless operator client for the spy rover gateway"};
  app.require_subcommand(1);
  Endpoint ep;
  app.add_option("--host", ep.host, "Gateway host");
  app.add_option("--port", ep.port, "Gateway HTTP port");
  app.add_option("--tcp-port", ep.tcp_port, "Gateway raw TCP port (default: HTTP port + 1)");
  app.add_option("--token", ep.token, "Access token for a protected network");

  auto* send = app.add_subcommand("send", "Send one command and print the telemetry echo");
  std::vector<std::string> words;
  bool send_fast = false;
  send->add_option("command", words, "Command text, e.g. SPD 128")->required();
  send->add_flag("--fast", send_fast, "Advance a --fast gateway while waiting");

  auto* drive = app.add_subcommand("drive", "Run a drive script");
  std::string script_path;
  bool drive_fast = false;
  drive->add_option("--script", script_path, "Script file")->required();
  drive->add_flag("--fast", drive_fast, "Drive a --fast gateway in lockstep");

  auto* stats = app.add_subcommand("stats", "Print gateway diagnostics");
  auto* snap = app.add_subcommand("snapshot", "Save one camera image");
  std::string out_path;
  snap->add_option("--out", out_path, "Output JPEG path")->required();

  CLI11_PARSE(app, argc, argv);

  if (send->parsed()) {
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    return cmd_send(ep, text, send_fast);
  }
  if (drive->parsed()) return cmd_drive(ep, script_path, drive_fast);
  if (stats->parsed()) return cmd_stats(ep);
  if (snap->parsed()) return cmd_snapshot(ep, out_path);
  return kBadCommand;
}

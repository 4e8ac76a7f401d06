#pragma once

// Network face of the rover. One tick thread owns the Simulation; HTTP
// handlers and raw-TCP sessions talk to it only through a task queue and
// read published snapshots.
//
// HTTP:
//   POST /ctl[?at=SIM_S]   command lines in, decode errors out as E lines
//   GET  /ctl              telemetry lines as delivered over the downlink
//   GET  /video            multipart/x-mixed-replace JPEG stream
//   GET  /snapshot         one JPEG of the current camera view
//   GET  /status           JSON diagnostics
//   GET  /mission          mission log (JSON lines)
//   POST /advance?to=|by=  fast mode: run the clock forward and wait
//   POST /reset, /resume   restart the mission at t=0 (held until resume)
// TCP (http port + 1 unless ephemeral): same command grammar, one per line;
// every delivered telemetry line is written back.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <iostream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "spyrover/jpeg.hpp"
#include "spyrover/simulation.hpp"

namespace spyrover::gateway {

inline constexpr std::string_view kStreamBoundary = "spyroverframe";

inline FrameEncoder jpeg_encoder(int quality = 80) {
  return [quality](const video::FrameBuffer& fb) { return jpeg::encode_frame(fb, quality); };
}

/// Fan-out of values to any number of bounded subscriber queues.
template <class T>
class Broadcast {
 public:
  class Subscription {
   public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    std::optional<T> pop_for(std::chrono::milliseconds timeout) {
      std::unique_lock lk(m_);
      cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; });
      if (q_.empty()) return std::nullopt;
      T v = std::move(q_.front());
      q_.pop_front();
      return v;
    }

    std::optional<T> try_pop() { return pop_for(std::chrono::milliseconds(0)); }

    bool closed() const {
      std::lock_guard lk(m_);
      return closed_;
    }

   private:
    friend class Broadcast;
    void push(const T& v) {
      {
        std::lock_guard lk(m_);
        if (q_.size() >= capacity_) q_.pop_front();
        q_.push_back(v);
      }
      cv_.notify_one();
    }
    void close() {
      {
        std::lock_guard lk(m_);
        closed_ = true;
      }
      cv_.notify_all();
    }

    mutable std::mutex m_;
    std::condition_variable cv_;
    std::deque<T> q_;
    std::size_t capacity_;
    bool closed_ = false;
  };

  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 256) {
    auto s = std::make_shared<Subscription>(capacity);
    std::lock_guard lk(m_);
    subs_.push_back(s);
    return s;
  }

  void publish(const T& v) {
    std::lock_guard lk(m_);
    for (auto it = subs_.begin(); it != subs_.end();) {
      if (auto s = it->lock()) {
        s->push(v);
        ++it;
      } else {
        it = subs_.erase(it);
      }
    }
  }

  void close_all() {
    std::lock_guard lk(m_);
    for (auto& w : subs_) {
      if (auto s = w.lock()) s->close();
    }
    subs_.clear();
  }

  std::size_t subscriber_count() {
    std::lock_guard lk(m_);
    std::size_t n = 0;
    for (auto& w : subs_) n += w.expired() ? 0 : 1;
    return n;
  }

 private:
  std::mutex m_;
  std::list<std::weak_ptr<Subscription>> subs_;
};

struct GatewayOptions {
  bool fast = false;
  /// Stop once simulation time reaches this (fast mode runs to it directly).
  std::optional<double> duration_s;
  FrameEncoder encoder;  // defaults to JPEG
};

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<const kinematics::WorldMap> world, GatewayOptions options = {})
      : config_(std::move(config)), world_(std::move(world)), options_(std::move(options)) {
    if (!options_.encoder) options_.encoder = jpeg_encoder();
    sim_ = std::make_unique<Simulation>(config_, world_, options_.encoder);
    held_ = false;
    if (options_.fast && options_.duration_s) target_s_ = *options_.duration_s;
    publish_snapshots();
  }

  ~Gateway() { stop(); }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds both listeners and starts all threads. Throws GatewayError when a
  /// port cannot be bound.
  void start() {
    const auto hp = parse_host_port(config_.listen_address);
    install_routes();
    if (hp.port == 0) {
      http_port_ = http_.bind_to_any_port(hp.host);
      if (http_port_ <= 0) throw GatewayError("cannot bind HTTP listener on " + hp.host);
    } else {
      if (!http_.bind_to_port(hp.host, hp.port)) {
        throw GatewayError("cannot bind HTTP listener on " + config_.listen_address);
      }
      http_port_ = hp.port;
    }
    open_tcp(hp.host, hp.port == 0 ? 0 : hp.port + 1);

    running_ = true;
    tick_thread_ = std::thread([this] { tick_loop(); });
    http_thread_ = std::thread([this] { http_.listen_after_bind(); });
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    std::lock_guard stop_lk(stop_m_);
    {
      std::lock_guard lk(m_);
      stopping_ = true;
    }
    cv_.notify_all();
    telemetry_.close_all();
    frames_.close_all();
    if (running_.exchange(false)) {
      http_.stop();
      if (http_thread_.joinable()) http_thread_.join();
      if (accept_thread_.joinable()) accept_thread_.join();
      if (tick_thread_.joinable()) tick_thread_.join();
      std::list<Session> sessions;
      {
        std::lock_guard lk(sessions_m_);
        sessions.swap(sessions_);
      }
      for (auto& s : sessions) {
        if (s.thread.joinable()) s.thread.join();
      }
      if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
      }
    }
    {
      std::lock_guard lk(done_m_);
      done_ = true;
    }
    done_cv_.notify_all();
  }

  /// Blocks until stop() or the configured duration is reached; the caller
  /// still owns calling stop().
  void wait() {
    std::unique_lock lk(done_m_);
    done_cv_.wait(lk, [&] { return done_; });
  }

  bool finished() {
    std::lock_guard lk(done_m_);
    return done_;
  }

  int http_port() const noexcept { return http_port_; }
  int tcp_port() const noexcept { return tcp_port_; }
  bool fast() const noexcept { return options_.fast; }

  /// Runs `fn` on the tick thread between ticks and waits for its result.
  template <class F>
  auto on_tick_thread(F fn) -> decltype(fn(std::declval<Simulation&>())) {
    using R = decltype(fn(std::declval<Simulation&>()));
    auto task = std::make_shared<std::packaged_task<R(Simulation&)>>(std::move(fn));
    auto fut = task->get_future();
    post([task](Simulation& s) { (*task)(s); });
    return fut.get();
  }

  /// Fire-and-forget variant; tasks run in posting order.
  void post(std::function<void(Simulation&)> fn) {
    {
      std::lock_guard lk(m_);
      if (!tick_exited_) {
        tasks_.push_back(std::move(fn));
        cv_.notify_all();
        return;
      }
    }
    // No tick thread any more: run inline so callers never wait forever.
    std::lock_guard late(late_m_);
    fn(*sim_);
  }

  /// Fast mode: advance the clock to t_s and wait until it gets there.
  mission::Json advance_to(double t_s) {
    if (!options_.fast) throw GatewayError("advance is only available in --fast mode");
    std::unique_lock lk(m_);
    target_s_ = std::max(target_s_, t_s);
    cv_.notify_all();
    cv_.wait(lk, [&] { return stopping_ || ended_ || tick_exited_ || (sim_now_ >= t_s - 1e-9 && tasks_.empty() && !busy_); });
    lk.unlock();
    return status();
  }

  double sim_time() {
    std::lock_guard lk(m_);
    return sim_now_;
  }

  mission::Json status() {
    std::lock_guard lk(snap_m_);
    return status_;
  }

  void reset(bool hold) {
    on_tick_thread([this, hold](Simulation&) {
      sim_.reset();  // closes any mission file before it is reopened
      sim_ = std::make_unique<Simulation>(config_, world_, options_.encoder);
      std::lock_guard lk(m_);
      held_ = hold && !options_.fast;
      target_s_ = 0.0;
      sim_now_ = 0.0;
      return 0;
    });
    publish_snapshots_locked_from_tick();
  }

  void resume() {
    {
      std::lock_guard lk(m_);
      held_ = false;
    }
    cv_.notify_all();
  }

  Broadcast<std::string>& telemetry_feed() noexcept { return telemetry_; }
  Broadcast<DeliveredFrame>& frame_feed() noexcept { return frames_; }

 private:
  struct Session {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void tick_loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(config_.tick_period_s()));
    auto next = clock::now();
    while (true) {
      std::deque<std::function<void(Simulation&)>> tasks;
      bool do_step = false;
      {
        std::unique_lock lk(m_);
        if (stopping_) break;
        if (tasks_.empty()) {
          if (ended_) {
            busy_ = false;
            cv_.notify_all();
            cv_.wait(lk, [&] { return stopping_ || !tasks_.empty(); });
            continue;
          }
          if (options_.fast) {
            const bool behind = sim_now_ < target_s_ - 1e-9;
            if (!behind) {
              busy_ = false;
              cv_.notify_all();
              cv_.wait(lk, [&] { return stopping_ || !tasks_.empty() || sim_now_ < target_s_ - 1e-9; });
              continue;
            }
            do_step = true;
          } else if (held_) {
            busy_ = false;
            cv_.notify_all();
            cv_.wait(lk, [&] { return stopping_ || !tasks_.empty() || !held_; });
            next = clock::now();
            continue;
          } else {
            busy_ = false;
            if (cv_.wait_until(lk, next, [&] { return stopping_ || !tasks_.empty(); })) continue;
            do_step = true;
          }
        }
        tasks.swap(tasks_);
        busy_ = true;
      }
      for (auto& t : tasks) t(*sim_);
      if (!do_step) continue;

      auto out = sim_->step();
      for (auto& line : out.telemetry) telemetry_.publish(line);
      for (auto& f : out.frames) frames_.publish(f);
      const double now = sim_->now();
      {
        std::lock_guard lk(m_);
        sim_now_ = now;
      }
      if (sim_->tick() % 5 == 0 || options_.fast) publish_snapshots();

      if (options_.duration_s && now >= *options_.duration_s - 1e-9) {
        publish_snapshots();
        {
          std::lock_guard lk(done_m_);
          done_ = true;
        }
        done_cv_.notify_all();
        std::lock_guard lk(m_);
        ended_ = true;
        continue;
      }
      if (!options_.fast) {
        next += period;
        const auto lag = clock::now() - next;
        if (lag > std::chrono::seconds(1)) next = clock::now();
      }
    }
    std::deque<std::function<void(Simulation&)>> left;
    {
      std::lock_guard lk(m_);
      tick_exited_ = true;
      left.swap(tasks_);
      busy_ = false;
    }
    cv_.notify_all();
    std::lock_guard late(late_m_);
    for (auto& t : left) t(*sim_);
  }

  void publish_snapshots() {
    auto st = sim_->status_json();
    st["mode"] = options_.fast ? "fast" : "realtime";
    auto view = sim_->render_view();
    std::lock_guard lk(snap_m_);
    status_ = std::move(st);
    view_ = view;
  }
  void publish_snapshots_locked_from_tick() {
    on_tick_thread([this](Simulation&) {
      publish_snapshots();
      return 0;
    });
  }

  RenderView view() {
    std::lock_guard lk(snap_m_);
    return view_;
  }

  bool authorized(const httplib::Request& req) const {
    if (config_.auth_token.empty()) return true;
    if (req.get_header_value("X-Auth-Token") == config_.auth_token) return true;
    return req.has_param("token") && req.get_param_value("token") == config_.auth_token;
  }

  /// Decodes a block of lines; valid frames go to the uplink, each invalid
  /// line yields one E line in the returned text.
  std::string ingest_lines(std::string_view body, std::optional<double> at_s, std::size_t* accepted = nullptr) {
    std::string replies;
    std::size_t start = 0;
    std::size_t ok = 0;
    while (start < body.size()) {
      std::size_t nl = body.find('\n', start);
      std::string line;
      if (nl == std::string_view::npos) {
        line = std::string(body.substr(start));
        start = body.size();
      } else {
        line = std::string(body.substr(start, nl + 1 - start));
        start = nl + 1;
      }
      if (line == "\n" || line == "\r\n") continue;
      if (line.size() >= 2 && line[line.size() - 2] == '\r') line.erase(line.size() - 2, 1);
      auto frame = protocol::decode_command(line);
      if (!frame) {
        replies += protocol::encode_error(frame.error());
        continue;
      }
      ++ok;
      post([f = *frame, at_s](Simulation& s) { s.submit(f, at_s); });
    }
    if (accepted) *accepted = ok;
    return replies;
  }

  void install_routes() {
    http_.new_task_queue = [] { return new httplib::ThreadPool(32); };
    http_.set_default_headers({{"Access-Control-Allow-Origin", "*"}, {"Server", "spyrover-gateway"}});
    http_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req)) return httplib::Server::HandlerResponse::Unhandled;
      res.status = 401;
      res.set_content("unauthorized\n", "text/plain");
      return httplib::Server::HandlerResponse::Handled;
    });

    http_.Post("/ctl", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<double> at;
      if (req.has_param("at")) {
        try {
          at = std::stod(req.get_param_value("at"));
        } catch (const std::exception&) {
          res.status = 400;
          res.set_content("bad 'at' parameter\n", "text/plain");
          return;
        }
      }
      std::size_t accepted = 0;
      auto replies = ingest_lines(req.body, at, &accepted);
      res.set_header("X-Accepted", std::to_string(accepted));
      res.set_content(replies, "text/plain");
    });

    http_.Get("/ctl", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = telemetry_.subscribe();
      res.set_chunked_content_provider("text/plain", [this, sub](std::size_t, httplib::DataSink& sink) {
        while (running_) {
          if (!sink.is_writable()) return false;
          if (auto line = sub->pop_for(std::chrono::milliseconds(100))) return sink.write(line->data(), line->size());
          if (sub->closed()) break;
        }
        sink.done();
        return true;
      });
    });

    http_.Get("/video", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = frames_.subscribe(64);
      const std::string type = "multipart/x-mixed-replace; boundary=" + std::string(kStreamBoundary);
      res.set_chunked_content_provider(type, [this, sub](std::size_t, httplib::DataSink& sink) {
        while (running_) {
          if (!sink.is_writable()) return false;
          if (auto f = sub->pop_for(std::chrono::milliseconds(100))) {
            std::string head = "--" + std::string(kStreamBoundary) +
                               "\r\nContent-Type: image/jpeg\r\nContent-Length: " + std::to_string(f->image->size()) +
                               "\r\nX-Frame-Seq: " + std::to_string(f->frame_seq) + "\r\n\r\n";
            if (!sink.write(head.data(), head.size())) return false;
            if (!sink.write(reinterpret_cast<const char*>(f->image->data()), f->image->size())) return false;
            return sink.write("\r\n", 2);
          }
          if (sub->closed()) break;
        }
        sink.done();
        return true;
      });
    });

    http_.Get("/snapshot", [this](const httplib::Request&, httplib::Response& res) {
      const auto v = view();
      const auto fb = video::render_frame(*world_, v.pose, v.pan_deg, v.tilt_deg, config_.render, v.frame_seq,
                                          v.sim_time_s);
      const auto bytes = options_.encoder(fb);
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/jpeg");
    });

    http_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(status().dump(2) + "\n", "application/json");
    });

    http_.Get("/mission", [this](const httplib::Request&, httplib::Response& res) {
      auto text = on_tick_thread([](Simulation& s) { return s.log().joined(); });
      res.set_content(text, "application/x-ndjson");
    });

    http_.Post("/advance", [this](const httplib::Request& req, httplib::Response& res) {
      if (!options_.fast) {
        res.status = 409;
        res.set_content("advance requires --fast\n", "text/plain");
        return;
      }
      double to = 0.0;
      try {
        if (req.has_param("to")) {
          to = std::stod(req.get_param_value("to"));
        } else if (req.has_param("by")) {
          to = sim_time() + std::stod(req.get_param_value("by"));
        } else {
          throw std::invalid_argument("missing");
        }
      } catch (const std::exception&) {
        res.status = 400;
        res.set_content("advance needs ?to=SECONDS or ?by=SECONDS\n", "text/plain");
        return;
      }
      res.set_content(advance_to(to).dump(2) + "\n", "application/json");
    });

    http_.Post("/reset", [this](const httplib::Request&, httplib::Response& res) {
      reset(true);
      res.set_content(status().dump(2) + "\n", "application/json");
    });

    http_.Post("/resume", [this](const httplib::Request&, httplib::Response& res) {
      resume();
      res.set_content("resumed\n", "text/plain");
    });
  }

  void open_tcp(const std::string& host, int port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw GatewayError("cannot create TCP socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (host == "0.0.0.0" || host.empty()) {
      addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (host == "localhost") {
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw GatewayError("unsupported TCP listen host: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw GatewayError("cannot bind TCP listener on port " + std::to_string(port));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    tcp_port_ = ntohs(addr.sin_port);
  }

  void accept_loop() {
    while (running_) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) {
        reap_sessions();
        continue;
      }
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      auto done = std::make_shared<std::atomic<bool>>(false);
      std::lock_guard lk(sessions_m_);
      sessions_.push_back(Session{std::thread([this, fd, done] {
                                    run_session(fd);
                                    *done = true;
                                  }),
                                  done});
    }
  }

  void reap_sessions() {
    std::lock_guard lk(sessions_m_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (*it->done) {
        it->thread.join();
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  static bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
      const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
      if (n <= 0) return false;
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  void run_session(int fd) {
    auto sub = telemetry_.subscribe();
    std::string buf;
    bool authed = config_.auth_token.empty();
    constexpr std::size_t kMaxBuffered = 1024;
    while (running_) {
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 20);
      if (r < 0) break;
      if (r > 0) {
        if (p.revents & (POLLERR | POLLNVAL)) break;
        char chunk[512];
        const auto n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buf.append(chunk, static_cast<std::size_t>(n));
        std::size_t nl;
        bool ok = true;
        while ((nl = buf.find('\n')) != std::string::npos) {
          std::string line = buf.substr(0, nl + 1);
          buf.erase(0, nl + 1);
          if (!authed) {
            std::string want = "AUTH " + config_.auth_token;
            std::string got = line.substr(0, line.find_last_not_of("\r\n") + 1);
            if (got != want) {
              ok = false;
              break;
            }
            authed = true;
            continue;
          }
          auto replies = ingest_lines(line, std::nullopt);
          if (!replies.empty() && !send_all(fd, replies)) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
        if (buf.size() > kMaxBuffered) {
          buf.clear();
          if (!send_all(fd, protocol::encode_error(protocol::DecodeError::Malformed))) break;
        }
      }
      bool ok = true;
      while (auto line = sub->try_pop()) {
        if (!authed) continue;
        if (!send_all(fd, *line)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    ::close(fd);
  }

  GatewayConfig config_;
  std::shared_ptr<const kinematics::WorldMap> world_;
  GatewayOptions options_;
  std::unique_ptr<Simulation> sim_;

  std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::function<void(Simulation&)>> tasks_;
  double target_s_ = 0.0;
  double sim_now_ = 0.0;
  bool held_ = false;
  bool busy_ = false;
  bool stopping_ = false;
  bool ended_ = false;        // duration reached; tasks still run
  bool tick_exited_ = false;  // later tasks run inline under late_m_
  std::mutex late_m_;

  std::mutex snap_m_;
  mission::Json status_;
  RenderView view_;

  std::mutex stop_m_;
  std::mutex done_m_;
  std::condition_variable done_cv_;
  bool done_ = false;

  Broadcast<std::string> telemetry_;
  Broadcast<DeliveredFrame> frames_;

  httplib::Server http_;
  int http_port_ = -1;
  int tcp_port_ = -1;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread tick_thread_;
  std::thread http_thread_;
  std::thread accept_thread_;
  std::mutex sessions_m_;
  std::list<Session> sessions_;
};

}  // namespace spyrover::gateway

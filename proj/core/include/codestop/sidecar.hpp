#pragma once

// Streaming stop/continue decision service.
//
// Newline-delimited JSON, one reply line per request line:
//
//   {"op":"open","session_id":"s1","policy":{...}}
//     -> {"session_id":"s1","status":"open"}
//   {"op":"observe","session_id":"s1","token_pos":812,"confidence":0.41,
//    "intermediate_answer":"42","last":false}
//     -> {"session_id":"s1","action":"continue","reason":"none",
//         "r_k":0.38,"d_k":1.0}
//   {"op":"close","session_id":"s1"}
//     -> {"session_id":"s1","status":"closed","stop_step":null,
//         "reason":"none","steps_seen":1}
//
// Failures reply {"session_id":...,"error":{"code":...,"message":...}}, with
// session_id present whenever the request carried one. A failed request
// never changes session state. After a stop reply the session only accepts
// "close".

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "codestop/stepper.hpp"

namespace codestop {

struct SidecarOptions {
  std::chrono::milliseconds idle_timeout{std::chrono::minutes(10)};
  std::size_t max_sessions = 10000;
  // Injected clock for tests.
  std::function<std::chrono::steady_clock::time_point()> now =
      [] { return std::chrono::steady_clock::now(); };
};

class SessionManager {
 public:
  explicit SessionManager(SidecarOptions options = {});

  /// Handles one request line and returns one reply line (no newline).
  std::string handle_line(std::string_view line);
  nlohmann::ordered_json handle(const nlohmann::json& request);

  /// Evicts sessions idle past the timeout; returns how many.
  std::size_t expire_idle();
  void close_all();
  std::size_t open_sessions() const;

 private:
  struct Session {
    explicit Session(PolicyConfig cfg) : stepper(std::move(cfg)) {}
    std::mutex mu;
    PolicyStepper stepper;
    std::chrono::steady_clock::time_point created_at;
    std::chrono::steady_clock::time_point last_active;
  };
  using SessionPtr = std::shared_ptr<Session>;

  nlohmann::ordered_json open(const std::string& id, const nlohmann::json& req);
  nlohmann::ordered_json observe(const std::string& id,
                                 const nlohmann::json& req);
  nlohmann::ordered_json close(const std::string& id);

  // Looks the session up, expiring it first if it has been idle too long.
  // On failure fills `error` and returns null.
  SessionPtr find(const std::string& id, nlohmann::ordered_json& error);
  void remember_expired(const std::string& id);
  // Caller holds mu_.
  std::size_t evict_idle_locked(std::chrono::steady_clock::time_point now);

  SidecarOptions options_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, SessionPtr> sessions_;
  std::unordered_set<std::string> expired_;
  std::deque<std::string> expired_order_;
};

/// Error reply helper; `session_id` may be empty.
nlohmann::ordered_json error_reply(const std::string& session_id,
                                   std::string_view code,
                                   std::string_view message);

/// Serves requests from `in` until EOF, one flushed reply line per request.
void serve_stdio(SessionManager& manager, std::istream& in, std::ostream& out);

/// The same line protocol over TCP, one thread per connection.
class TcpServer {
 public:
  TcpServer(SessionManager& manager, std::string host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and listens; throws IoError on failure (e.g. port in use).
  void bind();
  /// Actual bound port (useful with port 0).
  std::uint16_t port() const { return port_; }
  /// Accepts connections until stop() is called.
  void run();
  void stop();

 private:
  void serve_connection(int fd);

  SessionManager& manager_;
  std::string host_;
  std::uint16_t port_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
};

}  // namespace codestop

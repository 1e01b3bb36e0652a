#include "codestop/sidecar.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "codestop/config_json.hpp"
#include "codestop/errors.hpp"

namespace codestop {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kExpiredMemory = 65536;

}  // namespace

ordered_json error_reply(const std::string& session_id, std::string_view code,
                         std::string_view message) {
  ordered_json j;
  if (!session_id.empty()) j["session_id"] = session_id;
  j["error"] = {{"code", code}, {"message", message}};
  return j;
}

SessionManager::SessionManager(SidecarOptions options)
    : options_(std::move(options)) {}

std::string SessionManager::handle_line(std::string_view line) {
  json request = json::parse(line.begin(), line.end(), nullptr, false);
  if (request.is_discarded()) {
    return error_reply("", "bad_request", "malformed JSON").dump();
  }
  return handle(request).dump();
}

ordered_json SessionManager::handle(const json& request) {
  if (!request.is_object()) {
    return error_reply("", "bad_request", "request must be a JSON object");
  }
  std::string id;
  if (auto it = request.find("session_id"); it != request.end() && it->is_string()) {
    id = it->get<std::string>();
  }
  auto op = request.find("op");
  if (op == request.end() || !op->is_string()) {
    return error_reply(id, "bad_request", "missing op");
  }
  if (id.empty()) return error_reply("", "bad_request", "missing session_id");

  const std::string name = op->get<std::string>();
  if (name == "open") return open(id, request);
  if (name == "observe") return observe(id, request);
  if (name == "close") return close(id);
  return error_reply(id, "unknown_op", "unknown op '" + name + "'");
}

ordered_json SessionManager::open(const std::string& id, const json& req) {
  PolicyConfig cfg;
  auto policy = req.find("policy");
  if (policy == req.end()) {
    return error_reply(id, "invalid_config", "invalid config: policy missing");
  }
  try {
    cfg = config_from_json(*policy);
  } catch (const ValidationError& e) {
    return error_reply(id, "invalid_config",
                       "invalid config: " + e.field() + " (" + e.message() + ")");
  }

  const auto now = options_.now();
  auto session = std::make_shared<Session>(cfg);
  session->created_at = now;
  session->last_active = now;

  std::lock_guard lock(mu_);
  if (sessions_.count(id)) {
    return error_reply(id, "session_exists", "session exists");
  }
  if (sessions_.size() >= options_.max_sessions) {
    evict_idle_locked(now);
    if (sessions_.size() >= options_.max_sessions) {
      return error_reply(id, "capacity", "too many open sessions");
    }
  }
  expired_.erase(id);
  sessions_.emplace(id, std::move(session));

  ordered_json reply;
  reply["session_id"] = id;
  reply["status"] = "open";
  return reply;
}

SessionManager::SessionPtr SessionManager::find(const std::string& id,
                                                ordered_json& error) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    error = expired_.count(id)
                ? error_reply(id, "session_expired", "session expired")
                : error_reply(id, "unknown_session", "unknown session");
    return nullptr;
  }
  SessionPtr session = it->second;
  std::lock_guard session_lock(session->mu);
  if (options_.now() - session->last_active > options_.idle_timeout) {
    remember_expired(id);
    sessions_.erase(it);
    error = error_reply(id, "session_expired", "session expired");
    return nullptr;
  }
  return session;
}

ordered_json SessionManager::observe(const std::string& id, const json& req) {
  ordered_json error;
  SessionPtr session = find(id, error);
  if (!session) return error;

  std::lock_guard lock(session->mu);
  session->last_active = options_.now();
  if (session->stepper.stopped()) {
    return error_reply(id, "session_closed", "session closed");
  }

  StepObservation obs;
  bool last = false;
  auto bad = [&](const std::string& msg) {
    return error_reply(id, "invalid_observation", msg);
  };
  auto tp = req.find("token_pos");
  if (tp == req.end() || !tp->is_number_integer()) {
    return bad("token_pos must be an integer");
  }
  obs.token_pos = tp->get<TokenCount>();
  auto conf = req.find("confidence");
  if (conf == req.end() || !conf->is_number()) {
    return bad("confidence must be a number");
  }
  obs.confidence = conf->get<double>();
  if (auto it = req.find("intermediate_answer"); it != req.end()) {
    if (!it->is_string()) return bad("intermediate_answer must be a string");
    obs.intermediate_answer = it->get<std::string>();
  }
  if (auto it = req.find("step_index"); it != req.end()) {
    if (!it->is_number_integer()) return bad("step_index must be an integer");
    obs.step_index = it->get<int>();
  }
  if (auto it = req.find("last"); it != req.end()) {
    if (!it->is_boolean()) return bad("last must be a boolean");
    last = it->get<bool>();
  }

  const DegenerationState& state = session->stepper.state();
  if (!state.fresh() && obs.token_pos <= state.last_token_pos) {
    return error_reply(id, "out_of_order", "token_pos not strictly increasing");
  }

  StepReport report;
  try {
    report = session->stepper.observe(obs, last);
  } catch (const ValidationError& e) {
    return bad(e.field().empty() ? e.message() : e.field() + ": " + e.message());
  }

  ordered_json reply;
  reply["session_id"] = id;
  reply["action"] = to_string(report.decision.action);
  reply["reason"] = to_string(report.decision.reason);
  reply["r_k"] = report.r_k;
  reply["d_k"] = report.d_k;
  return reply;
}

ordered_json SessionManager::close(const std::string& id) {
  ordered_json error;
  SessionPtr session = find(id, error);
  if (!session) return error;
  {
    std::lock_guard lock(mu_);
    sessions_.erase(id);
  }

  std::lock_guard lock(session->mu);
  const PolicyStepper& stepper = session->stepper;
  ordered_json reply;
  reply["session_id"] = id;
  reply["status"] = "closed";
  if (stepper.stopped()) {
    reply["stop_step"] = stepper.last_report().step;
    reply["reason"] = to_string(stepper.last_report().decision.reason);
  } else {
    reply["stop_step"] = nullptr;
    reply["reason"] = to_string(StopReason::None);
  }
  reply["steps_seen"] = stepper.steps_seen();
  return reply;
}

void SessionManager::remember_expired(const std::string& id) {
  if (expired_.insert(id).second) expired_order_.push_back(id);
  while (expired_order_.size() > kExpiredMemory) {
    expired_.erase(expired_order_.front());
    expired_order_.pop_front();
  }
}

std::size_t SessionManager::expire_idle() {
  const auto now = options_.now();
  std::lock_guard lock(mu_);
  return evict_idle_locked(now);
}

std::size_t SessionManager::evict_idle_locked(
    std::chrono::steady_clock::time_point now) {
  std::size_t evicted = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool idle;
    {
      std::lock_guard session_lock(it->second->mu);
      idle = now - it->second->last_active > options_.idle_timeout;
    }
    if (idle) {
      remember_expired(it->first);
      it = sessions_.erase(it);
      ++evicted;
    } else {
      ++it;
    }
  }
  return evicted;
}

void SessionManager::close_all() {
  std::lock_guard lock(mu_);
  sessions_.clear();
}

std::size_t SessionManager::open_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void serve_stdio(SessionManager& manager, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << manager.handle_line(line) << '\n';
    out.flush();
  }
  manager.close_all();
}

// --- TCP -------------------------------------------------------------------

TcpServer::TcpServer(SessionManager& manager, std::string host,
                     std::uint16_t port)
    : manager_(manager), host_(std::move(host)), port_(port) {}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::bind() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port_);
  const char* node = host_.empty() ? nullptr : host_.c_str();
  if (int rc = ::getaddrinfo(node, service.c_str(), &hints, &res); rc != 0) {
    throw IoError("cannot resolve " + host_ + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw IoError(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
    const std::string reason = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw IoError("cannot listen on " + host_ + ":" + service + ": " + reason);
  }
  ::freeaddrinfo(res);

  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len) == 0) {
    port_ = ntohs(bound.sin_port);
  }
  listen_fd_ = fd;
}

void TcpServer::run() {
  if (listen_fd_ < 0) bind();
  struct Connection {
    std::thread worker;
    int fd;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::vector<Connection> live;

  auto reap = [&](bool all) {
    for (auto it = live.begin(); it != live.end();) {
      if (all || it->done->load()) {
        if (all) ::shutdown(it->fd, SHUT_RDWR);
        it->worker.join();
        ::close(it->fd);
        it = live.erase(it);
      } else {
        ++it;
      }
    }
  };

  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 200);
    reap(false);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::thread worker([this, fd, done] {
      serve_connection(fd);
      done->store(true);
    });
    live.push_back({std::move(worker), fd, std::move(done)});
  }
  reap(true);
  ::close(listen_fd_);
  listen_fd_ = -1;
  manager_.close_all();
}

void TcpServer::stop() { stopping_.store(true); }

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos;
         start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      std::string reply = manager_.handle_line(line);
      reply.push_back('\n');
      std::size_t sent = 0;
      while (sent < reply.size()) {
        const ssize_t w =
            ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) return;
        sent += static_cast<std::size_t>(w);
      }
    }
    buffer.erase(0, start);
  }
}

}  // namespace codestop

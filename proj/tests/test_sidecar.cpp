#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include "codestop/config_json.hpp"
#include "codestop/errors.hpp"
#include "codestop/eval.hpp"
#include "codestop/sidecar.hpp"
#include "oracles.hpp"

using namespace codestop;
using json = nlohmann::json;

namespace {

json call(SessionManager& m, const json& req) { return json::parse(m.handle_line(req.dump())); }

json open_req(const std::string& id, json policy = json::object()) {
  return {{"op", "open"}, {"session_id", id}, {"policy", std::move(policy)}};
}

json observe_req(const std::string& id, TokenCount pos, double c, bool last = false) {
  json j = {{"op", "observe"}, {"session_id", id}, {"token_pos", pos}, {"confidence", c}};
  if (last) j["last"] = true;
  return j;
}

json close_req(const std::string& id) { return {{"op", "close"}, {"session_id", id}}; }

std::string error_code(const json& reply) {
  return reply.contains("error") ? reply["error"]["code"].get<std::string>() : "";
}

// Replays a trajectory through a session; returns (stop_step, reason).
std::pair<int, std::string> stream(SessionManager& m, const std::string& id,
                                   const Trajectory& t, const PolicyConfig& cfg) {
  REQUIRE(call(m, open_req(id, config_to_json(cfg)))["status"] == "open");
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    json req = observe_req(id, s.token_pos, s.confidence, i + 1 == t.steps.size());
    req["intermediate_answer"] = s.intermediate_answer;
    const json reply = call(m, req);
    REQUIRE(error_code(reply) == "");
    if (reply["action"] == "stop") {
      const json closed = call(m, close_req(id));
      CHECK(closed["stop_step"] == static_cast<int>(i + 1));
      return {static_cast<int>(i + 1), reply["reason"].get<std::string>()};
    }
  }
  FAIL("session never stopped");
  return {0, ""};
}

PolicyConfig tuned() {
  PolicyConfig cfg;
  cfg.ramp_steps = 5;
  cfg.r_min = 0.0;
  cfg.r_max = 0.95;
  cfg.tau = 7.1;
  return cfg;
}

}  // namespace

TEST_CASE("open validates and rejects duplicates") {
  SessionManager m;
  CHECK(call(m, open_req("s1")) == json({{"session_id", "s1"}, {"status", "open"}}));
  CHECK(error_code(call(m, open_req("s1"))) == "session_exists");

  const json bad = call(m, open_req("s2", {{"r_min", 0.99}, {"r_max", 0.5}}));
  CHECK(error_code(bad) == "invalid_config");
  CHECK(bad["session_id"] == "s2");
  CHECK(bad["error"]["message"].get<std::string>().rfind("invalid config: r_min", 0) == 0);
  CHECK(m.open_sessions() == 1);

  CHECK(error_code(call(m, {{"op", "open"}})) == "bad_request");
  CHECK(error_code(call(m, {{"op", "dance"}, {"session_id", "s1"}})) == "unknown_op");
  CHECK(json::parse(m.handle_line("{oops"))["error"]["code"] == "bad_request");
}

TEST_CASE("confidence stop past the ramp") {
  SessionManager m;
  call(m, open_req("a", config_to_json(tuned())));
  // Rising just under the ramp: only step 1 is flagged, D_5 = 1 + ln 5.
  const double climb[] = {0.18, 0.37, 0.56, 0.75, 0.94};
  for (int k = 1; k <= 5; ++k) {
    const json r = call(m, observe_req("a", 100 * k, climb[k - 1]));
    CHECK(r["action"] == "continue");
  }
  const json r = call(m, observe_req("a", 600, 0.97));
  CHECK(r["action"] == "stop");
  CHECK(r["reason"] == "confidence");
  CHECK(r["r_k"].get<double>() == doctest::Approx(0.95));

  CHECK(error_code(call(m, observe_req("a", 700, 0.5))) == "session_closed");
  const json closed = call(m, close_req("a"));
  CHECK(closed["status"] == "closed");
  CHECK(closed["stop_step"] == 6);
  CHECK(closed["reason"] == "confidence");
  CHECK(closed["steps_seen"] == 6);
  CHECK(error_code(call(m, close_req("a"))) == "unknown_session");
}

TEST_CASE("close before any stop") {
  SessionManager m;
  call(m, open_req("q"));
  call(m, observe_req("q", 10, 0.1));
  const json closed = call(m, close_req("q"));
  CHECK(closed["stop_step"].is_null());
  CHECK(closed["reason"] == "none");
  CHECK(closed["steps_seen"] == 1);
}

TEST_CASE("failed observations leave the session untouched") {
  SessionManager m;
  // Default ramp starts at r_1 = 0.19, so confidences stay below it.
  call(m, open_req("o"));
  const json first = call(m, observe_req("o", 100, 0.1));
  CHECK(error_code(call(m, observe_req("o", 100, 0.1))) == "out_of_order");
  CHECK(error_code(call(m, observe_req("o", 50, 0.1))) == "out_of_order");
  CHECK(error_code(call(m, observe_req("o", 200, 1.4))) == "invalid_observation");
  CHECK(error_code(call(m, {{"op", "observe"}, {"session_id", "o"}, {"confidence", 0.1}})) ==
        "invalid_observation");

  // Same continuation as a fresh session that never saw the bad requests.
  SessionManager clean;
  call(clean, open_req("o"));
  call(clean, observe_req("o", 100, 0.1));
  CHECK(call(m, observe_req("o", 200, 0.2)) == call(clean, observe_req("o", 200, 0.2)));
  (void)first;
}

TEST_CASE("idle sessions expire") {
  auto now = std::chrono::steady_clock::time_point{};
  SidecarOptions opts;
  opts.idle_timeout = std::chrono::seconds(10);
  opts.now = [&] { return now; };
  SessionManager m(opts);

  call(m, open_req("e"));
  call(m, open_req("f"));
  now += std::chrono::seconds(9);
  CHECK(error_code(call(m, observe_req("e", 10, 0.1))) == "");
  now += std::chrono::seconds(9);
  // "e" was touched 9s ago; "f" has been idle for 18s.
  CHECK(error_code(call(m, observe_req("f", 10, 0.5))) == "session_expired");
  CHECK(error_code(call(m, observe_req("e", 20, 0.1))) == "");
  now += std::chrono::seconds(11);
  CHECK(m.expire_idle() == 1);
  CHECK(error_code(call(m, close_req("e"))) == "session_expired");
  CHECK(m.open_sessions() == 0);
}

TEST_CASE("capacity limit") {
  auto now = std::chrono::steady_clock::time_point{};
  SidecarOptions opts;
  opts.max_sessions = 2;
  opts.idle_timeout = std::chrono::seconds(5);
  opts.now = [&] { return now; };
  SessionManager m(opts);
  call(m, open_req("1"));
  call(m, open_req("2"));
  CHECK(error_code(call(m, open_req("3"))) == "capacity");
  now += std::chrono::seconds(6);
  CHECK(call(m, open_req("3"))["status"] == "open");
}

TEST_CASE("streamed decisions match batch replay") {
  std::mt19937_64 rng(77);
  SessionManager m;
  PolicyConfig cfg = tuned();
  cfg.tau = 4.0;
  for (int i = 0; i < 200; ++i) {
    const Trajectory t = testing::random_trajectory(rng, 60);
    const auto batch = run_policy(t, cfg);
    const auto [step, reason] = stream(m, "t" + std::to_string(i), t, cfg);
    REQUIRE(step == batch.stop_step);
    REQUIRE(reason == to_string(batch.reason));
  }
  CHECK(m.open_sessions() == 0);
}

TEST_CASE("sessions are isolated under concurrency") {
  std::vector<Trajectory> trajs;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 64; ++i) trajs.push_back(testing::random_trajectory(rng, 40));
  PolicyConfig cfg;
  cfg.tau = 5.0;

  SessionManager m;
  std::vector<int> got(trajs.size());
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      // Each worker advances its sessions in lockstep to force interleaving.
      std::vector<std::size_t> mine;
      for (std::size_t i = w; i < trajs.size(); i += 4) mine.push_back(i);
      for (auto i : mine) m.handle(open_req("c" + std::to_string(i), config_to_json(cfg)));
      std::vector<bool> done(trajs.size(), false);
      for (std::size_t step = 0;; ++step) {
        bool any = false;
        for (auto i : mine) {
          const auto& t = trajs[i];
          if (done[i] || step >= t.steps.size()) continue;
          any = true;
          const auto& s = t.steps[step];
          json req = observe_req("c" + std::to_string(i), s.token_pos, s.confidence,
                                 step + 1 == t.steps.size());
          req["intermediate_answer"] = s.intermediate_answer;
          if (m.handle(req)["action"] == "stop") {
            done[i] = true;
            got[i] = static_cast<int>(step + 1);
          }
        }
        if (!any) break;
      }
    });
  }
  for (auto& t : workers) t.join();
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    CHECK(got[i] == run_policy(trajs[i], cfg).stop_step);
  }
}

TEST_CASE("stdio transport") {
  SessionManager m;
  std::istringstream in(open_req("x").dump() + "\n\n" + observe_req("x", 5, 0.99).dump() +
                        "\n" + close_req("x").dump() + "\n");
  std::ostringstream out;
  serve_stdio(m, in, out);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<json> replies;
  while (std::getline(lines, line)) replies.push_back(json::parse(line));
  REQUIRE(replies.size() == 3);
  CHECK(replies[1]["action"] == "stop");  // 0.99 clears r_1 = 0.19
  CHECK(replies[2]["stop_step"] == 1);
}

TEST_CASE("tcp transport") {
  SessionManager m;
  TcpServer server(m, "127.0.0.1", 0);
  server.bind();
  REQUIRE(server.port() != 0);
  std::thread runner([&] { server.run(); });

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(server.port());
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);

  const std::string requests = open_req("tcp").dump() + "\n" + close_req("tcp").dump() + "\n";
  REQUIRE(::send(fd, requests.data(), requests.size(), 0) ==
          static_cast<ssize_t>(requests.size()));
  std::string received;
  char buf[512];
  while (std::count(received.begin(), received.end(), '\n') < 2) {
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    REQUIRE(n > 0);
    received.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  std::istringstream lines(received);
  std::string line;
  std::getline(lines, line);
  CHECK(json::parse(line)["status"] == "open");
  std::getline(lines, line);
  CHECK(json::parse(line)["status"] == "closed");

  TcpServer clash(m, "127.0.0.1", server.port());
  CHECK_THROWS_AS(clash.bind(), IoError);

  server.stop();
  runner.join();
}

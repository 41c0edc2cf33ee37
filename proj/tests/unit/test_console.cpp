#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include "spamlab/console/protocol.hpp"
#include "spamlab/console/server.hpp"
#include "spamlab/console/websocket.hpp"
#include "spamlab/report.hpp"
#include "spamlab/scenario.hpp"

using namespace spamlab;
using namespace spamlab::console;
using nlohmann::json;

TEST(WebSocket, AcceptKeyMatchesReferenceExample) {
  EXPECT_EQ(ws::accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST(WebSocket, UpgradeRequestParsing) {
  const std::string req =
      "GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: keep-alive, Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n";
  EXPECT_EQ(ws::upgrade_key(req).value_or(""), "dGhlIHNhbXBsZSBub25jZQ==");
  EXPECT_FALSE(ws::upgrade_key("GET / HTTP/1.1\r\nHost: x\r\n").has_value());
  const auto resp = ws::handshake_response("dGhlIHNhbXBsZSBub25jZQ==");
  EXPECT_NE(resp.find("101"), std::string::npos);
  EXPECT_NE(resp.find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);
}

TEST(WebSocket, DecoderHandlesMaskingLengthsAndSplits) {
  for (std::size_t len : {0u, 5u, 125u, 126u, 1000u, 70000u}) {
    std::string payload(len, 'x');
    for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<char>('a' + i % 26);
    const auto frame = ws::encode_masked_frame(payload, 0x37fa213d);
    ws::Decoder d;
    std::vector<ws::Message> got;
    for (std::size_t i = 0; i < frame.size(); i += 7) {
      auto part = d.feed(std::string_view(frame).substr(i, 7));
      got.insert(got.end(), part.begin(), part.end());
    }
    ASSERT_EQ(got.size(), 1u) << len;
    EXPECT_EQ(got[0].opcode, ws::Opcode::TEXT);
    EXPECT_EQ(got[0].payload, payload);
  }
}

TEST(WebSocket, FragmentsAreReassembledAroundControlFrames) {
  auto first = ws::encode_masked_frame("Hel", 1, ws::Opcode::TEXT);
  first[0] = static_cast<char>(first[0] & 0x7f);  // clear FIN
  const auto ping = ws::encode_masked_frame("p", 2, ws::Opcode::PING);
  const auto last = ws::encode_masked_frame("lo", 3, ws::Opcode::CONTINUATION);
  ws::Decoder d;
  const auto msgs = d.feed(first + ping + last);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].opcode, ws::Opcode::PING);
  EXPECT_EQ(msgs[1].payload, "Hello");
}

TEST(WebSocket, UnmaskedClientFrameIsRejected) {
  ws::Decoder d;
  EXPECT_THROW(d.feed(ws::encode_frame("hi")), std::runtime_error);
}

TEST(Protocol, ParsesCommandsAndMapsToPatches) {
  auto c = parse_command(
      R"({"type":"command","id":"a1","verb":"SET_ATTACK","payload":{"index":1,"fields":{"doppler_hz":-1200.5,"active":true}}})");
  EXPECT_EQ(c.id, "a1");
  EXPECT_EQ(c.verb, Verb::SET_ATTACK);
  auto p = to_patch(c);
  ASSERT_TRUE(p);
  ASSERT_EQ(p->assignments.size(), 2u);
  EXPECT_EQ(p->assignments[0], (std::pair<std::string, std::string>{"attack1.active", "true"}));
  EXPECT_EQ(p->assignments[1], (std::pair<std::string, std::string>{"attack1.doppler_hz", "-1200.5"}));

  c = parse_command(R"({"type":"command","id":"b","verb":"STOP_ATTACK"})");
  EXPECT_EQ(to_patch(c)->assignments[0], (std::pair<std::string, std::string>{"attack0.active", "false"}));
  c = parse_command(R"({"type":"command","id":"c","verb":"RESTART_RECEIVER","payload":{"mode":"HOT"}})");
  EXPECT_EQ(to_patch(c)->assignments[0], (std::pair<std::string, std::string>{"receiver.restart", "HOT"}));
  c = parse_command(R"({"type":"command","id":"d","verb":"SET_JAMMING","payload":{"fields":{"power_db":3}}})");
  EXPECT_EQ(to_patch(c)->assignments[0], (std::pair<std::string, std::string>{"jamming0.power_db", "3"}));
  c = parse_command(R"({"type":"command","id":"e","verb":"PAUSE"})");
  EXPECT_FALSE(to_patch(c).has_value());
}

TEST(Protocol, RejectsMalformedCommandsKeepingTheId) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"{not json", ""},
      {"[1,2]", ""},
      {R"({"type":"command","verb":"PAUSE"})", ""},
      {R"({"type":"frame","id":"x","verb":"PAUSE"})", "x"},
      {R"({"type":"command","id":"x","verb":"EXPLODE"})", "x"},
      {R"({"type":"command","id":"x","verb":"SET_ATTACK","payload":{"fields":{}}})", "x"},
      {R"({"type":"command","id":"x","verb":"SET_ATTACK","payload":{"fields":{"a b":1}}})", "x"},
      {R"({"type":"command","id":"x","verb":"SET_ATTACK","payload":{"fields":{"f":[1]}}})", "x"},
      {R"({"type":"command","id":"x","verb":"START_ATTACK","payload":{"index":-1}})", "x"},
      {R"({"type":"command","id":"x","verb":"RESTART_RECEIVER","payload":{"mode":"LUKEWARM"}})", "x"},
      {R"({"type":"command","id":"x","verb":"PAUSE","payload":3})", "x"},
  };
  for (const auto& [text, id] : cases) {
    try {
      parse_command(text);
      ADD_FAILURE() << text;
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.id(), id) << text;
    }
  }
}

TEST(Protocol, EnvelopeCarriesTypeAndSequence) {
  const auto j = json::parse(encode(error_body("", "bad"), "error", 7));
  EXPECT_EQ(j["type"], "error");
  EXPECT_EQ(j["seq"], 7);
  EXPECT_TRUE(j["id"].is_null());
  EXPECT_EQ(j["ok"], false);
  Command c{"q", Verb::RESUME, json::object()};
  const auto a = json::parse(encode(ack_body(c, 1.25), "ack", 2));
  EXPECT_EQ(a["verb"], "RESUME");
  EXPECT_EQ(a["applied_t_s"], 1.25);
}

namespace {

scenario::ScenarioSpec short_spec(double duration) {
  return scenario::parse_spec(json::parse(R"({
    "name": "console", "seed": 11, "duration_s": )" + std::to_string(duration) + R"(,
    "receiver": {"start_mode": "HOT"},
    "attacks": [{"target_svid": 13, "doppler_mode": "FALSE_FIXED", "doppler_hz": 2000,
                 "doppler_relative_to_truth": true, "power_advantage_db": 6, "active": false,
                 "window": {"start_s": 0, "end_s": 100}}]
  })"));
}

class Conn {
 public:
  explicit Conn(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) throw std::runtime_error("connect failed");
  }
  ~Conn() { ::close(fd_); }

  void send(const std::string& s) { ASSERT_EQ(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL), ssize_t(s.size())); }

  // Raw bytes until `ready(buffer)` or timeout.
  bool read_until(const std::function<bool(std::string&)>& ready, double timeout_s = 20.0) {
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    while (!ready(buf_)) {
      if (std::chrono::steady_clock::now() > until) return false;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return ready(buf_);
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
    return true;
  }

  std::optional<json> next_line(double timeout_s = 20.0) {
    if (!read_until([](std::string& b) { return b.find('\n') != std::string::npos; }, timeout_s)) return std::nullopt;
    const auto nl = buf_.find('\n');
    auto j = json::parse(buf_.substr(0, nl));
    buf_.erase(0, nl + 1);
    return j;
  }

  std::optional<json> next_of(const std::string& type, double timeout_s = 20.0) {
    while (auto j = next_line(timeout_s))
      if ((*j)["type"] == type) return j;
    return std::nullopt;
  }

  std::string& buffer() { return buf_; }

 private:
  int fd_ = -1;
  std::string buf_;
};

struct Joiner {
  Server& server;
  std::thread& thread;
  ~Joiner() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

std::string command(const std::string& id, const std::string& verb, json payload = json::object()) {
  return json{{"type", "command"}, {"id", id}, {"verb", verb}, {"payload", payload}}.dump() + "\n";
}

}  // namespace

TEST(ConsoleServer, TcpSessionAppliesCommandsAndReplaysFromLog) {
  const auto log = std::filesystem::temp_directory_path() / "spamlab_console_session.log";
  std::filesystem::remove(log);
  scenario::Scenario sc(short_spec(2.0));
  ServerConfig cfg;
  cfg.port = 0;
  cfg.speed = 0.0;
  cfg.start_paused = true;
  cfg.session_log = log;
  cfg.linger_s = 5.0;
  Server server(sc, cfg);
  server.start();
  ASSERT_GT(server.port(), 0);
  std::thread runner([&] { server.run(); });
  Joiner joiner{server, runner};

  Conn a(server.port());
  Conn b(server.port());
  const auto snap = a.next_of("snapshot");
  ASSERT_TRUE(snap);
  EXPECT_EQ((*snap)["state"], "PAUSED");
  EXPECT_EQ((*snap)["scenario"]["name"], "console");
  EXPECT_EQ((*snap)["seq"], 1);
  ASSERT_TRUE(b.next_of("snapshot"));

  a.send(command("s1", "SET_ATTACK", {{"fields", {{"power_advantage_db", 8}}}}));
  a.send(command("s2", "START_ATTACK"));
  a.send(command("s2", "STOP_ATTACK"));
  a.send("{garbage\n");
  std::vector<json> acks, errors;
  while (acks.size() + errors.size() < 4) {
    auto j = a.next_line();
    ASSERT_TRUE(j);
    if ((*j)["type"] == "ack") acks.push_back(*j);
    if ((*j)["type"] == "error") errors.push_back(*j);
  }
  ASSERT_EQ(acks.size(), 2u);
  EXPECT_EQ(acks[0]["id"], "s1");
  EXPECT_EQ(acks[0]["applied_t_s"], 0.0);
  EXPECT_EQ(acks[1]["id"], "s2");
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[0]["id"], "s2");
  EXPECT_TRUE(errors[1]["id"].is_null());

  a.send(command("r", "RESUME"));
  std::uint64_t last_seq = 0;
  int frames = 0;
  double last_t = -1;
  for (;;) {
    auto j = b.next_line();
    ASSERT_TRUE(j);
    EXPECT_GT((*j)["seq"].get<std::uint64_t>(), last_seq);
    last_seq = (*j)["seq"];
    if ((*j)["type"] == "frame") {
      ++frames;
      EXPECT_GT((*j)["t_s"].get<double>(), last_t);
      last_t = (*j)["t_s"];
      EXPECT_EQ((*j)["profiles"]["attacks"][0]["active"], true);
    } else if ((*j)["type"] == "snapshot") {
      EXPECT_EQ((*j)["state"], "FINISHED");
      break;
    }
  }
  EXPECT_GE(frames, 19);

  const auto live = sc.result();
  ASSERT_EQ(live.applied_patches.size(), 2u);
  const auto replay_log = scenario::load_patch_log(log);
  ASSERT_EQ(replay_log.size(), 2u);
  const auto replay = scenario::run(short_spec(2.0), replay_log);
  EXPECT_EQ(report::to_json(replay.timeline).dump(), report::to_json(live.timeline).dump());
  EXPECT_EQ(report::to_json(replay.outcome).dump(), report::to_json(live.outcome).dump());
  std::filesystem::remove(log);
}

TEST(ConsoleServer, WebSocketClientGetsFramedSnapshot) {
  scenario::Scenario sc(short_spec(0.5));
  ServerConfig cfg;
  cfg.port = 0;
  cfg.speed = 0.0;
  cfg.start_paused = true;
  cfg.linger_s = 5.0;
  Server server(sc, cfg);
  server.start();
  std::thread runner([&] { server.run(); });
  Joiner joiner{server, runner};

  Conn c(server.port());
  c.send("GET /ws HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
         "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  ASSERT_TRUE(c.read_until([](std::string& b) { return b.find("\r\n\r\n") != std::string::npos; }));
  auto& buf = c.buffer();
  const auto end = buf.find("\r\n\r\n");
  EXPECT_NE(buf.substr(0, end).find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);
  buf.erase(0, end + 4);

  // Server frames are unmasked; decode by flipping the mask bit in a copy.
  std::vector<json> msgs;
  auto decode = [&](std::string& b) {
    while (b.size() >= 2) {
      std::size_t len = static_cast<unsigned char>(b[1]) & 0x7f, hdr = 2;
      if (len == 126) {
        if (b.size() < 4) return false;
        len = (static_cast<unsigned char>(b[2]) << 8) | static_cast<unsigned char>(b[3]);
        hdr = 4;
      } else if (len == 127) {
        if (b.size() < 10) return false;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(b[2 + i]);
        hdr = 10;
      }
      if (b.size() < hdr + len) return false;
      if ((b[0] & 0x0f) == 0x1) msgs.push_back(json::parse(b.substr(hdr, len)));
      b.erase(0, hdr + len);
    }
    return false;
  };
  auto has = [&](const std::string& type) {
    for (auto& m : msgs)
      if (m["type"] == type) return true;
    return false;
  };
  ASSERT_TRUE(c.read_until([&](std::string& b) {
    decode(b);
    return has("snapshot");
  }));
  c.send(ws::encode_masked_frame(R"({"type":"command","id":"go","verb":"RESUME"})", 0x11223344));
  ASSERT_TRUE(c.read_until([&](std::string& b) {
    decode(b);
    return has("ack") && msgs.back()["type"] == "snapshot" && msgs.back()["state"] == "FINISHED";
  }));
  EXPECT_TRUE(has("frame"));
}

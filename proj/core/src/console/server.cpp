#include "spamlab/console/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "spamlab/console/protocol.hpp"
#include "spamlab/console/websocket.hpp"
#include "spamlab/error.hpp"

namespace spamlab::console {
namespace {

using Clock = std::chrono::steady_clock;

struct Outgoing {
  std::string text;
  bool droppable = false;
};

struct Client {
  int fd = -1;
  bool websocket = false;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Outgoing> queue;
  std::uint64_t seq = 0;
  std::uint64_t dropped = 0;
  bool closed = false;
  bool sending = false;
  std::set<std::string> ids;
  std::thread reader;
  std::thread writer;

  // Builds the message under the lock so seq and drop counts are exact.
  template <typename Build>
  void enqueue(Build&& build, bool droppable, std::size_t limit) {
    {
      std::lock_guard lock(mu);
      if (closed) return;
      if (droppable && queue.size() >= limit) {
        for (auto it = queue.begin(); it != queue.end(); ++it) {
          if (it->droppable) {
            queue.erase(it);
            ++dropped;
            break;
          }
        }
      }
      std::string text = build(++seq, dropped);
      queue.push_back({websocket ? ws::encode_frame(text) : text + "\n", droppable});
    }
    cv.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
    ::shutdown(fd, SHUT_RDWR);
  }
};

struct Pending {
  std::shared_ptr<Client> client;
  Command command;
};

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

std::uint16_t default_port() {
  if (const char* env = std::getenv("SPAMLAB_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0 && v < 65536) return static_cast<std::uint16_t>(v);
  }
  return kDefaultPort;
}

struct Server::Impl {
  scenario::Scenario& scenario;
  ServerConfig config;
  int listen_fd = -1;
  std::uint16_t bound_port = 0;
  std::atomic<bool> stopping{false};
  std::thread acceptor;

  mutable std::mutex mu;  // guards everything below
  std::vector<std::shared_ptr<Client>> clients;
  std::vector<std::shared_ptr<Client>> joining;
  std::deque<Pending> commands;
  std::vector<std::string> warnings;

  std::ofstream session;
  bool recording = false;
  bool paused = false;

  Impl(scenario::Scenario& s, ServerConfig c) : scenario(s), config(std::move(c)) {}

  void warn(const std::string& w) {
    std::lock_guard lock(mu);
    warnings.push_back(w);
  }

  void send_error(Client& c, const std::string& id, const std::string& reason) {
    c.enqueue([&](std::uint64_t seq, std::uint64_t) { return encode(error_body(id, reason), "error", seq); }, false,
              config.queue_limit);
  }

  void handle_message(const std::shared_ptr<Client>& c, std::string_view text) {
    if (text.empty()) return;
    Command cmd;
    try {
      cmd = parse_command(text);
    } catch (const ProtocolError& e) {
      send_error(*c, e.id(), e.what());
      return;
    }
    bool duplicate;
    {
      std::lock_guard lock(c->mu);
      duplicate = !c->ids.insert(cmd.id).second;
    }
    if (duplicate) {
      send_error(*c, cmd.id, "duplicate command id");
      return;
    }
    std::lock_guard lock(mu);
    commands.push_back({c, std::move(cmd)});
  }

  void reader_loop(std::shared_ptr<Client> c) {
    std::string buf;
    char chunk[4096];
    bool handshake_done = false;
    ws::Decoder decoder;
    // A silent client is a plain TCP client.
    const auto transport_deadline = Clock::now() + std::chrono::milliseconds(300);
    while (!stopping) {
      pollfd p{c->fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r < 0 && errno != EINTR) break;
      if (r <= 0) {
        if (!handshake_done && buf.empty() && Clock::now() >= transport_deadline) {
          handshake_done = true;
          start_client(c);
        }
        continue;
      }
      const ssize_t n = ::recv(c->fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      std::string_view data(chunk, static_cast<std::size_t>(n));

      if (!handshake_done) {
        buf.append(data);
        if (buf.size() < 4 && std::string_view("GET ").substr(0, buf.size()) == buf) continue;
        if (buf.rfind("GET ", 0) == 0) {
          const auto end = buf.find("\r\n\r\n");
          if (end == std::string::npos) {
            if (buf.size() > 16384) break;
            continue;
          }
          const auto key = ws::upgrade_key(buf.substr(0, end + 2));
          if (!key) {
            send_all(c->fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
            break;
          }
          if (!send_all(c->fd, ws::handshake_response(*key))) break;
          c->websocket = true;
          data = std::string_view();
          std::string rest = buf.substr(end + 4);
          buf.clear();
          handshake_done = true;
          start_client(c);
          if (!rest.empty()) {
            try {
              for (auto& m : decoder.feed(rest)) handle_ws(c, m);
            } catch (const std::exception&) {
              break;
            }
          }
          continue;
        }
        handshake_done = true;
        start_client(c);
        data = std::string_view();
      }

      if (c->websocket) {
        bool close = false;
        try {
          for (auto& m : decoder.feed(data)) close = close || !handle_ws(c, m);
        } catch (const std::exception&) {
          close = true;
        }
        if (close) break;
        continue;
      }
      buf.append(data);
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        handle_message(c, line);
      }
      if (buf.size() > (1u << 20)) {
        send_error(*c, "", "message too long");
        buf.clear();
      }
    }
    c->close();
  }

  // Returns false when the peer closed.
  bool handle_ws(const std::shared_ptr<Client>& c, const ws::Message& m) {
    switch (m.opcode) {
      case ws::Opcode::TEXT: handle_message(c, m.payload); return true;
      case ws::Opcode::PING: {
        std::lock_guard lock(c->mu);
        c->queue.push_back({ws::encode_frame(m.payload, ws::Opcode::PONG), false});
        c->cv.notify_one();
        return true;
      }
      case ws::Opcode::CLOSE: {
        std::lock_guard lock(c->mu);
        c->queue.push_back({ws::encode_frame("", ws::Opcode::CLOSE), false});
        c->cv.notify_one();
        return false;
      }
      default: send_error(*c, "", "binary frames are not supported"); return true;
    }
  }

  void writer_loop(std::shared_ptr<Client> c) {
    for (;;) {
      Outgoing o;
      {
        std::unique_lock lock(c->mu);
        c->cv.wait(lock, [&] { return !c->queue.empty() || c->closed; });
        if (c->queue.empty()) return;
        o = std::move(c->queue.front());
        c->queue.pop_front();
        c->sending = true;
      }
      const bool ok = send_all(c->fd, o.text);
      {
        std::lock_guard lock(c->mu);
        c->sending = false;
      }
      if (!ok) {
        c->close();
        return;
      }
    }
  }

  // Called once the transport is known; the simulation loop sends the
  // snapshot and only then adds the client to the broadcast list.
  void start_client(const std::shared_ptr<Client>& c) {
    c->writer = std::thread([this, c] { writer_loop(c); });
    std::lock_guard lock(mu);
    joining.push_back(c);
  }

  void accept_loop() {
    while (!stopping) {
      pollfd p{listen_fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      auto c = std::make_shared<Client>();
      c->fd = fd;
      {
        std::lock_guard lock(mu);
        clients.push_back(c);  // owned here for shutdown; broadcast skips until joined
      }
      c->reader = std::thread([this, c] { reader_loop(c); });
    }
  }

  std::string run_state() const {
    if (scenario.done()) return "FINISHED";
    return paused ? "PAUSED" : "RUNNING";
  }

  void process_joins() {
    std::vector<std::shared_ptr<Client>> js;
    {
      std::lock_guard lock(mu);
      js.swap(joining);
    }
    if (js.empty()) return;
    const auto body = snapshot_body(scenario, run_state());
    for (auto& c : js) {
      c->enqueue([&](std::uint64_t seq, std::uint64_t) { return encode(body, "snapshot", seq); }, false,
                 config.queue_limit);
      std::lock_guard lock(mu);
      joined.insert(c.get());
    }
  }

  std::set<const Client*> joined;  // guarded by mu

  std::vector<std::shared_ptr<Client>> receivers() {
    std::lock_guard lock(mu);
    std::vector<std::shared_ptr<Client>> out;
    for (auto& c : clients)
      if (joined.count(c.get())) out.push_back(c);
    return out;
  }

  void broadcast(const nlohmann::json& body, std::string_view type, bool droppable) {
    for (auto& c : receivers()) {
      c->enqueue(
          [&](std::uint64_t seq, std::uint64_t dropped) {
            nlohmann::json b = body;
            b["dropped"] = dropped;
            return encode(std::move(b), type, seq);
          },
          droppable, config.queue_limit);
    }
  }

  void process_commands() {
    std::deque<Pending> batch;
    {
      std::lock_guard lock(mu);
      batch.swap(commands);
    }
    for (auto& p : batch) {
      const auto& cmd = p.command;
      double applied = scenario.time_s();
      try {
        if (cmd.verb == Verb::PAUSE) {
          paused = true;
        } else if (cmd.verb == Verb::RESUME) {
          paused = false;
        } else {
          if (scenario.done()) throw ConfigError("scenario has finished");
          applied = scenario.apply_now(*to_patch(cmd));
          if (recording) {
            session << scenario::format_patch(scenario.applied_patches().back()) << '\n';
            session.flush();
            if (!session) {
              recording = false;
              warn("session log write failed; recording disabled");
            }
          }
        }
      } catch (const std::exception& e) {
        send_error(*p.client, cmd.id, e.what());
        continue;
      }
      p.client->enqueue([&](std::uint64_t seq, std::uint64_t) { return encode(ack_body(cmd, applied), "ack", seq); },
                        false, config.queue_limit);
    }
  }

  void reap() {
    std::vector<std::shared_ptr<Client>> dead;
    {
      std::lock_guard lock(mu);
      for (auto it = clients.begin(); it != clients.end();) {
        bool closed;
        {
          std::lock_guard cl((*it)->mu);
          closed = (*it)->closed;
        }
        if (closed) {
          joined.erase(it->get());
          dead.push_back(*it);
          it = clients.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) join_client(*c);
  }

  static void join_client(Client& c) {
    c.close();
    if (c.reader.joinable() && c.reader.get_id() != std::this_thread::get_id()) c.reader.join();
    if (c.writer.joinable()) c.writer.join();
    if (c.fd >= 0) {
      ::close(c.fd);
      c.fd = -1;
    }
  }

  void shutdown_all() {
    stopping = true;
    if (acceptor.joinable()) acceptor.join();
    std::vector<std::shared_ptr<Client>> all;
    {
      std::lock_guard lock(mu);
      all.swap(clients);
      joined.clear();
    }
    for (auto& c : all) join_client(*c);
    if (listen_fd >= 0) {
      ::close(listen_fd);
      listen_fd = -1;
    }
  }
};

Server::Server(scenario::Scenario& s, ServerConfig c) : impl_(std::make_unique<Impl>(s, std::move(c))) {}

Server::~Server() {
  impl_->shutdown_all();
  impl_->scenario.on_frame(nullptr);
}

void Server::start() {
  auto& im = *impl_;
  im.listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (im.listen_fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(im.listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(im.config.port);
  if (::inet_pton(AF_INET, im.config.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(im.listen_fd);
    im.listen_fd = -1;
    throw std::runtime_error("bind: invalid address '" + im.config.bind_address + "'");
  }
  if (::bind(im.listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(im.listen_fd, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(im.listen_fd);
    im.listen_fd = -1;
    throw std::runtime_error("bind " + im.config.bind_address + ":" + std::to_string(im.config.port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(im.listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  im.bound_port = ntohs(addr.sin_port);

  if (im.config.session_log) {
    im.session.open(*im.config.session_log, std::ios::out | std::ios::trunc);
    im.recording = static_cast<bool>(im.session);
    if (!im.recording) im.warn("session log " + im.config.session_log->string() + " unwritable; recording disabled");
  }
  im.paused = im.config.start_paused;
  im.scenario.on_frame([&im](const scenario::TimelinePoint& p, const std::vector<detect::Alert>& alerts) {
    im.broadcast(frame_body(p, alerts, scenario::profile_summary(im.scenario.attacks(), im.scenario.jamming()),
                            im.run_state()),
                 "frame", true);
  });
  im.acceptor = std::thread([&im] { im.accept_loop(); });
}

std::uint16_t Server::port() const { return impl_->bound_port; }

void Server::run() {
  auto& im = *impl_;
  auto wall0 = Clock::now();
  double sim0 = im.scenario.time_s();
  bool was_paused = im.paused;
  while (!im.stopping && !im.scenario.done()) {
    im.process_joins();
    im.process_commands();
    im.reap();
    if (im.paused) {
      was_paused = true;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    if (was_paused) {
      wall0 = Clock::now();
      sim0 = im.scenario.time_s();
      was_paused = false;
    }
    im.scenario.step();
    if (im.config.speed > 0.0) {
      const auto due = wall0 + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>((im.scenario.time_s() - sim0) / im.config.speed));
      std::this_thread::sleep_until(due);
    }
  }
  im.process_joins();
  im.process_commands();
  im.broadcast(snapshot_body(im.scenario, im.run_state()), "snapshot", false);
  const auto until = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(im.config.linger_s));
  while (!im.stopping && Clock::now() < until) {
    im.process_joins();
    im.process_commands();
    bool drained = true;
    for (auto& c : im.receivers()) {
      std::lock_guard lock(c->mu);
      drained = drained && c->queue.empty() && !c->sending;
    }
    if (drained) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
}

void Server::stop() { impl_->stopping = true; }

std::vector<std::string> Server::warnings() const {
  std::lock_guard lock(impl_->mu);
  return impl_->warnings;
}

}  // namespace spamlab::console

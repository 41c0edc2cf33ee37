#pragma once

// Control and telemetry service. Clients connect over TCP (newline-delimited
// JSON) or WebSocket; every client receives a snapshot on join and then the
// same frame stream. Commands from all clients enter one queue drained by
// the simulation loop between blocks.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spamlab/scenario.hpp"

namespace spamlab::console {

inline constexpr std::uint16_t kDefaultPort = 7420;

/// SPAMLAB_PORT when set and valid, kDefaultPort otherwise.
std::uint16_t default_port();

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = kDefaultPort;  // 0 picks an ephemeral port
  std::size_t queue_limit = 256;      // outgoing messages per client; oldest frames dropped beyond
  std::optional<std::filesystem::path> session_log;
  double speed = 1.0;                 // scenario seconds per wall second; 0 runs unpaced
  bool start_paused = false;
  double linger_s = 1.0;              // wall time to keep flushing clients after the run ends
};

class Server {
 public:
  Server(scenario::Scenario& scenario, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. Throws std::runtime_error on bind failure.
  void start();
  std::uint16_t port() const;

  /// Drives the scenario to its end (or until stop()), serving commands.
  void run();
  void stop();

  std::vector<std::string> warnings() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spamlab::console

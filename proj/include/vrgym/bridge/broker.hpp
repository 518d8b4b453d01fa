#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "vrgym/bridge/envelope.hpp"

namespace vrgym::bridge {

struct BrokerStats {
  std::uint64_t connections_accepted = 0;
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_no_subscriber = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t slow_disconnects = 0;
};

struct BrokerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t tcp_port = kDefaultTcpPort;  // 0 picks a free port
  std::size_t max_queue_bytes = 64u << 20;
};

/// Topic router. Each connection gets its own reader and writer thread; a
/// slow subscriber only backs up its own outgoing queue.
class Broker {
 public:
  explicit Broker(BrokerOptions options = {});
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Binds and starts accepting. Throws on bind failure.
  void start();
  /// Starts the WebSocket gateway on `ws_port` (path /bridge). GET / serves
  /// files from `static_dir` when it is non-empty.
  void start_ws(std::uint16_t ws_port, std::string static_dir = {});
  void stop();

  std::uint16_t port() const;
  std::uint16_t ws_port() const;
  BrokerStats stats() const;
  std::size_t connection_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Starts a broker on `port`.
std::unique_ptr<Broker> serve(std::uint16_t port, const std::string& host = "127.0.0.1");
/// Attaches a WebSocket gateway that mirrors the broker's TCP protocol.
void ws_gateway(Broker& broker, std::uint16_t ws_port, const std::string& static_dir = {});

}  // namespace vrgym::bridge

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "vrgym/bridge/envelope.hpp"

namespace vrgym::bridge {

/// TCP bridge peer. Incoming data envelopes are queued for receive() unless a
/// handler is installed, in which case the reader thread calls it in arrival
/// order.
class BridgeClient {
 public:
  using Handler = std::function<void(Envelope)>;

  BridgeClient(const std::string& host, std::uint16_t port);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  void set_handler(Handler handler);

  void advertise(const std::string& topic, const std::string& type);
  void unadvertise(const std::string& topic);
  void subscribe(const std::string& pattern);
  /// Subscribes and waits until the broker has registered the subscription.
  void subscribe_sync(const std::string& pattern, int timeout_ms = 2000);
  void unsubscribe(const std::string& pattern);

  /// Publishes with the next per-topic sequence number; returns it.
  std::uint64_t publish(const std::string& topic, const std::string& type, nlohmann::json data);
  void send(const Envelope& envelope);
  void send_raw(std::string_view bytes);

  std::optional<Envelope> receive(int timeout_ms);
  /// Round trip through the broker; nullopt on timeout.
  std::optional<std::chrono::nanoseconds> ping(int timeout_ms = 2000);

  bool connected() const;
  std::uint64_t crc_failures() const;
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct StreamStats {
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
  std::uint64_t bytes = 0;
  std::uint64_t loss = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t crc_failures = 0;
  double elapsed = 0.0;     // seconds
  double throughput = 0.0;  // payload bytes per second
  std::string error;        // connection problems, if any

  nlohmann::json to_json() const;
};

/// Sends `count` envelopes of `payload_bytes` random characters on /bench and
/// verifies them on a second, loopback subscriber connection.
StreamStats benchmark_throughput(std::size_t payload_bytes, std::size_t count, const std::string& host,
                                 std::uint16_t port, std::uint64_t seed = 1);

}  // namespace vrgym::bridge

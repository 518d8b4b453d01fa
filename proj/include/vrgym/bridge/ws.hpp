#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace vrgym::bridge {

enum class WsOpcode : std::uint8_t {
  continuation = 0x0,
  text = 0x1,
  binary = 0x2,
  close = 0x8,
  ping = 0x9,
  pong = 0xA,
};

inline constexpr std::uint16_t kWsCloseNormal = 1000;
inline constexpr std::uint16_t kWsCloseProtocolError = 1002;
inline constexpr std::string_view kWsPath = "/bridge";

/// Sec-WebSocket-Accept value for a client key.
std::string ws_accept_key(std::string_view client_key);

/// Encodes a single unfragmented frame. Client frames must be masked.
std::string ws_encode_frame(WsOpcode op, std::string_view payload,
                            std::optional<std::uint32_t> mask = std::nullopt);

struct WsMessage {
  WsOpcode opcode = WsOpcode::text;
  std::string payload;
  /// Close code when opcode == close.
  std::uint16_t close_code = 0;
};

/// Minimal blocking WebSocket client for tools and tests.
class WsClient {
 public:
  WsClient(const std::string& host, std::uint16_t port, std::string_view path = kWsPath);
  ~WsClient();
  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  void send_text(std::string_view text);
  void send_binary(std::string_view bytes);
  /// Next data or close message; nullopt on timeout. Pings are answered.
  std::optional<WsMessage> receive(int timeout_ms);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vrgym::bridge

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "net.hpp"
#include "vrgym/bridge/ws.hpp"

namespace vrgym::bridge::ws_io {

struct RawFrame {
  bool fin = true;
  std::uint8_t rsv = 0;
  bool masked = false;
  WsOpcode opcode = WsOpcode::text;
  std::string payload;
};

// nullopt on clean EOF before a frame starts.
std::optional<RawFrame> read_frame(const net::Socket& sock, std::size_t max_payload);
std::string close_payload(std::uint16_t code, std::string_view reason);
std::uint16_t close_code(std::string_view payload);
std::string header_value(std::string_view request, std::string_view name);
std::string read_http_head(const net::Socket& sock, std::size_t limit);

}  // namespace vrgym::bridge::ws_io

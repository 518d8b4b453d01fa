#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vrgym::bridge {

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;
inline constexpr std::uint16_t kDefaultTcpPort = 9763;
inline constexpr std::uint16_t kDefaultWsPort = 9764;
inline constexpr std::string_view kControlType = "Control";

enum class FrameErrorCode { oversize, invalid_utf8, malformed, missing_key, crc_mismatch, bad_topic };

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FrameErrorCode code() const { return code_; }

 private:
  FrameErrorCode code_;
};

struct Envelope {
  std::string topic;
  std::uint64_t seq = 0;
  std::uint64_t stamp_ns = 0;
  std::string type;
  std::uint32_t crc32 = 0;
  nlohmann::json data;

  bool operator==(const Envelope& o) const {
    return topic == o.topic && seq == o.seq && stamp_ns == o.stamp_ns && type == o.type &&
           crc32 == o.crc32 && data == o.data;
  }
};

enum class ControlOp { advertise, unadvertise, subscribe, unsubscribe, ping, pong };

struct ControlMessage {
  ControlOp op = ControlOp::ping;
  std::string topic;
  std::string type;
};

/// IEEE 802.3 CRC-32.
std::uint32_t crc32(std::string_view bytes);

/// Canonical serialization of a JSON value: sorted keys, shortest round-trip
/// numbers. The envelope checksum covers exactly these bytes.
std::string canonical_dump(const nlohmann::json& value);

std::uint64_t now_ns();

/// Builds an envelope with its checksum filled in.
Envelope make_envelope(std::string topic, std::uint64_t seq, std::uint64_t stamp_ns,
                       std::string type, nlohmann::json data);

Envelope make_control(const ControlMessage& msg, std::uint64_t seq, std::uint64_t stamp_ns);
bool is_control(const Envelope& e);
ControlMessage parse_control(const Envelope& e);
std::string_view to_string(ControlOp op);

/// JSON text of the envelope without framing (the WebSocket payload form).
std::string encode_json(const Envelope& e);
Envelope decode_json(std::string_view text);

/// 4-byte big-endian length followed by the envelope JSON text.
std::string encode_frame(const Envelope& e);
/// Decodes one complete frame; `bytes` must hold exactly one frame.
Envelope decode_frame(std::string_view bytes);

bool valid_topic(std::string_view topic);
/// Topic pattern match; `*` matches exactly one path segment.
bool topic_matches(std::string_view pattern, std::string_view topic);

/// Incremental stream decoder. Frames split at arbitrary byte positions are
/// reassembled. Frames failing the checksum are dropped and counted; any other
/// framing error is fatal for the stream and thrown.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Next complete frame's JSON text, without parsing it.
  std::optional<std::string> next_text();
  std::optional<Envelope> next();

  std::size_t buffered() const { return buffer_.size() - offset_; }
  std::uint64_t crc_failures() const { return crc_failures_; }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
  std::uint64_t crc_failures_ = 0;
};

}  // namespace vrgym::bridge

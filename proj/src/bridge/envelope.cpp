#include "vrgym/bridge/envelope.hpp"

#include <chrono>
#include <cstring>

#include <zlib.h>

namespace vrgym::bridge {

using nlohmann::json;

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string canonical_dump(const json& value) {
  try {
    return value.dump();
  } catch (const json::type_error& e) {
    throw FrameError(FrameErrorCode::invalid_utf8, std::string("invalid UTF-8 in payload: ") + e.what());
  }
}

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

bool valid_topic(std::string_view topic) {
  if (topic.size() < 2 || topic.front() != '/' || topic.back() == '/') return false;
  for (std::size_t i = 0; i < topic.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(topic[i]);
    if (c <= 0x20 || c == 0x7f) return false;
    if (c == '/' && i + 1 < topic.size() && topic[i + 1] == '/') return false;
  }
  return true;
}

bool topic_matches(std::string_view pattern, std::string_view topic) {
  while (true) {
    std::size_t pp = pattern.find('/', 1);
    std::size_t tp = topic.find('/', 1);
    std::string_view pseg = pattern.substr(0, pp);
    std::string_view tseg = topic.substr(0, tp);
    if (pseg != "/*" && pseg != tseg) return false;
    if (pseg == "/*" && tseg.size() < 2) return false;
    bool pend = pp == std::string_view::npos, tend = tp == std::string_view::npos;
    if (pend || tend) return pend && tend;
    pattern.remove_prefix(pp);
    topic.remove_prefix(tp);
  }
}

Envelope make_envelope(std::string topic, std::uint64_t seq, std::uint64_t stamp_ns,
                       std::string type, json data) {
  Envelope e{std::move(topic), seq, stamp_ns, std::move(type), 0, std::move(data)};
  e.crc32 = crc32(canonical_dump(e.data));
  return e;
}

std::string_view to_string(ControlOp op) {
  switch (op) {
    case ControlOp::advertise: return "ADVERTISE";
    case ControlOp::unadvertise: return "UNADVERTISE";
    case ControlOp::subscribe: return "SUBSCRIBE";
    case ControlOp::unsubscribe: return "UNSUBSCRIBE";
    case ControlOp::ping: return "PING";
    case ControlOp::pong: return "PONG";
  }
  return "PING";
}

Envelope make_control(const ControlMessage& msg, std::uint64_t seq, std::uint64_t stamp_ns) {
  json data = {{"op", std::string(to_string(msg.op))}};
  if (msg.op != ControlOp::ping && msg.op != ControlOp::pong) data["topic"] = msg.topic;
  if (msg.op == ControlOp::advertise) data["type"] = msg.type;
  return make_envelope("", seq, stamp_ns, std::string(kControlType), std::move(data));
}

bool is_control(const Envelope& e) { return e.topic.empty() && e.type == kControlType; }

ControlMessage parse_control(const Envelope& e) {
  if (!is_control(e) || !e.data.is_object() || !e.data.contains("op") || !e.data["op"].is_string())
    throw FrameError(FrameErrorCode::malformed, "not a control message");
  const std::string op = e.data["op"].get<std::string>();
  ControlMessage msg;
  bool found = false;
  for (ControlOp candidate : {ControlOp::advertise, ControlOp::unadvertise, ControlOp::subscribe,
                              ControlOp::unsubscribe, ControlOp::ping, ControlOp::pong}) {
    if (to_string(candidate) == op) {
      msg.op = candidate;
      found = true;
    }
  }
  if (!found) throw FrameError(FrameErrorCode::malformed, "unknown control op '" + op + "'");
  if (msg.op != ControlOp::ping && msg.op != ControlOp::pong) {
    if (!e.data.contains("topic") || !e.data["topic"].is_string())
      throw FrameError(FrameErrorCode::missing_key, op + " requires a topic");
    msg.topic = e.data["topic"].get<std::string>();
  }
  if (msg.op == ControlOp::advertise) {
    if (!e.data.contains("type") || !e.data["type"].is_string())
      throw FrameError(FrameErrorCode::missing_key, "ADVERTISE requires a type");
    msg.type = e.data["type"].get<std::string>();
  }
  return msg;
}

namespace {

void check_topic(const Envelope& e) {
  if (is_control(e)) return;
  if (!valid_topic(e.topic)) throw FrameError(FrameErrorCode::bad_topic, "invalid topic '" + e.topic + "'");
}

}  // namespace

std::string encode_json(const Envelope& e) {
  check_topic(e);
  const std::string data = canonical_dump(e.data);
  if (crc32(data) != e.crc32) throw FrameError(FrameErrorCode::crc_mismatch, "envelope checksum does not match data");
  const std::string topic = canonical_dump(json(e.topic));
  const std::string type = canonical_dump(json(e.type));
  std::string out;
  out.reserve(data.size() + topic.size() + type.size() + 96);
  // Keys in sorted order, identical to json::dump() of the whole object.
  out += "{\"crc32\":";
  out += std::to_string(e.crc32);
  out += ",\"data\":";
  out += data;
  out += ",\"seq\":";
  out += std::to_string(e.seq);
  out += ",\"stamp_ns\":";
  out += std::to_string(e.stamp_ns);
  out += ",\"topic\":";
  out += topic;
  out += ",\"type\":";
  out += type;
  out += "}";
  if (out.size() > kMaxFrameBytes)
    throw FrameError(FrameErrorCode::oversize, "frame of " + std::to_string(out.size()) + " bytes exceeds 16 MiB");
  return out;
}

Envelope decode_json(std::string_view text) {
  if (text.size() > kMaxFrameBytes) throw FrameError(FrameErrorCode::oversize, "frame exceeds 16 MiB");
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& err) {
    std::string what = err.what();
    if (what.find("UTF-8") != std::string::npos)
      throw FrameError(FrameErrorCode::invalid_utf8, what);
    throw FrameError(FrameErrorCode::malformed, what);
  }
  if (!j.is_object()) throw FrameError(FrameErrorCode::malformed, "envelope must be a JSON object");
  static constexpr const char* kKeys[] = {"crc32", "data", "seq", "stamp_ns", "topic", "type"};
  for (const char* key : kKeys)
    if (!j.contains(key)) throw FrameError(FrameErrorCode::missing_key, std::string("missing key '") + key + "'");
  if (j.size() != std::size(kKeys)) throw FrameError(FrameErrorCode::malformed, "unexpected envelope keys");

  auto unsigned_field = [&](const char* key) {
    const json& v = j[key];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw FrameError(FrameErrorCode::malformed, std::string("'") + key + "' must be an unsigned integer");
    return v.get<std::uint64_t>();
  };
  Envelope e;
  std::uint64_t crc = unsigned_field("crc32");
  if (crc > 0xffffffffu) throw FrameError(FrameErrorCode::malformed, "'crc32' out of range");
  e.crc32 = static_cast<std::uint32_t>(crc);
  e.seq = unsigned_field("seq");
  e.stamp_ns = unsigned_field("stamp_ns");
  if (!j["topic"].is_string() || !j["type"].is_string())
    throw FrameError(FrameErrorCode::malformed, "'topic' and 'type' must be strings");
  e.topic = j["topic"].get<std::string>();
  e.type = j["type"].get<std::string>();
  e.data = std::move(j["data"]);
  check_topic(e);
  if (crc32(canonical_dump(e.data)) != e.crc32)
    throw FrameError(FrameErrorCode::crc_mismatch, "checksum mismatch on topic '" + e.topic + "'");
  return e;
}

std::string encode_frame(const Envelope& e) {
  std::string body = encode_json(e);
  std::string out(4, '\0');
  const auto n = static_cast<std::uint32_t>(body.size());
  out[0] = static_cast<char>((n >> 24) & 0xff);
  out[1] = static_cast<char>((n >> 16) & 0xff);
  out[2] = static_cast<char>((n >> 8) & 0xff);
  out[3] = static_cast<char>(n & 0xff);
  out += body;
  return out;
}

namespace {

std::uint32_t read_length(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

}  // namespace

Envelope decode_frame(std::string_view bytes) {
  if (bytes.size() < 4) throw FrameError(FrameErrorCode::malformed, "truncated frame header");
  std::uint32_t n = read_length(bytes);
  if (n > kMaxFrameBytes) throw FrameError(FrameErrorCode::oversize, "frame length exceeds 16 MiB");
  if (bytes.size() != 4 + static_cast<std::size_t>(n))
    throw FrameError(FrameErrorCode::malformed, "frame length does not match buffer");
  return decode_json(bytes.substr(4));
}

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  buffer_.append(bytes.data(), bytes.size());
}

std::optional<std::string> FrameDecoder::next_text() {
  if (buffered() < 4) return std::nullopt;
  std::uint32_t n = read_length(std::string_view(buffer_).substr(offset_));
  if (n > kMaxFrameBytes) throw FrameError(FrameErrorCode::oversize, "frame length exceeds 16 MiB");
  if (buffered() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string text = buffer_.substr(offset_ + 4, n);
  offset_ += 4 + n;
  return text;
}

std::optional<Envelope> FrameDecoder::next() {
  while (auto text = next_text()) {
    try {
      return decode_json(*text);
    } catch (const FrameError& err) {
      if (err.code() != FrameErrorCode::crc_mismatch) throw;
      ++crc_failures_;
    }
  }
  return std::nullopt;
}

}  // namespace vrgym::bridge

#include "vrgym/bridge/ws.hpp"

#include <poll.h>

#include <random>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "net.hpp"
#include "ws_io.hpp"

namespace vrgym::bridge {

std::string ws_accept_key(std::string_view client_key) {
  std::string joined(client_key);
  joined += "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

std::string ws_encode_frame(WsOpcode op, std::string_view payload, std::optional<std::uint32_t> mask) {
  std::string out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xffff) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  unsigned char key[4] = {static_cast<unsigned char>(*mask >> 24), static_cast<unsigned char>(*mask >> 16),
                          static_cast<unsigned char>(*mask >> 8), static_cast<unsigned char>(*mask)};
  out.append(reinterpret_cast<char*>(key), 4);
  for (std::size_t i = 0; i < payload.size(); ++i)
    out.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return out;
}

namespace ws_io {

std::optional<RawFrame> read_frame(const net::Socket& sock, std::size_t max_payload) {
  unsigned char hdr[2];
  if (!sock.recv_exact(reinterpret_cast<char*>(hdr), 2)) return std::nullopt;
  RawFrame f;
  f.fin = hdr[0] & 0x80;
  f.rsv = hdr[0] & 0x70;
  f.opcode = static_cast<WsOpcode>(hdr[0] & 0x0f);
  f.masked = hdr[1] & 0x80;
  std::uint64_t n = hdr[1] & 0x7f;
  if (n == 126) {
    unsigned char ext[2];
    sock.recv_exact(reinterpret_cast<char*>(ext), 2);
    n = (std::uint64_t{ext[0]} << 8) | ext[1];
  } else if (n == 127) {
    unsigned char ext[8];
    sock.recv_exact(reinterpret_cast<char*>(ext), 8);
    n = 0;
    for (unsigned char b : ext) n = (n << 8) | b;
  }
  if (n > max_payload) throw net::NetError("websocket frame too large");
  unsigned char key[4] = {0, 0, 0, 0};
  if (f.masked) sock.recv_exact(reinterpret_cast<char*>(key), 4);
  f.payload.resize(static_cast<std::size_t>(n));
  if (n > 0 && !sock.recv_exact(f.payload.data(), f.payload.size()))
    throw net::NetError("connection closed mid-frame");
  if (f.masked)
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
  return f;
}

std::string close_payload(std::uint16_t code, std::string_view reason) {
  std::string p;
  p.push_back(static_cast<char>(code >> 8));
  p.push_back(static_cast<char>(code & 0xff));
  p.append(reason);
  return p;
}

std::uint16_t close_code(std::string_view payload) {
  if (payload.size() < 2) return kWsCloseNormal;
  return static_cast<std::uint16_t>((static_cast<unsigned char>(payload[0]) << 8) |
                                    static_cast<unsigned char>(payload[1]));
}

std::string header_value(std::string_view request, std::string_view name) {
  std::size_t pos = 0;
  while (pos < request.size()) {
    std::size_t end = request.find("\r\n", pos);
    if (end == std::string_view::npos) end = request.size();
    std::string_view line = request.substr(pos, end - pos);
    std::size_t colon = line.find(':');
    if (colon != std::string_view::npos && colon == name.size()) {
      bool same = true;
      for (std::size_t i = 0; i < name.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(line[i])) != std::tolower(static_cast<unsigned char>(name[i])))
          same = false;
      if (same) {
        std::string_view v = line.substr(colon + 1);
        while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
        while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
        return std::string(v);
      }
    }
    pos = end + 2;
  }
  return {};
}

std::string read_http_head(const net::Socket& sock, std::size_t limit) {
  std::string head;
  char c;
  while (head.size() < limit) {
    if (sock.recv_some(&c, 1) == 0) break;
    head.push_back(c);
    if (head.size() >= 4 && head.compare(head.size() - 4, 4, "\r\n\r\n") == 0) return head;
  }
  throw net::NetError("incomplete HTTP request head");
}

}  // namespace ws_io

struct WsClient::Impl {
  net::Socket sock;
  std::mt19937 rng{std::random_device{}()};
  std::string partial;
  WsOpcode partial_op = WsOpcode::text;
};

WsClient::WsClient(const std::string& host, std::uint16_t port, std::string_view path)
    : impl_(std::make_unique<Impl>()) {
  impl_->sock = net::connect_tcp(host, port);
  const std::string key = "dnJneW0tYnJpZGdlLWtleQ==";
  std::string req = "GET " + std::string(path) + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                    "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                    "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  impl_->sock.send_all(req);
  std::string head = ws_io::read_http_head(impl_->sock, 8192);
  if (head.rfind("HTTP/1.1 101", 0) != 0) throw net::NetError("websocket upgrade refused: " + head.substr(0, head.find("\r\n")));
  if (ws_io::header_value(head, "Sec-WebSocket-Accept") != ws_accept_key(key))
    throw net::NetError("bad Sec-WebSocket-Accept");
}

WsClient::~WsClient() = default;

void WsClient::send_text(std::string_view text) {
  impl_->sock.send_all(ws_encode_frame(WsOpcode::text, text, impl_->rng()));
}

void WsClient::send_binary(std::string_view bytes) {
  impl_->sock.send_all(ws_encode_frame(WsOpcode::binary, bytes, impl_->rng()));
}

std::optional<WsMessage> WsClient::receive(int timeout_ms) {
  while (true) {
    pollfd pfd{impl_->sock.fd(), POLLIN, 0};
    if (::poll(&pfd, 1, timeout_ms) <= 0) return std::nullopt;
    auto f = ws_io::read_frame(impl_->sock, 64u << 20);
    if (!f) return WsMessage{WsOpcode::close, {}, 1006};
    switch (f->opcode) {
      case WsOpcode::ping:
        impl_->sock.send_all(ws_encode_frame(WsOpcode::pong, f->payload, impl_->rng()));
        continue;
      case WsOpcode::pong:
        continue;
      case WsOpcode::close:
        return WsMessage{WsOpcode::close, f->payload, ws_io::close_code(f->payload)};
      case WsOpcode::continuation:
        impl_->partial += f->payload;
        break;
      default:
        impl_->partial_op = f->opcode;
        impl_->partial = std::move(f->payload);
        break;
    }
    if (f->fin) return WsMessage{impl_->partial_op, std::move(impl_->partial), 0};
  }
}

void WsClient::close() {
  if (!impl_->sock.valid()) return;
  try {
    impl_->sock.send_all(ws_encode_frame(WsOpcode::close, ws_io::close_payload(kWsCloseNormal, ""), impl_->rng()));
  } catch (const net::NetError&) {
  }
  impl_->sock.close();
}

}  // namespace vrgym::bridge

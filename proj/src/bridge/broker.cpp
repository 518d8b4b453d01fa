#include "vrgym/bridge/broker.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "net.hpp"
#include "vrgym/bridge/ws.hpp"
#include "ws_io.hpp"

namespace vrgym::bridge {

namespace {

enum class Transport { tcp, ws };

struct Conn {
  std::uint64_t id = 0;
  Transport transport = Transport::tcp;
  net::Socket sock;

  std::mutex m;
  std::condition_variable cv;
  std::deque<std::string> queue;  // transport-formatted bytes
  std::size_t queued_bytes = 0;
  bool closing = false;       // drop everything and stop
  bool finish = false;        // drain the queue, then stop
  bool upgraded = false;      // websocket handshake completed

  // Guarded by the broker's routing mutex.
  std::vector<std::string> subscriptions;
  std::set<std::string> advertised;

  std::uint64_t control_seq = 0;
  std::thread reader;
  std::thread writer;
  std::atomic<bool> reader_done{false};
  std::atomic<bool> writer_done{false};
};

std::string tcp_frame(std::string_view text) {
  std::string out(4, '\0');
  const auto n = static_cast<std::uint32_t>(text.size());
  out[0] = static_cast<char>(n >> 24);
  out[1] = static_cast<char>(n >> 16);
  out[2] = static_cast<char>(n >> 8);
  out[3] = static_cast<char>(n);
  out += text;
  return out;
}

class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace

struct Broker::Impl {
  BrokerOptions options;
  net::Socket listener;
  net::Socket ws_listener;
  std::uint16_t bound_port = 0;
  std::uint16_t bound_ws_port = 0;
  std::string static_dir;
  std::atomic<bool> running{false};
  std::thread acceptor;
  std::thread ws_acceptor;

  mutable std::shared_mutex routes;
  std::map<std::uint64_t, std::shared_ptr<Conn>> conns;
  std::atomic<std::uint64_t> next_id{1};

  std::atomic<std::uint64_t> accepted{0}, published{0}, delivered{0}, dropped{0}, crc_failures{0},
      protocol_errors{0}, slow_disconnects{0};

  void accept_loop(const net::Socket& lsock, Transport transport) {
    while (running) {
      net::Socket s = net::accept_with_timeout(lsock, 100);
      reap();
      if (!s.valid()) continue;
      auto conn = std::make_shared<Conn>();
      conn->id = next_id++;
      conn->transport = transport;
      conn->sock = std::move(s);
      ++accepted;
      {
        std::unique_lock lock(routes);
        conns.emplace(conn->id, conn);
      }
      conn->writer = std::thread([this, conn] { write_loop(*conn); });
      conn->reader = std::thread([this, conn] {
        if (conn->transport == Transport::tcp)
          tcp_read_loop(*conn);
        else
          ws_read_loop(*conn);
        // Let queued replies such as a close frame go out before hanging up.
        close_conn(*conn, true);
        conn->reader_done = true;
      });
    }
  }

  void reap() {
    std::vector<std::shared_ptr<Conn>> dead;
    {
      std::unique_lock lock(routes);
      for (auto it = conns.begin(); it != conns.end();) {
        if (it->second->reader_done && it->second->writer_done) {
          dead.push_back(it->second);
          it = conns.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) {
      if (c->reader.joinable()) c->reader.join();
      if (c->writer.joinable()) c->writer.join();
    }
  }

  void close_conn(Conn& c, bool drain) {
    {
      std::lock_guard lock(c.m);
      if (drain)
        c.finish = true;
      else
        c.closing = true;
    }
    c.cv.notify_all();
    if (!drain) c.sock.shutdown();
    std::unique_lock lock(routes);
    c.subscriptions.clear();
    c.advertised.clear();
  }

  void enqueue_bytes(Conn& c, std::string bytes) {
    {
      std::lock_guard lock(c.m);
      if (c.closing || c.finish) return;
      if (c.queued_bytes + bytes.size() > options.max_queue_bytes) {
        c.closing = true;
        ++slow_disconnects;
      } else {
        c.queued_bytes += bytes.size();
        c.queue.push_back(std::move(bytes));
      }
    }
    c.cv.notify_all();
    std::lock_guard lock(c.m);
    if (c.closing) c.sock.shutdown();
  }

  void enqueue_text(Conn& c, std::string_view text) {
    if (c.transport == Transport::tcp)
      enqueue_bytes(c, tcp_frame(text));
    else
      enqueue_bytes(c, ws_encode_frame(WsOpcode::text, text));
  }

  void write_loop(Conn& c) {
    while (true) {
      std::string bytes;
      {
        std::unique_lock lock(c.m);
        c.cv.wait(lock, [&] { return c.closing || c.finish || !c.queue.empty(); });
        if (c.closing) break;
        if (c.queue.empty()) break;  // finish requested and drained
        bytes = std::move(c.queue.front());
        c.queue.pop_front();
        c.queued_bytes -= bytes.size();
      }
      try {
        c.sock.send_all(bytes);
      } catch (const net::NetError&) {
        std::lock_guard lock(c.m);
        c.closing = true;
        break;
      }
    }
    c.sock.shutdown();
    c.writer_done = true;
  }

  void handle_text(Conn& c, std::string_view text) {
    Envelope e;
    try {
      e = decode_json(text);
    } catch (const FrameError& err) {
      if (err.code() == FrameErrorCode::crc_mismatch) {
        ++crc_failures;
        return;
      }
      throw ProtocolViolation(err.what());
    }
    if (is_control(e)) {
      ControlMessage msg;
      try {
        msg = parse_control(e);
      } catch (const FrameError& err) {
        throw ProtocolViolation(err.what());
      }
      handle_control(c, e, msg);
      return;
    }
    route(e.topic, text);
  }

  void handle_control(Conn& c, const Envelope& e, const ControlMessage& msg) {
    switch (msg.op) {
      case ControlOp::subscribe: {
        if (!valid_topic(msg.topic)) throw ProtocolViolation("invalid subscription '" + msg.topic + "'");
        std::unique_lock lock(routes);
        if (std::find(c.subscriptions.begin(), c.subscriptions.end(), msg.topic) == c.subscriptions.end())
          c.subscriptions.push_back(msg.topic);
        break;
      }
      case ControlOp::unsubscribe: {
        std::unique_lock lock(routes);
        std::erase(c.subscriptions, msg.topic);
        break;
      }
      case ControlOp::advertise: {
        if (!valid_topic(msg.topic)) throw ProtocolViolation("invalid topic '" + msg.topic + "'");
        std::unique_lock lock(routes);
        c.advertised.insert(msg.topic);
        break;
      }
      case ControlOp::unadvertise: {
        std::unique_lock lock(routes);
        c.advertised.erase(msg.topic);
        break;
      }
      case ControlOp::ping: {
        Envelope pong = make_control({ControlOp::pong, {}, {}}, ++c.control_seq, e.stamp_ns);
        enqueue_text(c, encode_json(pong));
        break;
      }
      case ControlOp::pong:
        break;
    }
  }

  void route(const std::string& topic, std::string_view text) {
    ++published;
    std::vector<std::shared_ptr<Conn>> targets;
    {
      std::shared_lock lock(routes);
      for (const auto& [id, conn] : conns) {
        for (const auto& pattern : conn->subscriptions) {
          if (topic_matches(pattern, topic)) {
            targets.push_back(conn);
            break;
          }
        }
      }
    }
    if (targets.empty()) {
      ++dropped;
      return;
    }
    for (auto& t : targets) {
      enqueue_text(*t, text);
      ++delivered;
    }
  }

  void tcp_read_loop(Conn& c) {
    FrameDecoder decoder;
    std::vector<char> buf(1 << 16);
    try {
      while (running) {
        std::size_t n = c.sock.recv_some(buf.data(), buf.size());
        if (n == 0) return;
        decoder.feed(std::string_view(buf.data(), n));
        while (auto text = decoder.next_text()) handle_text(c, *text);
      }
    } catch (const ProtocolViolation&) {
      ++protocol_errors;
    } catch (const FrameError&) {
      ++protocol_errors;
    } catch (const net::NetError&) {
    }
  }

  void serve_http(Conn& c, const std::string& method, const std::string& path) {
    auto respond = [&](const std::string& status, const std::string& type, const std::string& body) {
      std::ostringstream os;
      os << "HTTP/1.1 " << status << "\r\nContent-Type: " << type << "\r\nContent-Length: " << body.size()
         << "\r\nConnection: close\r\n\r\n"
         << body;
      enqueue_bytes(c, os.str());
    };
    if (method != "GET" || static_dir.empty() || path.find("..") != std::string::npos) {
      respond("404 Not Found", "text/plain", "not found\n");
      return;
    }
    std::string rel = path == "/" ? "/index.html" : path.substr(0, path.find('?'));
    std::ifstream in(static_dir + rel, std::ios::binary);
    if (!in) {
      respond("404 Not Found", "text/plain", "not found\n");
      return;
    }
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string type = "application/octet-stream";
    auto ends = [&](std::string_view ext) {
      return rel.size() >= ext.size() && rel.compare(rel.size() - ext.size(), ext.size(), ext) == 0;
    };
    if (ends(".html")) type = "text/html";
    if (ends(".js")) type = "text/javascript";
    if (ends(".css")) type = "text/css";
    respond("200 OK", type, body);
  }

  void ws_close(Conn& c, std::uint16_t code, std::string_view reason) {
    enqueue_bytes(c, ws_encode_frame(WsOpcode::close, ws_io::close_payload(code, reason)));
  }

  void ws_read_loop(Conn& c) {
    try {
      std::string head = ws_io::read_http_head(c.sock, 16384);
      std::istringstream line(head.substr(0, head.find("\r\n")));
      std::string method, path, version;
      line >> method >> path >> version;
      std::string upgrade = ws_io::header_value(head, "Upgrade");
      std::string key = ws_io::header_value(head, "Sec-WebSocket-Key");
      bool is_ws = !key.empty() && (upgrade == "websocket" || upgrade == "WebSocket");
      if (!is_ws || path != kWsPath) {
        if (is_ws)
          enqueue_bytes(c, "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        else
          serve_http(c, method, path);
        close_conn(c, true);
        return;
      }
      enqueue_bytes(c, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                       "Sec-WebSocket-Accept: " + ws_accept_key(key) + "\r\n\r\n");
      c.upgraded = true;

      std::string message;
      bool in_message = false;
      while (running) {
        auto f = ws_io::read_frame(c.sock, kMaxFrameBytes);
        if (!f) return;
        if (!f->masked || f->rsv) {
          ++protocol_errors;
          ws_close(c, kWsCloseProtocolError, "client frames must be masked");
          close_conn(c, true);
          return;
        }
        switch (f->opcode) {
          case WsOpcode::ping:
            enqueue_bytes(c, ws_encode_frame(WsOpcode::pong, f->payload));
            continue;
          case WsOpcode::pong:
            continue;
          case WsOpcode::close:
            ws_close(c, kWsCloseNormal, "");
            close_conn(c, true);
            return;
          case WsOpcode::binary:
            ++protocol_errors;
            ws_close(c, kWsCloseProtocolError, "binary frames are not supported");
            close_conn(c, true);
            return;
          case WsOpcode::text:
            message = std::move(f->payload);
            in_message = true;
            break;
          case WsOpcode::continuation:
            if (!in_message) throw ProtocolViolation("unexpected continuation frame");
            message += f->payload;
            break;
          default:
            throw ProtocolViolation("unknown opcode");
        }
        if (!f->fin) continue;
        in_message = false;
        try {
          handle_text(c, message);
        } catch (const ProtocolViolation& err) {
          ++protocol_errors;
          ws_close(c, kWsCloseProtocolError, err.what());
          close_conn(c, true);
          return;
        }
      }
    } catch (const ProtocolViolation& err) {
      ++protocol_errors;
      if (c.upgraded) ws_close(c, kWsCloseProtocolError, err.what());
      close_conn(c, true);
    } catch (const net::NetError&) {
    }
  }
};

Broker::Broker(BrokerOptions options) : impl_(std::make_unique<Impl>()) { impl_->options = std::move(options); }

Broker::~Broker() { stop(); }

void Broker::start() {
  if (impl_->running) return;
  impl_->listener = net::listen_tcp(impl_->options.host, impl_->options.tcp_port);
  impl_->bound_port = net::local_port(impl_->listener);
  impl_->running = true;
  impl_->acceptor = std::thread([this] { impl_->accept_loop(impl_->listener, Transport::tcp); });
}

void Broker::start_ws(std::uint16_t ws_port, std::string static_dir) {
  if (!impl_->running) throw net::NetError("broker is not running");
  if (impl_->ws_listener.valid()) throw net::NetError("websocket gateway already running");
  impl_->static_dir = std::move(static_dir);
  impl_->ws_listener = net::listen_tcp(impl_->options.host, ws_port);
  impl_->bound_ws_port = net::local_port(impl_->ws_listener);
  impl_->ws_acceptor = std::thread([this] { impl_->accept_loop(impl_->ws_listener, Transport::ws); });
}

void Broker::stop() {
  if (!impl_->running.exchange(false)) return;
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  if (impl_->ws_acceptor.joinable()) impl_->ws_acceptor.join();
  std::vector<std::shared_ptr<Conn>> all;
  {
    std::unique_lock lock(impl_->routes);
    for (auto& [id, c] : impl_->conns) all.push_back(c);
    impl_->conns.clear();
  }
  for (auto& c : all) {
    {
      std::lock_guard lock(c->m);
      c->closing = true;
    }
    c->cv.notify_all();
    c->sock.shutdown();
  }
  for (auto& c : all) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
  impl_->listener.close();
  impl_->ws_listener.close();
}

std::uint16_t Broker::port() const { return impl_->bound_port; }
std::uint16_t Broker::ws_port() const { return impl_->bound_ws_port; }

BrokerStats Broker::stats() const {
  return {impl_->accepted, impl_->published, impl_->delivered, impl_->dropped,
          impl_->crc_failures, impl_->protocol_errors, impl_->slow_disconnects};
}

std::size_t Broker::connection_count() const {
  std::shared_lock lock(impl_->routes);
  std::size_t n = 0;
  for (const auto& [id, c] : impl_->conns)
    if (!c->reader_done) ++n;
  return n;
}

std::unique_ptr<Broker> serve(std::uint16_t port, const std::string& host) {
  auto broker = std::make_unique<Broker>(BrokerOptions{host, port});
  broker->start();
  return broker;
}

void ws_gateway(Broker& broker, std::uint16_t ws_port, const std::string& static_dir) {
  broker.start_ws(ws_port, static_dir);
}

}  // namespace vrgym::bridge

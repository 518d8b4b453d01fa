#include "vrgym/bridge/client.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "net.hpp"

namespace vrgym::bridge {

struct BridgeClient::Impl {
  net::Socket sock;
  std::thread reader;
  std::mutex send_mutex;

  std::mutex m;
  std::condition_variable cv;
  std::deque<Envelope> inbox;
  Handler handler;
  std::set<std::uint64_t> pongs;
  bool open = true;
  std::atomic<std::uint64_t> crc_failures{0};

  std::map<std::string, std::uint64_t> topic_seq;
  std::uint64_t control_seq = 0;

  void read_loop() {
    FrameDecoder decoder;
    std::vector<char> buf(1 << 16);
    try {
      while (true) {
        std::size_t n = sock.recv_some(buf.data(), buf.size());
        if (n == 0) break;
        decoder.feed(std::string_view(buf.data(), n));
        while (auto e = decoder.next()) dispatch(std::move(*e));
        crc_failures = decoder.crc_failures();
      }
    } catch (const std::exception&) {
    }
    std::lock_guard lock(m);
    open = false;
    cv.notify_all();
  }

  void dispatch(Envelope e) {
    if (is_control(e)) {
      ControlMessage msg = parse_control(e);
      if (msg.op != ControlOp::pong) return;
      std::lock_guard lock(m);
      pongs.insert(e.stamp_ns);
      cv.notify_all();
      return;
    }
    Handler h;
    {
      std::lock_guard lock(m);
      if (!handler) {
        inbox.push_back(std::move(e));
        cv.notify_all();
        return;
      }
      h = handler;
    }
    h(std::move(e));
  }

  void send_control(ControlOp op, const std::string& topic, const std::string& type,
                    std::uint64_t stamp = 0) {
    std::lock_guard lock(send_mutex);
    sock.send_all(encode_frame(make_control({op, topic, type}, ++control_seq, stamp ? stamp : now_ns())));
  }

  // Sends a PING with a unique stamp and waits for the echo.
  bool barrier(int timeout_ms) {
    static std::atomic<std::uint64_t> salt{0};
    const std::uint64_t stamp = now_ns() + (++salt);
    send_control(ControlOp::ping, "", "", stamp);
    std::unique_lock lock(m);
    bool ok = cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                          [&] { return pongs.count(stamp) > 0 || !open; });
    ok = ok && pongs.erase(stamp) > 0;
    return ok;
  }
};

BridgeClient::BridgeClient(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  impl_->sock = net::connect_tcp(host, port);
  impl_->reader = std::thread([this] { impl_->read_loop(); });
}

BridgeClient::~BridgeClient() { close(); }

void BridgeClient::set_handler(Handler handler) {
  std::deque<Envelope> pending;
  {
    std::lock_guard lock(impl_->m);
    impl_->handler = handler;
    if (handler) pending.swap(impl_->inbox);
  }
  for (auto& e : pending) handler(std::move(e));
}

void BridgeClient::advertise(const std::string& topic, const std::string& type) {
  impl_->send_control(ControlOp::advertise, topic, type);
}

void BridgeClient::unadvertise(const std::string& topic) { impl_->send_control(ControlOp::unadvertise, topic, ""); }

void BridgeClient::subscribe(const std::string& pattern) { impl_->send_control(ControlOp::subscribe, pattern, ""); }

void BridgeClient::subscribe_sync(const std::string& pattern, int timeout_ms) {
  subscribe(pattern);
  if (!impl_->barrier(timeout_ms)) throw std::runtime_error("subscription to '" + pattern + "' not acknowledged");
}

void BridgeClient::unsubscribe(const std::string& pattern) {
  impl_->send_control(ControlOp::unsubscribe, pattern, "");
}

std::uint64_t BridgeClient::publish(const std::string& topic, const std::string& type, nlohmann::json data) {
  std::string frame;
  std::uint64_t seq;
  {
    std::lock_guard lock(impl_->send_mutex);
    seq = ++impl_->topic_seq[topic];
    frame = encode_frame(make_envelope(topic, seq, now_ns(), type, std::move(data)));
    impl_->sock.send_all(frame);
  }
  return seq;
}

void BridgeClient::send(const Envelope& envelope) { send_raw(encode_frame(envelope)); }

void BridgeClient::send_raw(std::string_view bytes) {
  std::lock_guard lock(impl_->send_mutex);
  impl_->sock.send_all(bytes);
}

std::optional<Envelope> BridgeClient::receive(int timeout_ms) {
  std::unique_lock lock(impl_->m);
  impl_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                     [&] { return !impl_->inbox.empty() || !impl_->open; });
  if (impl_->inbox.empty()) return std::nullopt;
  Envelope e = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return e;
}

std::optional<std::chrono::nanoseconds> BridgeClient::ping(int timeout_ms) {
  auto t0 = std::chrono::steady_clock::now();
  if (!impl_->barrier(timeout_ms)) return std::nullopt;
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0);
}

bool BridgeClient::connected() const {
  std::lock_guard lock(impl_->m);
  return impl_->open;
}

std::uint64_t BridgeClient::crc_failures() const { return impl_->crc_failures; }

void BridgeClient::close() {
  if (!impl_->sock.valid()) return;
  impl_->sock.shutdown();
  if (impl_->reader.joinable()) impl_->reader.join();
  impl_->sock.close();
}

nlohmann::json StreamStats::to_json() const {
  nlohmann::json j = {{"messages_sent", messages_sent},
                      {"messages_received", messages_received},
                      {"bytes", bytes},
                      {"loss", loss},
                      {"out_of_order", out_of_order},
                      {"crc_failures", crc_failures},
                      {"elapsed_s", elapsed},
                      {"throughput_Bps", throughput}};
  if (!error.empty()) j["error"] = error;
  return j;
}

StreamStats benchmark_throughput(std::size_t payload_bytes, std::size_t count, const std::string& host,
                                 std::uint16_t port, std::uint64_t seed) {
  StreamStats st;
  if (count == 0) return st;

  // Payloads are windows into one seeded buffer so each message differs
  // without generating count * payload_bytes random characters.
  static constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kAlphabet.size() - 1);
  std::string pool(payload_bytes + 4096, '\0');
  for (char& c : pool) c = kAlphabet[pick(rng)];
  auto payload = [&](std::uint64_t seq) { return std::string_view(pool).substr(seq * 131 % 4096, payload_bytes); };

  constexpr std::size_t kWindow = 16;
  constexpr int kTimeoutMs = 10000;
  const std::string topic = "/bench";
  try {
    BridgeClient sub(host, port);
    BridgeClient pub(host, port);
    sub.subscribe_sync(topic);
    pub.advertise(topic, "std/String");

    std::uint64_t expected = 1;
    auto take = [&]() -> bool {
      auto e = sub.receive(kTimeoutMs);
      if (!e) return false;
      ++st.messages_received;
      if (e->seq < expected) {
        ++st.out_of_order;
      } else {
        expected = e->seq + 1;
      }
      if (e->data.is_string()) {
        const auto& s = e->data.get_ref<const std::string&>();
        if (s != payload(e->seq)) st.error = "payload mismatch at seq " + std::to_string(e->seq);
        st.bytes += s.size();
      }
      return true;
    };

    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < count; ++i) {
      pub.publish(topic, "std/String", std::string(payload(i + 1)));
      ++st.messages_sent;
      while (st.messages_sent - st.messages_received > kWindow) {
        if (!take()) throw std::runtime_error("subscriber timed out");
      }
    }
    while (st.messages_received < st.messages_sent) {
      if (!take()) throw std::runtime_error("subscriber timed out");
    }
    st.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.crc_failures = sub.crc_failures();
  } catch (const std::exception& err) {
    st.error = err.what();
  }
  st.loss = st.messages_sent > st.messages_received ? st.messages_sent - st.messages_received : 0;
  st.throughput = st.elapsed > 0 ? static_cast<double>(st.bytes) / st.elapsed : 0.0;
  return st;
}

}  // namespace vrgym::bridge

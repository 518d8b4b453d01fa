#include "vrgym/social.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "vrgym/bridge/client.hpp"

namespace vrgym::social {

using nlohmann::json;

std::string to_string(SignalKind k) { return k == SignalKind::wave ? "wave" : "stretch"; }

std::string to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::wave_back: return "wave_back";
    case ResponseKind::handshake_reach: return "handshake_reach";
    case ResponseKind::idle: break;
  }
  return "idle";
}

SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "wave") return SignalKind::wave;
  if (s == "stretch") return SignalKind::stretch;
  throw SocialError("unknown signal kind '" + s + "'");
}

ResponseKind response_kind_from_string(const std::string& s) {
  if (s == "idle") return ResponseKind::idle;
  if (s == "wave_back") return ResponseKind::wave_back;
  if (s == "handshake_reach") return ResponseKind::handshake_reach;
  throw SocialError("unknown response kind '" + s + "'");
}

json ResponsePrimitive::to_json() const {
  return {{"kind", to_string(kind)}, {"duration", duration}, {"target", target}};
}

ResponsePrimitive ResponsePrimitive::from_json(const json& j) {
  try {
    ResponsePrimitive r{response_kind_from_string(j.at("kind").get<std::string>()), j.at("duration").get<int>(),
                        j.at("target").get<std::string>()};
    if (r.kind != ResponseKind::idle && r.duration <= 0) throw SocialError("response duration must be positive");
    return r;
  } catch (const json::exception& e) {
    throw SocialError(std::string("bad response: ") + e.what());
  }
}

ResponsePrimitive response_for(const SocialSignal& s) {
  if (s.kind == SignalKind::wave) return {ResponseKind::wave_back, kWaveBackTicks, s.agent_id};
  return {ResponseKind::handshake_reach, kHandshakeTicks, s.agent_id};
}

std::pair<FsmState, ResponsePrimitive> on_signal(FsmState state, const SocialSignal& signal) {
  if (state.busy()) {
    state.queue.push_back(signal);
    if (state.queue.size() > kQueueDepth) {
      state.queue.pop_front();
      ++state.dropped;
    }
    return {std::move(state), {ResponseKind::idle, 0, signal.agent_id}};
  }
  ResponsePrimitive r = response_for(signal);
  state.active = r;
  state.active_until = state.now + r.duration;
  return {std::move(state), r};
}

std::pair<FsmState, std::vector<ResponsePrimitive>> advance_to(FsmState state, std::int64_t tick) {
  std::vector<ResponsePrimitive> started;
  while (state.active && state.active_until <= tick) {
    state.active.reset();
    if (state.queue.empty()) break;
    // Queued work starts the moment the previous response ends.
    ResponsePrimitive r = response_for(state.queue.front());
    state.queue.pop_front();
    state.active = r;
    state.active_until += r.duration;
    started.push_back(r);
  }
  state.now = std::max(state.now, tick);
  return {std::move(state), std::move(started)};
}

std::optional<std::string> signal_agent(const std::string& topic) {
  static constexpr std::string_view kPrefix = "/agent/", kSuffix = "/signal";
  if (topic.size() <= kPrefix.size() + kSuffix.size()) return std::nullopt;
  if (topic.compare(0, kPrefix.size(), kPrefix) != 0) return std::nullopt;
  if (topic.compare(topic.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) return std::nullopt;
  std::string id = topic.substr(kPrefix.size(), topic.size() - kPrefix.size() - kSuffix.size());
  if (id.find('/') != std::string::npos) return std::nullopt;
  return id;
}

SocialSignal parse_signal(const std::string& topic, const json& data, std::int64_t default_tick) {
  auto id = signal_agent(topic);
  if (!id) throw SocialError("'" + topic + "' is not a signal topic");
  if (!data.is_object() || !data.contains("kind") || !data["kind"].is_string())
    throw SocialError("signal needs a string 'kind'");
  SocialSignal s{*id, signal_kind_from_string(data["kind"].get<std::string>()), default_tick};
  if (data.contains("tick")) {
    if (!data["tick"].is_number_integer()) throw SocialError("signal tick must be an integer");
    s.tick = data["tick"].get<std::int64_t>();
  }
  return s;
}

std::string action_topic(const std::string& agent_id) { return "/agent/" + agent_id + "/action"; }
std::string signal_topic(const std::string& agent_id) { return "/agent/" + agent_id + "/signal"; }

// ------------------------------------------------------------- peer

struct SocialPeer::Impl {
  using Clock = std::chrono::steady_clock;

  std::string host;
  std::uint16_t port;
  std::string agent_id;
  PeerOptions options;

  mutable std::mutex m;
  mutable std::condition_variable cv;
  std::deque<bridge::Envelope> inbox;
  bool running = true;
  bool live = false;
  FsmState fsm;
  PeerStats stats;
  std::vector<ResponsePrimitive> outbox;  // started while disconnected

  // Clock anchor: tick_anchor at time_anchor, then tick_hz.
  std::int64_t tick_anchor = 0;
  Clock::time_point time_anchor = Clock::now();

  std::thread worker;

  std::int64_t tick_at(Clock::time_point t) const {
    double s = std::chrono::duration<double>(t - time_anchor).count();
    return tick_anchor + static_cast<std::int64_t>(std::floor(s * options.tick_hz));
  }

  Clock::time_point time_of(std::int64_t tick) const {
    return time_anchor + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>((tick - tick_anchor) / options.tick_hz));
  }

  std::unique_ptr<bridge::BridgeClient> connect() {
    auto c = std::make_unique<bridge::BridgeClient>(host, port);
    c->set_handler([this](bridge::Envelope e) {
      std::lock_guard lock(m);
      inbox.push_back(std::move(e));
      cv.notify_all();
    });
    c->advertise(action_topic(agent_id), "ResponsePrimitive");
    c->subscribe_sync("/agent/*/signal");
    return c;
  }

  // Publishes and clears the outbox; false when the connection failed.
  bool flush(bridge::BridgeClient& c, std::vector<ResponsePrimitive>& out) {
    try {
      for (const auto& r : out) c.publish(action_topic(agent_id), "ResponsePrimitive", r.to_json());
    } catch (const std::exception&) {
      return false;
    }
    std::lock_guard lock(m);
    stats.responses += out.size();
    out.clear();
    return true;
  }

  void run() {
    std::unique_ptr<bridge::BridgeClient> client;
    int backoff = options.backoff_min_ms;
    bool ever = false;
    while (true) {
      {
        std::lock_guard lock(m);
        if (!running) break;
      }
      if (!client || !client->connected()) {
        client.reset();
        {
          std::lock_guard lock(m);
          live = false;
        }
        try {
          client = connect();
          backoff = options.backoff_min_ms;
          std::lock_guard lock(m);
          live = true;
          if (ever) ++stats.reconnects;
          ever = true;
          cv.notify_all();
        } catch (const std::exception&) {
          client.reset();
          std::unique_lock lock(m);
          cv.wait_for(lock, std::chrono::milliseconds(backoff), [&] { return !running; });
          backoff = std::min(backoff * 2, options.backoff_max_ms);
          continue;
        }
      }

      std::vector<ResponsePrimitive> out;
      {
        std::unique_lock lock(m);
        auto deadline = Clock::now() + std::chrono::milliseconds(20);
        if (fsm.busy() && !fsm.queue.empty()) deadline = std::min(deadline, time_of(fsm.active_until));
        cv.wait_until(lock, deadline, [&] { return !inbox.empty() || !running; });
        if (!running) break;

        auto step_clock = [&] {
          auto [s, started] = advance_to(std::move(fsm), tick_at(Clock::now()));
          fsm = std::move(s);
          out.insert(out.end(), started.begin(), started.end());
        };
        step_clock();
        while (!inbox.empty()) {
          bridge::Envelope e = std::move(inbox.front());
          inbox.pop_front();
          SocialSignal sig;
          try {
            sig = parse_signal(e.topic, e.data, fsm.now);
          } catch (const SocialError&) {
            ++stats.rejected;
            continue;
          }
          if (sig.agent_id == agent_id) continue;
          ++stats.signals;
          if (sig.tick > tick_at(Clock::now())) {
            tick_anchor = sig.tick;
            time_anchor = Clock::now();
          }
          step_clock();
          auto [s, r] = on_signal(std::move(fsm), sig);
          fsm = std::move(s);
          if (r.kind != ResponseKind::idle) out.push_back(r);
        }
        stats.dropped = fsm.dropped;
        outbox.insert(outbox.end(), out.begin(), out.end());
        out.swap(outbox);
        outbox.clear();
      }
      if (!out.empty() && !flush(*client, out)) {
        std::lock_guard lock(m);
        outbox.insert(outbox.begin(), out.begin(), out.end());
        client.reset();
      }
    }
    std::lock_guard lock(m);
    live = false;
  }
};

SocialPeer::SocialPeer(std::string host, std::uint16_t port, std::string agent_id, PeerOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (agent_id.empty() || agent_id.find('/') != std::string::npos) throw SocialError("bad agent id");
  if (!(options.tick_hz > 0.0)) throw SocialError("tick_hz must be positive");
  impl_->host = std::move(host);
  impl_->port = port;
  impl_->agent_id = std::move(agent_id);
  impl_->options = options;
  impl_->worker = std::thread([this] { impl_->run(); });
}

SocialPeer::~SocialPeer() { stop(); }

bool SocialPeer::wait_connected(int timeout_ms) const {
  std::unique_lock lock(impl_->m);
  return impl_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return impl_->live; });
}

bool SocialPeer::connected() const {
  std::lock_guard lock(impl_->m);
  return impl_->live;
}

PeerStats SocialPeer::stats() const {
  std::lock_guard lock(impl_->m);
  return impl_->stats;
}

FsmState SocialPeer::state() const {
  std::lock_guard lock(impl_->m);
  return impl_->fsm;
}

void SocialPeer::stop() {
  {
    std::lock_guard lock(impl_->m);
    impl_->running = false;
    impl_->cv.notify_all();
  }
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace vrgym::social

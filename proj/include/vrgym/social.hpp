#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vrgym::social {

class SocialError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SignalKind { wave, stretch };
enum class ResponseKind { idle, wave_back, handshake_reach };

std::string to_string(SignalKind k);
std::string to_string(ResponseKind k);
SignalKind signal_kind_from_string(const std::string& s);
ResponseKind response_kind_from_string(const std::string& s);

struct SocialSignal {
  std::string agent_id;
  SignalKind kind = SignalKind::wave;
  std::int64_t tick = 0;
};

struct ResponsePrimitive {
  ResponseKind kind = ResponseKind::idle;
  int duration = 0;  // ticks
  std::string target;

  nlohmann::json to_json() const;  // {"kind","duration","target"}
  static ResponsePrimitive from_json(const nlohmann::json& j);
  bool operator==(const ResponsePrimitive&) const = default;
};

inline constexpr int kWaveBackTicks = 120;
inline constexpr int kHandshakeTicks = 90;
inline constexpr std::size_t kQueueDepth = 4;

/// wave -> wave_back, stretch -> handshake_reach, with their durations.
ResponsePrimitive response_for(const SocialSignal& s);

struct FsmState {
  std::int64_t now = 0;
  std::optional<ResponsePrimitive> active;
  std::int64_t active_until = 0;  // first tick at which the FSM is idle again
  std::deque<SocialSignal> queue;
  std::uint64_t dropped = 0;

  bool busy() const { return active.has_value(); }
};

/// Handles a signal at the state's current tick. Idle: starts and returns the
/// response. Busy: queues it (oldest dropped past depth 4) and returns idle.
std::pair<FsmState, ResponsePrimitive> on_signal(FsmState state, const SocialSignal& signal);

/// Moves the clock forward to `tick` (never backwards), finishing responses
/// and starting queued ones in order. Returns the responses started.
std::pair<FsmState, std::vector<ResponsePrimitive>> advance_to(FsmState state, std::int64_t tick);

/// Parses `/agent/<id>/signal`; nullopt for other topics.
std::optional<std::string> signal_agent(const std::string& topic);
/// Signal from an envelope's topic and data {"kind", optional "tick"}.
SocialSignal parse_signal(const std::string& topic, const nlohmann::json& data, std::int64_t default_tick);

std::string action_topic(const std::string& agent_id);
std::string signal_topic(const std::string& agent_id);

struct PeerOptions {
  double tick_hz = 60.0;   // clock extrapolation between observed ticks
  int backoff_min_ms = 50;
  int backoff_max_ms = 2000;
};

struct PeerStats {
  std::uint64_t signals = 0;
  std::uint64_t rejected = 0;
  std::uint64_t responses = 0;
  std::uint64_t dropped = 0;
  std::uint64_t reconnects = 0;
};

/// Bridge peer for one robot. Subscribes `/agent/*/signal` and publishes
/// responses on `/agent/<agent_id>/action`. The clock follows the largest
/// signal tick seen and runs at tick_hz in between. Reconnects with
/// exponential backoff; FSM state survives reconnects.
class SocialPeer {
 public:
  SocialPeer(std::string host, std::uint16_t port, std::string agent_id, PeerOptions options = {});
  ~SocialPeer();
  SocialPeer(const SocialPeer&) = delete;
  SocialPeer& operator=(const SocialPeer&) = delete;

  /// Blocks until the first subscription is live or the timeout passes.
  bool wait_connected(int timeout_ms) const;
  bool connected() const;
  PeerStats stats() const;
  FsmState state() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vrgym::social

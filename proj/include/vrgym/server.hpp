#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "vrgym/datalog.hpp"
#include "vrgym/scene.hpp"

namespace vrgym::server {

// Topics owned by the simulator besides the per-agent conventions.
inline constexpr const char* kSnapshotTopic = "/scene/snapshot";
inline constexpr const char* kEventsTopic = "/scene/events";
inline constexpr const char* kRecordsTopic = "/scene/records";
inline constexpr const char* kHistoryTopic = "/scene/history";

struct ServeOptions {
  std::string scene_document;
  std::string host = "127.0.0.1";
  std::uint16_t tcp_port = 9763;             // 0 picks a free port
  std::optional<std::uint16_t> ws_port = 9764;
  std::string static_dir;                    // served on the WS port at GET /
  double snapshot_hz = 20.0;
  double tick_hz = 60.0;                     // wall-clock pacing of the sim loop
  int command_hold_ticks = 15;               // a command lapses to zero after this
};

/// Broker plus simulation loop. The loop owns the scene; bridge input is
/// queued and applied at the next tick. Inputs arrive as
///   /agent/<id>/cmd     type VelocityCommand, data {"v", "omega"}
///   /agent/<id>/action  type ActionRequest,   data {"verb", "target"?, "grip"?}
/// and the loop publishes snapshots, events, odometry, per-agent action
/// events, straight-line intent posteriors and every log record.
class SimServer {
 public:
  explicit SimServer(ServeOptions options);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  void start();
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;
  std::int64_t tick() const;
  std::uint64_t snapshots() const;
  /// Copy of the full record history since tick 0.
  datalog::SessionLog history() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Connects to a server, fetches its history and follows live records into
/// `file` until `keep_going` returns false. Throws LogError when `file`
/// already exists or the server does not answer.
datalog::SessionLog record_session(const std::string& host, std::uint16_t port, const std::string& session_id,
                                   const std::string& subject_id, const std::filesystem::path& file,
                                   const std::function<bool()>& keep_going, int timeout_ms = 3000);

}  // namespace vrgym::server

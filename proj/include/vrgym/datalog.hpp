#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vrgym/scene.hpp"

namespace vrgym::datalog {

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OdometrySample {
  std::int64_t tick = 0;
  std::string agent_id;
  Pose pose;
  bool operator==(const OdometrySample&) const = default;
};

struct GraspContactEvent {
  std::int64_t tick = 0;
  std::string agent_id;
  std::string object_id;
  ContactPatch patch;
  bool operator==(const GraspContactEvent&) const = default;
};

// Inputs are logged with the tick they produced: a command at t=k drove the
// step from k-1 to k. Replay feeds them back through scene-core.
struct CommandRecord {
  std::int64_t tick = 0;
  VelocityCommand command;
  bool operator==(const CommandRecord&) const = default;
};

struct RequestRecord {
  std::int64_t tick = 0;
  ActionRequest request;
  bool operator==(const RequestRecord&) const = default;
};

using Record =
    std::variant<OdometrySample, ActionEvent, GraspContactEvent, CollisionEvent, CommandRecord, RequestRecord>;

std::int64_t tick_of(const Record& r);
nlohmann::json to_json(const Record& r);
Record record_from_json(const nlohmann::json& j);

/// SHA-256 of the scene document text, lowercase hex.
std::string scene_hash(std::string_view document);

struct SessionInfo {
  std::string session_id;
  std::string subject_id;
  std::string scene_hash;
};

/// Append-only event stream. When opened on a file, every record is written
/// and flushed as one JSON line before record() returns.
class SessionLog {
 public:
  SessionLog() = default;
  explicit SessionLog(SessionInfo info);
  SessionLog(SessionInfo info, const std::filesystem::path& file);

  const SessionInfo& info() const { return info_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::int64_t last_tick() const { return last_tick_; }

  /// Throws LogError when the record's tick is older than the last one.
  void record(Record r);

  std::string to_jsonl() const;
  static SessionLog from_jsonl(std::string_view text);
  static SessionLog load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

 private:
  SessionInfo info_;
  std::vector<Record> records_;
  std::int64_t last_tick_ = std::numeric_limits<std::int64_t>::min();
  std::unique_ptr<std::ofstream> sink_;
};

/// Odometry policy: a sample on every tick an agent moved, and every
/// kIdlePeriod ticks while it stands still.
class OdometrySampler {
 public:
  static constexpr std::int64_t kIdlePeriod = 6;

  /// Samples due at the scene's current tick.
  std::vector<OdometrySample> sample(const SceneGraph& scene);

 private:
  struct Last {
    Pose pose;
    std::int64_t tick = 0;
  };
  std::map<std::string, Last> last_;
};

/// Drives a scene and logs inputs, events and odometry as it goes.
class SessionRecorder {
 public:
  SessionRecorder(SceneGraph scene, SessionLog& log);

  std::vector<SceneEvent> step(const std::vector<VelocityCommand>& commands,
                               const std::vector<ActionRequest>& actions = {});
  const SceneGraph& scene() const { return scene_; }

 private:
  void log_events(const std::vector<SceneEvent>& events);
  void log_odometry();

  SceneGraph scene_;
  SessionLog& log_;
  OdometrySampler sampler_;
};

/// One scripted step for simulate_and_record.
struct ScriptStep {
  std::vector<VelocityCommand> commands;
  std::vector<ActionRequest> actions;
};

SessionLog simulate_and_record(std::string_view scene_document, const std::vector<ScriptStep>& script,
                               SessionInfo info = {});

/// CSV `tick,x,y,yaw` of one agent's odometry in tick order.
std::string footprint_export(const SessionLog& session, const std::string& agent_id);

struct Divergence {
  std::int64_t tick = 0;
  std::string agent_id;
  Pose logged;
  std::optional<Pose> replayed;  // nullopt when the agent does not exist
};

struct ReplayResult {
  SceneGraph final_scene;
  std::vector<Divergence> divergences;
};

/// Re-simulates the logged inputs from the scene document and compares every
/// odometry record bitwise. Throws LogError on a scene hash mismatch.
ReplayResult replay(const SessionLog& session, std::string_view scene_document);

struct HeatMap {
  std::string object_id;
  std::array<int, 3> dims{4, kPatchGrid, kPatchGrid};
  std::vector<std::uint64_t> counts;
  std::optional<std::vector<double>> normalized;

  std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  std::size_t index(const ContactPatch& p) const {
    return (static_cast<std::size_t>(p.face) * dims[1] + p.u) * dims[2] + p.v;
  }
  std::uint64_t total() const;
  /// counts / max(counts), or all zeros when empty.
  std::vector<double> normalize() const;
};

HeatMap heatmap_accumulate(const std::vector<GraspContactEvent>& events, const std::string& object_id,
                           std::array<int, 3> dims = {4, kPatchGrid, kPatchGrid});
/// Normalizes each map, then averages per patch. `counts` of the result holds
/// the summed counts.
HeatMap heatmap_average(const std::vector<HeatMap>& maps);

nlohmann::json to_json(const HeatMap& map);
HeatMap heatmap_from_json(const nlohmann::json& j);

/// Contact events on one object within a session.
std::vector<GraspContactEvent> contacts_for(const SessionLog& session, const std::string& object_id);

}  // namespace vrgym::datalog

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace vrgym {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kTicksPerSecond = 60;
inline constexpr double kDt = 1.0 / kTicksPerSecond;
// Contact patches per side face are kPatchGrid x kPatchGrid.
inline constexpr int kPatchGrid = 8;

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle into [-pi, pi).
double normalize_yaw(double yaw);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  bool operator==(const Pose&) const = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

/// World-axis-aligned box, used for collision and ray casting.
struct Box {
  double min_x, min_y, max_x, max_y;

  bool contains(double x, double y) const {
    return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
  }
};

/// True when the interiors of two boxes overlap by more than `eps`.
bool boxes_overlap(const Box& a, const Box& b, double eps = 1e-9);

enum class EntityKind { wall, door, object, agent };

std::string_view to_string(EntityKind kind);
EntityKind entity_kind_from_string(std::string_view s);

struct ScalarFluent {
  double value = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool operator==(const ScalarFluent&) const = default;
};

using FluentValue = std::variant<bool, ScalarFluent, std::string>;

bool fluent_equals(const FluentValue& a, const FluentValue& b);

/// A data-driven fluent transition. `pre` and `post` keys address fluents of
/// the target; a `held.` prefix addresses the acting agent's held object.
struct TransitionRule {
  std::string verb;
  std::optional<EntityKind> target_kind;
  std::map<std::string, FluentValue> pre;
  std::map<std::string, FluentValue> post;
  std::optional<std::string> owner;  // set when declared on an entity
};

struct Entity {
  std::string id;
  EntityKind kind = EntityKind::object;
  Pose pose;
  Vec2 half_extents{0.5, 0.5};
  std::map<std::string, FluentValue> fluents;
  std::optional<std::string> attached_to;
  // Object pose in the holding agent's frame, frozen at attach time.
  std::optional<Pose> attach_offset;

  Box box() const {
    return {pose.x - half_extents.x, pose.y - half_extents.y,
            pose.x + half_extents.x, pose.y + half_extents.y};
  }
  bool is_closed_door() const;
  bool blocks_motion() const;
};

struct SceneLimits {
  double v_max = 2.0;
  double omega_max = kPi;
  double reach = 1.2;
};

struct SceneGraph {
  std::map<std::string, Entity> entities;
  std::vector<TransitionRule> rules;
  std::int64_t tick = 0;
  std::uint64_t rng_seed = 0;
  double cell_size = 1.0;
  SceneLimits limits;

  double time() const { return static_cast<double>(tick) / kTicksPerSecond; }

  const Entity& at(const std::string& id) const;
  Entity& at(const std::string& id);
  const Entity* find(const std::string& id) const;
  std::optional<std::string> held_by(const std::string& agent_id) const;
  std::vector<std::string> agent_ids() const;
};

struct VelocityCommand {
  std::string agent_id;
  double v = 0.0;
  double omega = 0.0;
  bool operator==(const VelocityCommand&) const = default;
};

enum class Verb { push_door, twist_door, press_button, pour, grasp, release, wave, stretch };
enum class Outcome { ok, blocked, out_of_range };

std::string_view to_string(Verb verb);
Verb verb_from_string(std::string_view s);
std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view s);

struct ActionRequest {
  std::string agent_id;
  Verb verb = Verb::wave;
  std::optional<std::string> target_id;
  // Vertical grip position in [0, 1] for grasp contact patches.
  double grip_height = 0.5;
  bool operator==(const ActionRequest&) const = default;
};

struct ContactPatch {
  int face = 0;
  int u = 0;
  int v = 0;
  bool operator==(const ContactPatch&) const = default;
};

struct ActionEvent {
  std::int64_t tick = 0;
  std::string agent_id;
  Verb verb = Verb::wave;
  std::optional<std::string> target_id;
  Outcome outcome = Outcome::ok;
  std::optional<ContactPatch> contact;  // set on successful grasp
  bool operator==(const ActionEvent&) const = default;
};

struct CollisionEvent {
  std::int64_t tick = 0;
  std::string agent_id;
  std::string obstacle_id;
  bool operator==(const CollisionEvent&) const = default;
};

using SceneEvent = std::variant<CollisionEvent, ActionEvent>;

struct StepOutput {
  SceneGraph scene;
  std::vector<SceneEvent> events;
};

struct InteractOutput {
  SceneGraph scene;
  ActionEvent event;
};

struct DepthScan {
  int n_rays = 0;
  double fov = 0.0;
  std::vector<double> depth;  // +inf when nothing is hit
  std::vector<std::optional<std::string>> label;
  std::vector<Vec2> normal;
};

enum class Cell : std::uint8_t { free, blocked };

struct OccupancyGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 1.0;
  int width = 0;   // columns, along +x
  int height = 0;  // rows, along +y
  std::vector<Cell> cells;  // row-major, row 0 at origin_y

  bool blocked(int col, int row) const { return cells[index(col, row)] == Cell::blocked; }
  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width && row < height;
  }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * width + col;
  }
  Vec2 center(int col, int row) const {
    return {origin_x + (col + 0.5) * resolution, origin_y + (row + 0.5) * resolution};
  }
  std::pair<int, int> cell_of(double x, double y) const;
  std::size_t count_free() const;
};

/// Parses a JSON scene document (optionally embedding an ASCII map).
SceneGraph load_scene(std::string_view document);

/// Builds a scene from ASCII rows (`#` wall, `.` free, `D` door, `A` agent,
/// `G` goal marker, `a`-`z` objects). Row 0 is the northmost row.
SceneGraph scene_from_ascii(const std::vector<std::string>& rows, double cell_size);

/// Advances the scene by one tick.
StepOutput step(const SceneGraph& scene, const std::vector<VelocityCommand>& commands,
                const std::vector<ActionRequest>& actions = {});

/// In-place form of step(); returns the tick's events.
std::vector<SceneEvent> advance(SceneGraph& scene, const std::vector<VelocityCommand>& commands,
                                const std::vector<ActionRequest>& actions = {});

InteractOutput interact(const SceneGraph& scene, const ActionRequest& request);
ActionEvent interact_in_place(SceneGraph& scene, const ActionRequest& request);

SceneGraph grasp_attach(const SceneGraph& scene, const std::string& agent_id,
                        const std::string& object_id);
SceneGraph release(const SceneGraph& scene, const std::string& agent_id);

DepthScan render_first_person(const SceneGraph& scene, const std::string& agent_id, int n_rays,
                              double fov);

OccupancyGrid occupancy_grid(const SceneGraph& scene, double resolution,
                             std::optional<Box> bounds = std::nullopt);

/// Bounds of all walls and doors, or nullopt when there are none.
std::optional<Box> static_bounds(const SceneGraph& scene);

nlohmann::json to_json(const FluentValue& value);
FluentValue fluent_from_json(const nlohmann::json& j, const std::string& path);

/// Full state snapshot. Round-trips exactly through scene_from_json.
nlohmann::json to_json(const SceneGraph& scene);
SceneGraph scene_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SceneEvent& event);
nlohmann::json to_json(const ActionEvent& event);
nlohmann::json to_json(const CollisionEvent& event);

}  // namespace vrgym

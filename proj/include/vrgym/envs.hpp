#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrgym/mdp.hpp"
#include "vrgym/scene.hpp"

namespace vrgym::envs {

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepInfo {
  bool collision = false;
  std::string zone;  // zone containing the agent after the step, if any
  bool success = false;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Discrete when n > 0, otherwise continuous with per-dimension bounds.
struct ActionSpace {
  int n = 0;
  std::vector<double> low;
  std::vector<double> high;
  bool discrete() const { return n > 0; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  /// Discrete action. Throws when the episode is over or the index is bad.
  virtual StepResult step(int action);
  /// Continuous action.
  virtual StepResult step(const std::vector<double>& action);

  virtual int obs_dim() const = 0;
  virtual ActionSpace action_space() const = 0;
  virtual int step_limit() const = 0;
  /// Tabular state of the current position, for environments on a grid.
  virtual std::optional<int> state_index() const { return std::nullopt; }
  virtual int n_states() const { return 0; }
  virtual const SceneGraph& scene() const = 0;

  int steps() const { return steps_; }
  bool done() const { return done_; }
  double episode_return() const { return return_; }

 protected:
  void begin_episode() {
    steps_ = 0;
    done_ = false;
    return_ = 0.0;
  }
  void check_running() const;
  void account(StepResult& r);

  int steps_ = 0;
  bool done_ = true;
  double return_ = 0.0;
};

struct Zone {
  std::string name;  // red, yellow, green or blue
  Box region{0, 0, 0, 0};
  double reward = 0.0;
};

/// Default reward for a zone colour.
double default_zone_reward(const std::string& name);
int zone_rank(const std::string& name);
/// Throws EnvError unless rewards strictly increase red < yellow < green < blue.
void validate_zones(const std::vector<Zone>& zones);
std::vector<Zone> zones_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Zone& z);

enum class ObsMode { features, depth };
enum class ActionMode { discrete4, discrete8, continuous };

struct MazeConfig {
  std::vector<Zone> zones;  // empty: taken from the document, else blue on the goal
  ObsMode obs = ObsMode::features;
  ActionMode actions = ActionMode::discrete4;
  int step_limit = 500;
  double collision_penalty = -0.1;
  double step_penalty = -0.01;
  int depth_rays = 32;
  double depth_fov = kPi / 2;
  int ticks_per_action = 6;  // continuous mode
};

/// Navigation task. Discrete actions turn to the move's heading and drive one
/// cell through the simulator, then settle on the cell centre; continuous
/// actions apply (v, omega) for ticks_per_action ticks.
class MazeEnv : public Environment {
 public:
  static constexpr int kProximityRays = 8;

  MazeEnv(std::string_view scene_document, MazeConfig config);

  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  StepResult step(const std::vector<double>& action) override;

  int obs_dim() const override;
  ActionSpace action_space() const override;
  int step_limit() const override { return config_.step_limit; }
  std::optional<int> state_index() const override;
  int n_states() const override { return grid_.width * grid_.height; }
  const SceneGraph& scene() const override { return scene_; }

  const MazeConfig& config() const { return config_; }
  const std::string& agent_id() const { return agent_; }
  const std::vector<Zone>& zones() const { return config_.zones; }
  const OccupancyGrid& grid() const { return grid_; }
  const SceneGraph& initial_scene() const { return initial_; }
  Vec2 goal() const { return goal_; }
  /// Outcome of a discrete move of `distance` from `from`, without touching
  /// the episode. Sets *collided when the move hit something.
  Pose simulate_move(const Pose& from, int action, double distance, bool* collided = nullptr) const;
  bool in_goal(double x, double y) const;
  std::vector<double> observe() const;

 private:
  StepResult finish_step(bool collided);

  MazeConfig config_;
  SceneGraph initial_;
  SceneGraph scene_;
  OccupancyGrid grid_;
  Box bounds_{0, 0, 0, 0};
  std::string agent_;
  Vec2 goal_;
  std::vector<bool> entered_;
};

struct GraspConfig {
  int size = 5;
  std::pair<int, int> start{0, 0};   // (col, row), row 0 is the south row
  std::pair<int, int> object{4, 4};
  std::vector<std::pair<int, int>> obstacles;
  bool diagonal = false;
  int step_limit = 100;
  double success_reward = 1.0;
  double step_penalty = -0.01;
};

/// Reach-and-grasp on a small walled grid. The last action is `grasp`, which
/// succeeds when the object is within the simulator's reach.
class GraspEnv : public Environment {
 public:
  static constexpr const char* kObjectId = "o";

  explicit GraspEnv(GraspConfig config);

  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(int action) override;

  int obs_dim() const override { return 4; }
  ActionSpace action_space() const override { return {n_moves() + 1, {}, {}}; }
  int step_limit() const override { return config_.step_limit; }
  std::optional<int> state_index() const override;
  int n_states() const override { return config_.size * config_.size; }
  const SceneGraph& scene() const override { return scene_; }

  const GraspConfig& config() const { return config_; }
  int n_moves() const { return config_.diagonal ? 8 : 4; }
  int grasp_action() const { return n_moves(); }
  /// Whether `grasp` from the cell would succeed.
  bool can_grasp_from(int col, int row) const;
  Pose simulate_move(const Pose& from, int action) const;
  Vec2 cell_center(int col, int row) const { return {col + 1.5, row + 1.5}; }
  std::pair<int, int> cell_of(const Pose& p) const;
  std::vector<double> observe() const;
  const SceneGraph& initial_scene() const { return initial_; }

 private:
  GraspConfig config_;
  SceneGraph initial_;
  SceneGraph scene_;
};

enum class FeatureSet { one_hot, hand_crafted };

/// Explicit MDP of the environment's discrete dynamics, built by simulating
/// every move from every free cell centre of occupancy_grid(resolution).
GridMDP as_grid_mdp(const MazeEnv& env, double resolution, FeatureSet features = FeatureSet::one_hot,
                    double gamma = 0.99);
/// Grasp MDP: cells x {free hand, holding}; holding states are terminal.
GridMDP as_grid_mdp(const GraspEnv& env, FeatureSet features = FeatureSet::one_hot, double gamma = 0.99);
GridMDP as_grid_mdp(const Environment& env, double resolution, FeatureSet features = FeatureSet::one_hot,
                    double gamma = 0.99);

struct Transition {
  std::vector<double> observation;
  std::optional<int> state;
  int action = 0;
  std::vector<double> continuous_action;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::vector<double> final_observation;
  std::optional<int> final_state;
  bool success = false;
  double total_reward = 0.0;
};

using DiscretePolicy = std::function<int(const std::vector<double>& observation, std::optional<int> state)>;

Trajectory rollout(Environment& env, const DiscretePolicy& policy, std::uint64_t seed, int max_steps);

/// Environment from a config document
/// {"task","scene","zones","obs","actions","step_limit",...}; relative scene
/// paths resolve against base_dir.
std::unique_ptr<Environment> make_env(const nlohmann::json& config, const std::filesystem::path& base_dir = {});
MazeConfig maze_config_from_json(const nlohmann::json& j);
GraspConfig grasp_config_from_json(const nlohmann::json& j);

}  // namespace vrgym::envs

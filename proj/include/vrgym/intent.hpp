#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vrgym/scene.hpp"

namespace vrgym::intent {

class IntentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using GridCell = std::pair<int, int>;  // (col, row)
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Goal {
  std::string id;
  Vec2 position;
  GridCell cell{0, 0};
};
using GoalSet = std::vector<Goal>;

/// Throws IntentError when empty or when ids repeat.
void validate_goals(const GoalSet& goals);
/// Unattached objects that are not markers, in id order.
std::vector<std::string> default_goal_ids(const SceneGraph& scene);
/// Goals at the given entity positions, snapped to `grid`.
GoalSet goals_from_scene(const SceneGraph& scene, const OccupancyGrid& grid, const std::vector<std::string>& ids);

struct GoalPosterior {
  std::vector<std::string> ids;
  std::vector<double> prob;

  double of(const std::string& id) const;
  /// Highest-probability goal, first in goal order on ties.
  const std::string& top() const;
  nlohmann::json to_json() const;  // {id: prob, ...}
};

/// P(g) proportional to exp(-beta * |pos - g|).
GoalPosterior predict_straightline(Vec2 pos, const GoalSet& goals, double beta = 2.0);

/// Distance from `point` to the line through `pos` along `heading` (any
/// non-zero length).
double perpendicular_distance(Vec2 pos, Vec2 heading, Vec2 point);
/// P(g) proportional to exp(-beta * d), with d the distance to the heading ray
/// plus back_penalty for goals behind the agent.
GoalPosterior predict_perpendicular(Vec2 pos, Vec2 heading, const GoalSet& goals, double beta = 2.0,
                                    double back_penalty = 5.0);

// ------------------------------------------------------------- planning

struct PathResult {
  double cost = kInf;
  std::vector<GridCell> path;  // from .. to, empty when unreachable
};

/// Step cost between 8-neighbours: 1 or sqrt(2). Diagonals may not cut a
/// blocked corner.
bool can_step(const OccupancyGrid& grid, GridCell from, int dx, int dy);
/// Optimal 8-connected path with the octile heuristic; equal f values are
/// expanded in lexicographic (col, row) order. Unreachable or blocked
/// endpoints cost infinity.
PathResult a_star(const OccupancyGrid& grid, GridCell from, GridCell to);
/// Shortest path cost from `from` to every cell (infinity where unreachable).
std::vector<double> dijkstra(const OccupancyGrid& grid, GridCell from);

/// Caches one cost-to-go map per target cell.
class Planner {
 public:
  explicit Planner(const OccupancyGrid& grid) : grid_(grid) {}
  double cost(GridCell from, GridCell to);
  const OccupancyGrid& grid() const { return grid_; }

 private:
  const OccupancyGrid& grid_;
  std::map<GridCell, std::vector<double>> to_target_;
};

// ------------------------------------------------------------- grammar

struct TaskGrammar {
  std::vector<std::string> subgoals;
  std::vector<std::pair<std::string, std::string>> before;  // (a, b): a precedes b
  std::map<std::vector<std::string>, double> sequence_weights;  // unlisted sequences weigh 1

  /// Throws IntentError on unknown names, duplicates or a cyclic order.
  void validate() const;
  nlohmann::json to_json() const;
  static TaskGrammar from_json(const nlohmann::json& j);
};

/// mug before coffee_maker; milk and sugar unordered.
TaskGrammar coffee_grammar();
/// Subgoals in any order.
TaskGrammar unordered_grammar(const std::vector<std::string>& subgoals);

/// Orderings of the remaining subgoals consistent with the grammar given the
/// completed ones. Enumerates up to `limit`; beyond that draws `limit` random
/// topological orders from `seed`.
std::vector<std::vector<std::string>> consistent_sequences(const TaskGrammar& grammar,
                                                           const std::set<std::string>& completed,
                                                           std::size_t limit = 10000, std::uint64_t seed = 1);

/// Next-subgoal prior induced by sequence weights.
GoalPosterior grammar_prior(const TaskGrammar& grammar, const std::set<std::string>& completed,
                            const GoalSet& goals);

/// Path length of a cell sequence (Euclidean between consecutive cells).
double prefix_cost(const std::vector<GridCell>& prefix);

/// Grammar prior times the noisy-rational detour likelihood
/// exp(-lambda * [c(prefix) + c*(x_t, g) - c*(x_0, g)]) for the next subgoal.
GoalPosterior predict_grammar(const std::vector<GridCell>& prefix, const TaskGrammar& grammar,
                              const std::set<std::string>& completed, const GoalSet& goals, Planner& planner,
                              double lambda = 1.0);

// ------------------------------------------------------------- heat map

struct HeatGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, max normalized to 1
  double mass = 0.0;           // total before normalization
  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Gaussian splat (sigma = 1 cell) of each goal's mass at its position.
HeatGrid posterior_heatmap(const GoalPosterior& posterior, const GoalSet& goals, const OccupancyGrid& grid);

// ------------------------------------------------------------- synthetic data

/// Boltzmann-rational walk to `goal`: from each cell, the next 8-neighbour is
/// drawn with probability proportional to exp(-lambda * (step + c*(next, goal))).
/// Includes both endpoints; stops at the goal or after max_steps moves.
std::vector<GridCell> noisy_rational_path(Planner& planner, GridCell start, GridCell goal, double lambda,
                                          std::mt19937_64& rng, int max_steps = 1000);

}  // namespace vrgym::intent

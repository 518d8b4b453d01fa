#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vrgym {

class MdpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite deterministic MDP over grid cells. Rewards are per state; terminal
/// states are absorbing (every action loops back).
struct GridMDP {
  int width = 0;   // source grid columns
  int height = 0;  // source grid rows
  double resolution = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<std::pair<int, int>> cells;  // state -> (col, row)
  std::vector<std::uint8_t> holding;       // state -> holding flag (grasp task)

  int n_states = 0;
  int n_actions = 0;
  std::vector<std::string> action_names;
  std::vector<int> next;  // n_states * n_actions

  int feature_dim = 0;
  std::vector<double> features;  // n_states * feature_dim, row-major
  std::vector<double> reward;
  double gamma = 0.9;
  std::vector<std::uint8_t> terminal;
  std::vector<double> start;  // start distribution

  int succ(int s, int a) const { return next[static_cast<std::size_t>(s) * n_actions + a]; }
  const double* phi(int s) const { return features.data() + static_cast<std::size_t>(s) * feature_dim; }
  /// State index of a grid cell (non-holding), or -1.
  int state_of(int col, int row) const;
  /// Throws MdpError when any structural invariant is broken.
  void validate() const;
};

/// Direction offsets in action order N, S, E, W, NE, NW, SE, SW.
inline constexpr int kMoveDx[8] = {0, 0, 1, -1, 1, -1, 1, -1};
inline constexpr int kMoveDy[8] = {1, -1, 0, 0, 1, 1, -1, -1};
inline constexpr const char* kMoveNames[8] = {"N", "S", "E", "W", "NE", "NW", "SE", "SW"};

/// Obstacle-free w x h grid, 4 or 8 moves, one-hot features, zero reward,
/// start in cell (0, 0).
GridMDP gridworld_mdp(int width, int height, bool diagonal = false, double gamma = 0.9);

/// Replaces features with the one-hot encoding of the state index.
void set_one_hot_features(GridMDP& mdp);

nlohmann::json to_json(const GridMDP& mdp);
GridMDP grid_mdp_from_json(const nlohmann::json& j);

}  // namespace vrgym

#include "vrgym/mdp.hpp"

#include <cmath>

namespace vrgym {

using nlohmann::json;

int GridMDP::state_of(int col, int row) const {
  for (int s = 0; s < n_states; ++s)
    if (cells[s].first == col && cells[s].second == row && (holding.empty() || !holding[s])) return s;
  return -1;
}

void GridMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw MdpError("MDP needs at least one state and one action");
  const auto ns = static_cast<std::size_t>(n_states);
  if (next.size() != ns * n_actions) throw MdpError("transition table has the wrong size");
  for (int t : next)
    if (t < 0 || t >= n_states) throw MdpError("transition target out of range");
  if (features.size() != ns * feature_dim) throw MdpError("feature matrix has the wrong size");
  if (reward.size() != ns || terminal.size() != ns || start.size() != ns || cells.size() != ns)
    throw MdpError("per-state table has the wrong size");
  if (!holding.empty() && holding.size() != ns) throw MdpError("holding table has the wrong size");
  if (!(gamma > 0.0 && gamma < 1.0)) throw MdpError("gamma must lie in (0, 1)");
  if (static_cast<int>(action_names.size()) != n_actions) throw MdpError("action names do not match");
  double mass = 0.0;
  for (double p : start) {
    if (p < 0.0) throw MdpError("negative start probability");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw MdpError("start distribution does not sum to 1");
  for (int s = 0; s < n_states; ++s)
    if (terminal[s])
      for (int a = 0; a < n_actions; ++a)
        if (succ(s, a) != s) throw MdpError("terminal state is not absorbing");
}

void set_one_hot_features(GridMDP& mdp) {
  mdp.feature_dim = mdp.n_states;
  mdp.features.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_states, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) mdp.features[static_cast<std::size_t>(s) * mdp.n_states + s] = 1.0;
}

GridMDP gridworld_mdp(int width, int height, bool diagonal, double gamma) {
  if (width <= 0 || height <= 0) throw MdpError("grid dimensions must be positive");
  GridMDP m;
  m.width = width;
  m.height = height;
  m.n_states = width * height;
  m.n_actions = diagonal ? 8 : 4;
  for (int a = 0; a < m.n_actions; ++a) m.action_names.emplace_back(kMoveNames[a]);
  for (int row = 0; row < height; ++row)
    for (int col = 0; col < width; ++col) m.cells.emplace_back(col, row);
  m.next.resize(static_cast<std::size_t>(m.n_states) * m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    auto [col, row] = m.cells[s];
    for (int a = 0; a < m.n_actions; ++a) {
      int c = col + kMoveDx[a], r = row + kMoveDy[a];
      bool inside = c >= 0 && r >= 0 && c < width && r < height;
      m.next[static_cast<std::size_t>(s) * m.n_actions + a] = inside ? r * width + c : s;
    }
  }
  set_one_hot_features(m);
  m.reward.assign(m.n_states, 0.0);
  m.gamma = gamma;
  m.terminal.assign(m.n_states, 0);
  m.start.assign(m.n_states, 0.0);
  m.start[0] = 1.0;
  return m;
}

json to_json(const GridMDP& m) {
  return {{"width", m.width},
          {"height", m.height},
          {"resolution", m.resolution},
          {"origin", {m.origin_x, m.origin_y}},
          {"cells", m.cells},
          {"holding", m.holding},
          {"n_states", m.n_states},
          {"n_actions", m.n_actions},
          {"actions", m.action_names},
          {"next", m.next},
          {"feature_dim", m.feature_dim},
          {"features", m.features},
          {"reward", m.reward},
          {"gamma", m.gamma},
          {"terminal", m.terminal},
          {"start", m.start}};
}

GridMDP grid_mdp_from_json(const json& j) {
  GridMDP m;
  try {
    m.width = j.at("width");
    m.height = j.at("height");
    m.resolution = j.value("resolution", 1.0);
    if (j.contains("origin")) {
      m.origin_x = j["origin"].at(0);
      m.origin_y = j["origin"].at(1);
    }
    m.cells = j.at("cells").get<std::vector<std::pair<int, int>>>();
    m.holding = j.value("holding", std::vector<std::uint8_t>{});
    m.n_states = j.at("n_states");
    m.n_actions = j.at("n_actions");
    m.action_names = j.at("actions").get<std::vector<std::string>>();
    m.next = j.at("next").get<std::vector<int>>();
    m.feature_dim = j.at("feature_dim");
    m.features = j.at("features").get<std::vector<double>>();
    m.reward = j.at("reward").get<std::vector<double>>();
    m.gamma = j.at("gamma");
    m.terminal = j.at("terminal").get<std::vector<std::uint8_t>>();
    m.start = j.at("start").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw MdpError(std::string("bad MDP document: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace vrgym

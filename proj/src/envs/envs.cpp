#include "vrgym/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vrgym::envs {

using nlohmann::json;

namespace {

bool has_collision(const std::vector<SceneEvent>& events) {
  for (const auto& e : events)
    if (std::holds_alternative<CollisionEvent>(e)) return true;
  return false;
}

// Turns the agent to the move's heading and drives `distance` along it at up
// to v_max. Returns whether anything was hit.
bool drive(SceneGraph& scene, const std::string& agent, int action, double distance) {
  Entity& e = scene.entities.at(agent);
  e.pose.yaw = normalize_yaw(std::atan2(kMoveDy[action], kMoveDx[action]));
  const double vmax = scene.limits.v_max;
  const int ticks = std::max(1, static_cast<int>(std::ceil(distance / (vmax * kDt) - 1e-9)));
  const double v = distance / (ticks * kDt);
  bool collided = false;
  for (int i = 0; i < ticks; ++i) collided |= has_collision(advance(scene, {{agent, v, 0.0}}));
  return collided;
}

void snap_to_cell(SceneGraph& scene, const std::string& agent, double origin_x, double origin_y, double cs) {
  Pose& p = scene.entities.at(agent).pose;
  p.x = origin_x + (std::floor((p.x - origin_x) / cs) + 0.5) * cs;
  p.y = origin_y + (std::floor((p.y - origin_y) / cs) + 0.5) * cs;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw EnvError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string* string_fluent(const Entity& e, const std::string& name) {
  auto it = e.fluents.find(name);
  if (it == e.fluents.end()) return nullptr;
  return std::get_if<std::string>(&it->second);
}

int moves_for(ActionMode m) { return m == ActionMode::discrete8 ? 8 : 4; }

}  // namespace

StepResult Environment::step(int) { throw EnvError("environment has no discrete actions"); }
StepResult Environment::step(const std::vector<double>&) { throw EnvError("environment has no continuous actions"); }

void Environment::check_running() const {
  if (done_) throw EnvError("episode is over; call reset()");
}

void Environment::account(StepResult& r) {
  ++steps_;
  return_ += r.reward;
  if (steps_ >= step_limit()) r.done = true;
  done_ = r.done;
}

int zone_rank(const std::string& name) {
  if (name == "red") return 0;
  if (name == "yellow") return 1;
  if (name == "green") return 2;
  if (name == "blue") return 3;
  throw EnvError("unknown zone colour '" + name + "'");
}

double default_zone_reward(const std::string& name) {
  static constexpr double kRewards[] = {0.1, 0.25, 0.5, 1.0};
  return kRewards[zone_rank(name)];
}

void validate_zones(const std::vector<Zone>& zones) {
  for (const auto& a : zones) {
    if (!(a.region.min_x < a.region.max_x && a.region.min_y < a.region.max_y))
      throw EnvError("zone '" + a.name + "' has an empty region");
    for (const auto& b : zones) {
      int ra = zone_rank(a.name), rb = zone_rank(b.name);
      if (ra < rb && !(a.reward < b.reward))
        throw EnvError("zone rewards must increase red < yellow < green < blue");
      if (ra == rb && a.reward != b.reward) throw EnvError("zones of one colour must share a reward");
    }
  }
}

std::vector<Zone> zones_from_json(const json& j) {
  std::vector<Zone> out;
  if (!j.is_array()) throw EnvError("zones must be an array");
  for (const auto& z : j) {
    try {
      Zone zone;
      zone.name = z.at("name").get<std::string>();
      auto b = z.at("box").get<std::vector<double>>();
      if (b.size() != 4) throw EnvError("zone box must be [min_x, min_y, max_x, max_y]");
      zone.region = {b[0], b[1], b[2], b[3]};
      zone.reward = z.contains("reward") ? z["reward"].get<double>() : default_zone_reward(zone.name);
      out.push_back(zone);
    } catch (const json::exception& e) {
      throw EnvError(std::string("bad zone: ") + e.what());
    }
  }
  validate_zones(out);
  return out;
}

json to_json(const Zone& z) {
  return {{"name", z.name}, {"box", {z.region.min_x, z.region.min_y, z.region.max_x, z.region.max_y}},
          {"reward", z.reward}};
}

// ---------------------------------------------------------------- maze

MazeEnv::MazeEnv(std::string_view scene_document, MazeConfig config) : config_(std::move(config)) {
  initial_ = load_scene(scene_document);
  auto agents = initial_.agent_ids();
  if (agents.empty()) throw EnvError("maze scene has no agent spawn");
  agent_ = agents.front();

  const Entity* goal = nullptr;
  for (const auto& [id, e] : initial_.entities) {
    const std::string* marker = string_fluent(e, "marker");
    if (marker && *marker == "goal") {
      goal = &e;
      break;
    }
  }
  if (!goal) goal = initial_.find("goal");
  if (!goal) throw EnvError("maze scene has no goal marker");
  goal_ = {goal->pose.x, goal->pose.y};

  if (config_.zones.empty()) {
    json doc = json::parse(scene_document, nullptr, false);
    if (doc.is_object() && doc.contains("zones")) config_.zones = zones_from_json(doc["zones"]);
  }
  if (config_.zones.empty()) config_.zones.push_back({"blue", goal->box(), default_zone_reward("blue")});
  validate_zones(config_.zones);
  if (std::none_of(config_.zones.begin(), config_.zones.end(), [](const Zone& z) { return z.name == "blue"; }))
    throw EnvError("maze needs a blue goal zone");
  if (config_.step_limit <= 0) throw EnvError("step_limit must be positive");
  if (config_.ticks_per_action <= 0) throw EnvError("ticks_per_action must be positive");
  if (config_.depth_rays <= 0) throw EnvError("depth_rays must be positive");

  auto bounds = static_bounds(initial_);
  if (!bounds) throw EnvError("maze scene has no walls");
  bounds_ = *bounds;
  grid_ = occupancy_grid(initial_, initial_.cell_size, bounds_);
  scene_ = initial_;
}

std::vector<double> MazeEnv::reset(std::uint64_t) {
  scene_ = initial_;
  begin_episode();
  const Pose& p = scene_.at(agent_).pose;
  entered_.assign(config_.zones.size(), false);
  for (std::size_t i = 0; i < config_.zones.size(); ++i) entered_[i] = config_.zones[i].region.contains(p.x, p.y);
  return observe();
}

int MazeEnv::obs_dim() const { return config_.obs == ObsMode::depth ? config_.depth_rays : 6 + kProximityRays; }

ActionSpace MazeEnv::action_space() const {
  if (config_.actions == ActionMode::continuous) {
    const auto& l = initial_.limits;
    return {0, {-l.v_max, -l.omega_max}, {l.v_max, l.omega_max}};
  }
  return {moves_for(config_.actions), {}, {}};
}

std::optional<int> MazeEnv::state_index() const {
  const Pose& p = scene_.at(agent_).pose;
  auto [col, row] = grid_.cell_of(p.x, p.y);
  if (!grid_.in_bounds(col, row)) return std::nullopt;
  return static_cast<int>(grid_.index(col, row));
}

bool MazeEnv::in_goal(double x, double y) const {
  for (const auto& z : config_.zones)
    if (z.name == "blue" && z.region.contains(x, y)) return true;
  return false;
}

std::vector<double> MazeEnv::observe() const {
  const Pose& p = scene_.at(agent_).pose;
  const double w = bounds_.max_x - bounds_.min_x, h = bounds_.max_y - bounds_.min_y;
  const double range = std::hypot(w, h);
  std::vector<double> obs;
  obs.reserve(obs_dim());
  auto push_depths = [&](const DepthScan& scan) {
    for (double d : scan.depth) obs.push_back(std::isfinite(d) ? std::min(d, range) / range : 1.0);
  };
  if (config_.obs == ObsMode::depth) {
    push_depths(render_first_person(scene_, agent_, config_.depth_rays, config_.depth_rays == 1 ? 0.0 : config_.depth_fov));
    return obs;
  }
  obs.push_back((p.x - bounds_.min_x) / w);
  obs.push_back((p.y - bounds_.min_y) / h);
  obs.push_back(std::cos(p.yaw));
  obs.push_back(std::sin(p.yaw));
  obs.push_back((goal_.x - p.x) / w);
  obs.push_back((goal_.y - p.y) / h);
  push_depths(render_first_person(scene_, agent_, kProximityRays, 2 * kPi * (kProximityRays - 1) / kProximityRays));
  return obs;
}

Pose MazeEnv::simulate_move(const Pose& from, int action, double distance, bool* collided) const {
  SceneGraph s = initial_;
  s.entities.at(agent_).pose = from;
  bool hit = drive(s, agent_, action, distance);
  const double cs = distance / std::hypot(kMoveDx[action], kMoveDy[action]);
  snap_to_cell(s, agent_, bounds_.min_x, bounds_.min_y, cs);
  if (collided) *collided = hit;
  return s.at(agent_).pose;
}

StepResult MazeEnv::step(int action) {
  check_running();
  if (config_.actions == ActionMode::continuous) throw EnvError("maze is configured for continuous actions");
  if (action < 0 || action >= moves_for(config_.actions)) throw EnvError("action index out of range");
  const double cs = initial_.cell_size;
  const double dist = cs * std::hypot(kMoveDx[action], kMoveDy[action]);
  bool collided = drive(scene_, agent_, action, dist);
  snap_to_cell(scene_, agent_, grid_.origin_x, grid_.origin_y, cs);
  return finish_step(collided);
}

StepResult MazeEnv::step(const std::vector<double>& action) {
  check_running();
  if (config_.actions != ActionMode::continuous) throw EnvError("maze is configured for discrete actions");
  if (action.size() != 2) throw EnvError("continuous action must be (v, omega)");
  if (!std::isfinite(action[0]) || !std::isfinite(action[1])) throw EnvError("non-finite action");
  const auto& l = initial_.limits;
  VelocityCommand cmd{agent_, std::clamp(action[0], -l.v_max, l.v_max), std::clamp(action[1], -l.omega_max, l.omega_max)};
  bool collided = false;
  for (int i = 0; i < config_.ticks_per_action; ++i) collided |= has_collision(advance(scene_, {cmd}));
  return finish_step(collided);
}

StepResult MazeEnv::finish_step(bool collided) {
  StepResult r;
  r.info.collision = collided;
  r.reward = config_.step_penalty + (collided ? config_.collision_penalty : 0.0);
  const Pose& p = scene_.at(agent_).pose;
  int best_rank = -1;
  for (std::size_t i = 0; i < config_.zones.size(); ++i) {
    const Zone& z = config_.zones[i];
    if (!z.region.contains(p.x, p.y)) continue;
    if (!entered_[i]) {
      entered_[i] = true;
      r.reward += z.reward;
    }
    if (zone_rank(z.name) > best_rank) {
      best_rank = zone_rank(z.name);
      r.info.zone = z.name;
    }
  }
  r.info.success = in_goal(p.x, p.y);
  r.done = r.info.success;
  r.observation = observe();
  account(r);
  return r;
}

// ---------------------------------------------------------------- grasp

GraspEnv::GraspEnv(GraspConfig config) : config_(std::move(config)) {
  const int n = config_.size;
  if (n < 3) throw EnvError("grasp grid size must be at least 3");
  auto inside = [&](std::pair<int, int> c) { return c.first >= 0 && c.second >= 0 && c.first < n && c.second < n; };
  if (!inside(config_.start) || !inside(config_.object)) throw EnvError("start/object outside the grid");
  if (config_.start == config_.object) throw EnvError("start and object share a cell");
  if (config_.step_limit <= 0) throw EnvError("step_limit must be positive");
  std::vector<std::string> rows(n + 2, std::string(n + 2, '.'));
  for (int i = 0; i < n + 2; ++i) rows[0][i] = rows[n + 1][i] = rows[i][0] = rows[i][n + 1] = '#';
  auto at = [&](std::pair<int, int> c) -> char& { return rows[n - c.second][c.first + 1]; };
  for (auto c : config_.obstacles) {
    if (!inside(c)) throw EnvError("obstacle outside the grid");
    if (c == config_.start || c == config_.object) throw EnvError("obstacle on the start or object cell");
    at(c) = '#';
  }
  at(config_.start) = 'A';
  at(config_.object) = 'o';
  initial_ = scene_from_ascii(rows, 1.0);
  scene_ = initial_;
}

std::vector<double> GraspEnv::reset(std::uint64_t) {
  scene_ = initial_;
  begin_episode();
  return observe();
}

std::pair<int, int> GraspEnv::cell_of(const Pose& p) const {
  return {static_cast<int>(std::floor(p.x)) - 1, static_cast<int>(std::floor(p.y)) - 1};
}

std::optional<int> GraspEnv::state_index() const {
  auto [c, r] = cell_of(scene_.at("agent").pose);
  return r * config_.size + c;
}

std::vector<double> GraspEnv::observe() const {
  const double n = config_.size;
  const Pose& a = scene_.at("agent").pose;
  const Pose& o = scene_.at(kObjectId).pose;
  return {(a.x - 1.0) / n, (a.y - 1.0) / n, (o.x - a.x) / n, (o.y - a.y) / n};
}

bool GraspEnv::can_grasp_from(int col, int row) const {
  SceneGraph s = initial_;
  Vec2 c = cell_center(col, row);
  s.entities.at("agent").pose = {c.x, c.y, 0.0};
  return interact_in_place(s, {"agent", Verb::grasp, std::string(kObjectId)}).outcome == Outcome::ok;
}

Pose GraspEnv::simulate_move(const Pose& from, int action) const {
  SceneGraph s = initial_;
  s.entities.at("agent").pose = from;
  drive(s, "agent", action, std::hypot(kMoveDx[action], kMoveDy[action]));
  snap_to_cell(s, "agent", 0.0, 0.0, 1.0);
  return s.at("agent").pose;
}

StepResult GraspEnv::step(int action) {
  check_running();
  if (action < 0 || action > grasp_action()) throw EnvError("action index out of range");
  StepResult r;
  if (action == grasp_action()) {
    auto ev = interact_in_place(scene_, {"agent", Verb::grasp, std::string(kObjectId)});
    r.info.success = ev.outcome == Outcome::ok;
  } else {
    r.info.collision = drive(scene_, "agent", action, std::hypot(kMoveDx[action], kMoveDy[action]));
    snap_to_cell(scene_, "agent", 0.0, 0.0, 1.0);
  }
  r.reward = r.info.success ? config_.success_reward : config_.step_penalty;
  r.done = r.info.success;
  r.observation = observe();
  account(r);
  return r;
}

// ---------------------------------------------------------------- export

GridMDP as_grid_mdp(const MazeEnv& env, double resolution, FeatureSet features, double gamma) {
  if (!(resolution > 0.0)) throw EnvError("resolution must be positive");
  const SceneGraph& scene = env.initial_scene();
  OccupancyGrid g = occupancy_grid(scene, resolution, static_bounds(scene));
  GridMDP m;
  m.width = g.width;
  m.height = g.height;
  m.resolution = resolution;
  m.origin_x = g.origin_x;
  m.origin_y = g.origin_y;
  std::vector<int> state_at(g.cells.size(), -1);
  for (int row = 0; row < g.height; ++row)
    for (int col = 0; col < g.width; ++col)
      if (!g.blocked(col, row)) {
        state_at[g.index(col, row)] = static_cast<int>(m.cells.size());
        m.cells.emplace_back(col, row);
      }
  m.n_states = static_cast<int>(m.cells.size());
  if (m.n_states == 0) throw EnvError("resolution leaves no free cells");
  m.n_actions = moves_for(env.config().actions);
  for (int a = 0; a < m.n_actions; ++a) m.action_names.emplace_back(kMoveNames[a]);
  m.gamma = gamma;
  m.reward.assign(m.n_states, 0.0);
  m.terminal.assign(m.n_states, 0);
  m.start.assign(m.n_states, 0.0);
  m.next.resize(static_cast<std::size_t>(m.n_states) * m.n_actions);

  std::vector<std::array<double, 4>> zone_flags(m.n_states, {0, 0, 0, 0});
  for (int s = 0; s < m.n_states; ++s) {
    auto [col, row] = m.cells[s];
    Vec2 c = g.center(col, row);
    int best = -1;
    for (const auto& z : env.zones()) {
      if (!z.region.contains(c.x, c.y)) continue;
      int rank = zone_rank(z.name);
      zone_flags[s][rank] = 1.0;
      if (rank > best) {
        best = rank;
        m.reward[s] = z.reward;
      }
    }
    m.terminal[s] = env.in_goal(c.x, c.y);
  }

  const Pose spawn = scene.at(env.agent_id()).pose;
  for (int s = 0; s < m.n_states; ++s) {
    auto [col, row] = m.cells[s];
    Vec2 c = g.center(col, row);
    for (int a = 0; a < m.n_actions; ++a) {
      int target = s;
      if (!m.terminal[s]) {
        Pose p = env.simulate_move({c.x, c.y, spawn.yaw}, a, resolution * std::hypot(kMoveDx[a], kMoveDy[a]));
        auto [tc, tr] = g.cell_of(p.x, p.y);
        if (g.in_bounds(tc, tr) && state_at[g.index(tc, tr)] >= 0) target = state_at[g.index(tc, tr)];
      }
      m.next[static_cast<std::size_t>(s) * m.n_actions + a] = target;
    }
  }
  auto [sc, sr] = g.cell_of(spawn.x, spawn.y);
  if (!g.in_bounds(sc, sr) || state_at[g.index(sc, sr)] < 0) throw EnvError("spawn is not on a free cell");
  m.start[state_at[g.index(sc, sr)]] = 1.0;

  if (features == FeatureSet::one_hot) {
    set_one_hot_features(m);
  } else {
    // zone indicators (4), normalized goal distance, blocked 4-neighbour share
    m.feature_dim = 6;
    m.features.assign(static_cast<std::size_t>(m.n_states) * 6, 0.0);
    const double diag = std::hypot(g.width * resolution, g.height * resolution);
    for (int s = 0; s < m.n_states; ++s) {
      auto [col, row] = m.cells[s];
      Vec2 c = g.center(col, row);
      double* f = m.features.data() + static_cast<std::size_t>(s) * 6;
      for (int k = 0; k < 4; ++k) f[k] = zone_flags[s][k];
      f[4] = std::hypot(env.goal().x - c.x, env.goal().y - c.y) / diag;
      int blocked = 0;
      for (int a = 0; a < 4; ++a) {
        int nc = col + kMoveDx[a], nr = row + kMoveDy[a];
        if (!g.in_bounds(nc, nr) || g.blocked(nc, nr)) ++blocked;
      }
      f[5] = blocked / 4.0;
    }
  }
  m.validate();
  return m;
}

GridMDP as_grid_mdp(const GraspEnv& env, FeatureSet features, double gamma) {
  const auto& cfg = env.config();
  const int n = cfg.size;
  std::set<std::pair<int, int>> blocked(cfg.obstacles.begin(), cfg.obstacles.end());
  GridMDP m;
  m.width = n;
  m.height = n;
  m.resolution = 1.0;
  m.origin_x = 1.0;
  m.origin_y = 1.0;
  std::vector<int> state_at(static_cast<std::size_t>(n) * n, -1);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col)
      if (!blocked.count({col, row})) {
        state_at[static_cast<std::size_t>(row) * n + col] = static_cast<int>(m.cells.size());
        m.cells.emplace_back(col, row);
      }
  const int free_cells = static_cast<int>(m.cells.size());
  for (int i = 0; i < free_cells; ++i) m.cells.push_back(m.cells[i]);
  m.n_states = 2 * free_cells;
  m.holding.assign(m.n_states, 0);
  for (int s = free_cells; s < m.n_states; ++s) m.holding[s] = 1;
  m.n_actions = env.n_moves() + 1;
  for (int a = 0; a < env.n_moves(); ++a) m.action_names.emplace_back(kMoveNames[a]);
  m.action_names.emplace_back("grasp");
  m.gamma = gamma;
  m.reward.assign(m.n_states, 0.0);
  m.terminal.assign(m.n_states, 0);
  m.start.assign(m.n_states, 0.0);
  m.next.resize(static_cast<std::size_t>(m.n_states) * m.n_actions);

  std::vector<std::uint8_t> graspable(free_cells, 0);
  for (int s = 0; s < free_cells; ++s) graspable[s] = env.can_grasp_from(m.cells[s].first, m.cells[s].second);
  for (int s = 0; s < m.n_states; ++s) {
    const bool hold = s >= free_cells;
    auto [col, row] = m.cells[s];
    if (hold) {
      m.terminal[s] = 1;
      m.reward[s] = cfg.success_reward;
    }
    for (int a = 0; a < m.n_actions; ++a) {
      int target = s;
      if (!hold && a == env.grasp_action()) {
        if (graspable[s]) target = s + free_cells;
      } else if (!hold) {
        Vec2 c = env.cell_center(col, row);
        auto [tc, tr] = env.cell_of(env.simulate_move({c.x, c.y, 0.0}, a));
        if (tc >= 0 && tr >= 0 && tc < n && tr < n && state_at[static_cast<std::size_t>(tr) * n + tc] >= 0)
          target = state_at[static_cast<std::size_t>(tr) * n + tc];
      }
      m.next[static_cast<std::size_t>(s) * m.n_actions + a] = target;
    }
  }
  m.start[state_at[static_cast<std::size_t>(cfg.start.second) * n + cfg.start.first]] = 1.0;

  if (features == FeatureSet::one_hot) {
    set_one_hot_features(m);
  } else {
    // holding, normalized Manhattan distance to the object, graspable, blocked 4-neighbour share
    m.feature_dim = 4;
    m.features.assign(static_cast<std::size_t>(m.n_states) * 4, 0.0);
    for (int s = 0; s < m.n_states; ++s) {
      auto [col, row] = m.cells[s];
      double* f = m.features.data() + static_cast<std::size_t>(s) * 4;
      f[0] = m.holding[s];
      f[1] = (std::abs(col - cfg.object.first) + std::abs(row - cfg.object.second)) / (2.0 * (n - 1));
      f[2] = graspable[s % free_cells];
      int b = 0;
      for (int a = 0; a < 4; ++a) {
        int nc = col + kMoveDx[a], nr = row + kMoveDy[a];
        if (nc < 0 || nr < 0 || nc >= n || nr >= n || blocked.count({nc, nr})) ++b;
      }
      f[3] = b / 4.0;
    }
  }
  m.validate();
  return m;
}

GridMDP as_grid_mdp(const Environment& env, double resolution, FeatureSet features, double gamma) {
  if (const auto* maze = dynamic_cast<const MazeEnv*>(&env)) return as_grid_mdp(*maze, resolution, features, gamma);
  if (const auto* grasp = dynamic_cast<const GraspEnv*>(&env)) {
    if (resolution != 1.0) throw EnvError("grasp MDP export uses the task grid (resolution 1)");
    return as_grid_mdp(*grasp, features, gamma);
  }
  throw EnvError("environment has no grid export");
}

Trajectory rollout(Environment& env, const DiscretePolicy& policy, std::uint64_t seed, int max_steps) {
  Trajectory t;
  std::vector<double> obs = env.reset(seed);
  for (int i = 0; i < max_steps && !env.done(); ++i) {
    Transition tr;
    tr.observation = obs;
    tr.state = env.state_index();
    tr.action = policy(obs, tr.state);
    StepResult r = env.step(tr.action);
    tr.reward = r.reward;
    t.total_reward += r.reward;
    t.success = r.info.success;
    t.steps.push_back(std::move(tr));
    obs = std::move(r.observation);
  }
  t.final_observation = obs;
  t.final_state = env.state_index();
  return t;
}

MazeConfig maze_config_from_json(const json& j) {
  MazeConfig c;
  try {
    if (j.contains("zones")) c.zones = zones_from_json(j["zones"]);
    std::string obs = j.value("obs", "features");
    if (obs == "features")
      c.obs = ObsMode::features;
    else if (obs == "depth")
      c.obs = ObsMode::depth;
    else
      throw EnvError("obs must be 'features' or 'depth'");
    std::string act = j.value("actions", "discrete4");
    if (act == "discrete4")
      c.actions = ActionMode::discrete4;
    else if (act == "discrete8")
      c.actions = ActionMode::discrete8;
    else if (act == "continuous")
      c.actions = ActionMode::continuous;
    else
      throw EnvError("actions must be discrete4, discrete8 or continuous");
    c.step_limit = j.value("step_limit", c.step_limit);
    c.collision_penalty = j.value("collision_penalty", c.collision_penalty);
    c.step_penalty = j.value("step_penalty", c.step_penalty);
    c.depth_rays = j.value("depth_rays", c.depth_rays);
    c.depth_fov = j.value("depth_fov", c.depth_fov);
    c.ticks_per_action = j.value("ticks_per_action", c.ticks_per_action);
  } catch (const json::exception& e) {
    throw EnvError(std::string("bad maze config: ") + e.what());
  }
  return c;
}

GraspConfig grasp_config_from_json(const json& j) {
  GraspConfig c;
  try {
    c.size = j.value("size", c.size);
    if (j.contains("start")) c.start = j["start"].get<std::pair<int, int>>();
    c.object = j.contains("object") ? j["object"].get<std::pair<int, int>>() : std::pair{c.size - 1, c.size - 1};
    if (j.contains("obstacles")) c.obstacles = j["obstacles"].get<std::vector<std::pair<int, int>>>();
    c.diagonal = j.value("actions", std::string("discrete4")) == "discrete8" || j.value("diagonal", false);
    c.step_limit = j.value("step_limit", c.step_limit);
    c.success_reward = j.value("success_reward", c.success_reward);
    c.step_penalty = j.value("step_penalty", c.step_penalty);
  } catch (const json::exception& e) {
    throw EnvError(std::string("bad grasp config: ") + e.what());
  }
  return c;
}

std::unique_ptr<Environment> make_env(const json& config, const std::filesystem::path& base_dir) {
  const std::string task = config.value("task", "maze");
  if (task == "grasp") return std::make_unique<GraspEnv>(grasp_config_from_json(config));
  if (task != "maze") throw EnvError("unknown task '" + task + "'");
  if (!config.contains("scene")) throw EnvError("maze config needs a scene");
  std::string doc;
  if (config["scene"].is_string()) {
    std::filesystem::path p = config["scene"].get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    doc = read_file(p);
  } else {
    doc = config["scene"].dump();
  }
  return std::make_unique<MazeEnv>(doc, maze_config_from_json(config));
}

}  // namespace vrgym::envs

#include <doctest.h>

#include <fstream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "vrgym/envs.hpp"

using namespace vrgym;
using namespace vrgym::envs;

namespace {

std::string read(const std::string& name) {
  std::ifstream in(std::string(VRGYM_DATA_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

enum Move { N = 0, S = 1, E = 2, W = 3, NE = 4 };

const char* kOpen5 = R"({"cell_size": 1, "ascii": ["#######", "#....G#", "#.....#", "#.....#", "#.....#", "#A....#", "#######"]})";

}  // namespace

TEST_CASE("zones must increase red < yellow < green < blue") {
  CHECK_NOTHROW(validate_zones({{"red", {0, 0, 1, 1}, 0.1}, {"blue", {1, 1, 2, 2}, 1.0}}));
  CHECK_THROWS_AS(validate_zones({{"red", {0, 0, 1, 1}, 0.6}, {"green", {1, 1, 2, 2}, 0.5}}), EnvError);
  CHECK_THROWS_AS(validate_zones({{"purple", {0, 0, 1, 1}, 0.1}}), EnvError);
  CHECK(default_zone_reward("red") < default_zone_reward("yellow"));
  CHECK(default_zone_reward("yellow") < default_zone_reward("green"));
  CHECK(default_zone_reward("green") < default_zone_reward("blue"));
  MazeEnv env(read("maze.json"), {});
  CHECK(env.zones().size() == 4);
}

TEST_CASE("maze: missing spawn or goal is rejected") {
  CHECK_THROWS_AS(MazeEnv(R"({"ascii": ["####", "#.G#", "####"]})", {}), EnvError);
  CHECK_THROWS_AS(MazeEnv(R"({"ascii": ["####", "#A.#", "####"]})", {}), EnvError);
}

TEST_CASE("maze: moving into a wall is clamped and penalized") {
  MazeEnv env(read("maze.json"), {});
  env.reset(1);
  Pose before = env.scene().at("agent").pose;
  StepResult r = env.step(N);
  CHECK(r.info.collision);
  CHECK(r.reward == doctest::Approx(-0.01 - 0.1));
  Pose after = env.scene().at("agent").pose;
  CHECK(after.x == before.x);
  CHECK(after.y == before.y);

  r = env.step(E);
  CHECK_FALSE(r.info.collision);
  CHECK(r.reward == doctest::Approx(-0.01));
  CHECK(env.scene().at("agent").pose.x == before.x + 1.0);
}

TEST_CASE("maze: scripted optimal path reaches the goal and collects every zone once") {
  MazeEnv env(read("maze.json"), {});
  env.reset(1);
  std::vector<int> path;
  auto add = [&](int a, int n) { path.insert(path.end(), n, a); };
  add(E, 6); add(S, 2); add(W, 6); add(S, 2); add(E, 6); add(S, 2); add(W, 6);
  double total = 0;
  StepResult r;
  for (std::size_t i = 0; i < path.size(); ++i) {
    r = env.step(path[i]);
    total += r.reward;
    if (i + 1 < path.size()) CHECK_FALSE(r.done);
  }
  CHECK(r.done);
  CHECK(r.info.success);
  CHECK(r.info.zone == "blue");
  CHECK(total == doctest::Approx(0.1 + 0.25 + 0.5 + 1.0 - 0.01 * 30));
  CHECK(total == doctest::Approx(env.episode_return()));
  CHECK_THROWS_AS(env.step(E), EnvError);
}

TEST_CASE("maze: standing still until the step limit") {
  MazeConfig cfg;
  cfg.actions = ActionMode::continuous;
  cfg.step_limit = 50;
  MazeEnv env(read("maze.json"), cfg);
  env.reset(3);
  double total = 0;
  StepResult r;
  int n = 0;
  do {
    r = env.step(std::vector<double>{0.0, 0.0});
    total += r.reward;
    ++n;
  } while (!r.done);
  CHECK(n == 50);
  CHECK_FALSE(r.info.success);
  CHECK(total == doctest::Approx(50 * -0.01));
}

TEST_CASE("maze: reset purity and observation dimensions") {
  MazeEnv env(read("maze.json"), {});
  auto a = env.reset(1);
  env.step(E);
  env.step(E);
  auto b = env.reset(1);
  CHECK(a == b);
  CHECK(static_cast<int>(a.size()) == env.obs_dim());
  CHECK(env.obs_dim() == 14);
  for (double v : a) CHECK(std::isfinite(v));

  MazeConfig depth;
  depth.obs = ObsMode::depth;
  MazeEnv denv(read("maze.json"), depth);
  auto d = denv.reset(0);
  CHECK(d.size() == 32);
  for (double v : d) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("maze: continuous actions are bounded") {
  MazeConfig cfg;
  cfg.actions = ActionMode::continuous;
  MazeEnv env(read("corridor.json"), cfg);
  auto space = env.action_space();
  CHECK_FALSE(space.discrete());
  CHECK(space.high == std::vector<double>{2.0, kPi});
  env.reset(0);
  double x0 = env.scene().at("agent").pose.x;
  env.step(std::vector<double>{100.0, 0.0});  // clamped to v_max
  CHECK(env.scene().at("agent").pose.x == doctest::Approx(x0 + 2.0 * 6 / 60.0));
  CHECK_THROWS_AS(env.step(1), EnvError);
}

TEST_CASE("maze: reward accounting over random episodes") {
  MazeEnv env(read("maze.json"), {});
  std::mt19937_64 rng(8);
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(ep);
    double total = 0;
    StepResult r;
    do {
      r = env.step(static_cast<int>(rng() % 4));
      total += r.reward;
    } while (!r.done);
    CHECK(total == doctest::Approx(env.episode_return()).epsilon(1e-12));
    CHECK(env.steps() <= 500);
  }
}

TEST_CASE("grasp env") {
  GraspEnv env({});
  env.reset(0);
  StepResult far = env.step(env.grasp_action());
  CHECK_FALSE(far.done);
  CHECK(far.reward == doctest::Approx(-0.01));

  GraspConfig near;
  near.start = {3, 4};
  GraspEnv env2(near);
  env2.reset(0);
  StepResult ok = env2.step(env2.grasp_action());
  CHECK(ok.done);
  CHECK(ok.info.success);
  CHECK(ok.reward == 1.0);

  CHECK_THROWS_AS(GraspEnv(GraspConfig{2}), EnvError);
}

TEST_CASE("grasp env: optimal episode length is Manhattan distance to a grasp cell plus one") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    GraspConfig cfg;
    cfg.size = 3 + static_cast<int>(rng() % 4);
    cfg.object = {static_cast<int>(rng() % cfg.size), static_cast<int>(rng() % cfg.size)};
    do {
      cfg.start = {static_cast<int>(rng() % cfg.size), static_cast<int>(rng() % cfg.size)};
    } while (cfg.start == cfg.object);
    GraspEnv env(cfg);
    // Nearest grasp pose: the object's own cell or a 4-neighbour.
    int best = 1 << 30;
    for (int c = 0; c < cfg.size; ++c)
      for (int r = 0; r < cfg.size; ++r)
        if (std::abs(c - cfg.object.first) + std::abs(r - cfg.object.second) <= 1)
          best = std::min(best, std::abs(c - cfg.start.first) + std::abs(r - cfg.start.second));
    for (int c = 0; c < cfg.size; ++c)
      for (int r = 0; r < cfg.size; ++r)
        CHECK(env.can_grasp_from(c, r) == (std::abs(c - cfg.object.first) + std::abs(r - cfg.object.second) <= 1));

    // Greedy walk toward the object, grasping as soon as it is reachable.
    env.reset(0);
    StepResult res;
    int steps = 0;
    while (true) {
      auto [c, r] = env.cell_of(env.scene().at("agent").pose);
      int a;
      if (env.can_grasp_from(c, r))
        a = env.grasp_action();
      else if (c < cfg.object.first)
        a = E;
      else if (c > cfg.object.first)
        a = W;
      else if (r < cfg.object.second)
        a = N;
      else
        a = S;
      res = env.step(a);
      ++steps;
      if (res.done) break;
    }
    CHECK(res.info.success);
    CHECK(steps == best + 1);

    // The MDP agrees: shortest path to a holding state.
    GridMDP m = as_grid_mdp(env);
    std::vector<int> dist(m.n_states, -1);
    int s0 = m.state_of(cfg.start.first, cfg.start.second);
    std::queue<int> q;
    dist[s0] = 0;
    q.push(s0);
    while (!q.empty()) {
      int s = q.front();
      q.pop();
      for (int a = 0; a < m.n_actions; ++a) {
        int t = m.succ(s, a);
        if (dist[t] < 0) {
          dist[t] = dist[s] + 1;
          q.push(t);
        }
      }
    }
    int to_hold = 1 << 30;
    for (int s = 0; s < m.n_states; ++s)
      if (m.holding[s] && dist[s] >= 0) to_hold = std::min(to_hold, dist[s]);
    CHECK(to_hold == best + 1);
  }
}

TEST_CASE("as_grid_mdp: single free cell") {
  const char* doc = R"({"cell_size": 1, "ascii": ["###", "#A#", "###"],
    "entities": [{"id": "goal", "kind": "object", "pose": {"x": 1.5, "y": 1.5, "yaw": 0}, "half_extents": [0.5, 0.5],
                  "fluents": {"marker": "goal"}}],
    "zones": [{"name": "blue", "box": [5, 5, 6, 6]}]})";
  MazeEnv env(doc, {});
  GridMDP m = as_grid_mdp(env, 1.0);
  CHECK(m.n_states == 1);
  for (int a = 0; a < m.n_actions; ++a) CHECK(m.succ(0, a) == 0);
}

TEST_CASE("as_grid_mdp: free 2x2 grid matches the gridworld oracle") {
  const char* doc = R"({"cell_size": 1, "ascii": ["####", "#.G#", "#A.#", "####"],
                        "zones": [{"name": "blue", "box": [10, 10, 11, 11]}]})";
  MazeEnv env(doc, {});
  GridMDP m = as_grid_mdp(env, 1.0);
  GridMDP oracle = gridworld_mdp(2, 2);
  REQUIRE(m.n_states == 4);
  CHECK(m.next.size() == 16);
  CHECK(m.next == oracle.next);
  for (int i = 0; i < 4; ++i) {  // the map grid includes the outer wall ring
    CHECK(m.cells[i].first - 1 == oracle.cells[i].first);
    CHECK(m.cells[i].second - 1 == oracle.cells[i].second);
  }
}

TEST_CASE("as_grid_mdp: zone rewards keep their order and the goal is terminal") {
  MazeEnv env(read("maze.json"), {});
  GridMDP m = as_grid_mdp(env, 1.0);
  CHECK(m.n_states == 31);
  auto reward_at = [&](int col, int row) { return m.reward[m.state_of(col, row)]; };
  // grid rows count from the south wall: row 7 is the top corridor
  double red = reward_at(3, 5), yellow = reward_at(3, 3), green = reward_at(5, 1), blue = reward_at(1, 1);
  CHECK(red < yellow);
  CHECK(yellow < green);
  CHECK(green < blue);
  CHECK(m.terminal[m.state_of(1, 1)]);
  CHECK(m.start[m.state_of(1, 7)] == 1.0);

  GridMDP hc = as_grid_mdp(env, 1.0, FeatureSet::hand_crafted);
  CHECK(hc.feature_dim == 6);
  CHECK_THROWS_AS(as_grid_mdp(env, 20.0), EnvError);
}

TEST_CASE("as_grid_mdp: moves agree with the occupancy grid on random maps") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 6, h = 5;
    std::vector<std::string> rows(h + 2, std::string(w + 2, '#'));
    for (int r = 1; r <= h; ++r)
      for (int c = 1; c <= w; ++c) rows[r][c] = rng() % 4 == 0 ? '#' : '.';
    rows[1][1] = 'A';
    rows[h][w] = 'G';
    nlohmann::json doc = {{"cell_size", 1}, {"ascii", rows}, {"zones", {{{"name", "blue"}, {"box", {50, 50, 51, 51}}}}}};
    MazeEnv env(doc.dump(), {});
    GridMDP m = as_grid_mdp(env, 1.0);
    const OccupancyGrid& g = env.grid();
    std::set<std::pair<int, int>> mdp_cells(m.cells.begin(), m.cells.end());
    for (int s = 0; s < m.n_states; ++s) {
      auto [c, r] = m.cells[s];
      std::set<int> moves, expected;
      for (int a = 0; a < 4; ++a) {
        if (m.succ(s, a) != s) moves.insert(m.succ(s, a));
        int nc = c + kMoveDx[a], nr = r + kMoveDy[a];
        if (g.in_bounds(nc, nr) && !g.blocked(nc, nr)) expected.insert(m.state_of(nc, nr));
      }
      CHECK(moves == expected);
    }
    CHECK(static_cast<std::size_t>(m.n_states) == g.count_free());
  }
}

TEST_CASE("rollout") {
  MazeEnv env(kOpen5, {});
  Trajectory wall = rollout(env, [](auto&, auto) { return static_cast<int>(W); }, 0, 5);
  REQUIRE(wall.steps.size() == 5);
  for (const auto& t : wall.steps) CHECK(t.state == wall.steps[0].state);

  Pose goal{5.5, 5.5, 0};
  auto greedy = [&](const std::vector<double>&, std::optional<int>) {
    const Pose& p = env.scene().at("agent").pose;
    return static_cast<int>(p.x < goal.x ? E : N);
  };
  Trajectory t4 = rollout(env, greedy, 0, 100);
  CHECK(t4.success);
  CHECK(t4.steps.size() == 8);

  MazeConfig c8;
  c8.actions = ActionMode::discrete8;
  MazeEnv env8(kOpen5, c8);
  Trajectory t8 = rollout(env8, [](auto&, auto) { return static_cast<int>(NE); }, 0, 100);
  CHECK(t8.success);
  CHECK(t8.steps.size() == 4);

  std::mt19937_64 r1(5), r2(5);
  MazeEnv maze(read("maze.json"), {});
  Trajectory a = rollout(maze, [&](auto&, auto) { return static_cast<int>(r1() % 4); }, 9, 200);
  Trajectory b = rollout(maze, [&](auto&, auto) { return static_cast<int>(r2() % 4); }, 9, 200);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].observation == b.steps[i].observation);
    CHECK(a.steps[i].reward == b.steps[i].reward);
  }
}

TEST_CASE("make_env from config documents") {
  for (const char* name : {"maze_env.json", "corridor_env.json", "grasp_env.json"}) {
    auto cfg = nlohmann::json::parse(read(name));
    auto env = make_env(cfg, VRGYM_DATA_DIR);
    auto obs = env->reset(0);
    CHECK(static_cast<int>(obs.size()) == env->obs_dim());
  }
  CHECK_THROWS_AS(make_env({{"task", "juggle"}}), EnvError);
}

TEST_CASE("gridworld oracle and MDP json round trip") {
  GridMDP m = gridworld_mdp(3, 2, true);
  CHECK(m.n_actions == 8);
  CHECK(m.succ(0, 4) == 4);  // NE from (0,0) lands on (1,1)
  CHECK(m.succ(0, 1) == 0);  // S off the grid is a self-loop
  GridMDP back = grid_mdp_from_json(to_json(m));
  CHECK(back.next == m.next);
  CHECK(back.features == m.features);
}

#include "vrgym/intent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <tuple>

namespace vrgym::intent {

using nlohmann::json;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

GoalPosterior normalized(const GoalSet& goals, std::vector<double> weights) {
  double z = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(z > 0.0) || !std::isfinite(z)) throw IntentError("posterior has no mass");
  GoalPosterior p;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    p.ids.push_back(goals[i].id);
    p.prob.push_back(weights[i] / z);
  }
  return p;
}

// Softmax of -beta * d, shifted by the smallest d for stability.
GoalPosterior boltzmann(const GoalSet& goals, const std::vector<double>& d, double beta) {
  double lo = *std::min_element(d.begin(), d.end());
  std::vector<double> w(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) w[i] = std::exp(-beta * (d[i] - lo));
  return normalized(goals, std::move(w));
}

bool free_cell(const OccupancyGrid& g, GridCell c) {
  return g.in_bounds(c.first, c.second) && !g.blocked(c.first, c.second);
}

double octile(GridCell a, GridCell b) {
  double dx = std::abs(a.first - b.first), dy = std::abs(a.second - b.second);
  return (dx + dy) + (kSqrt2 - 2.0) * std::min(dx, dy);
}

}  // namespace

void validate_goals(const GoalSet& goals) {
  if (goals.empty()) throw IntentError("goal set is empty");
  std::set<std::string> seen;
  for (const Goal& g : goals)
    if (!seen.insert(g.id).second) throw IntentError("duplicate goal id '" + g.id + "'");
}

std::vector<std::string> default_goal_ids(const SceneGraph& scene) {
  std::vector<std::string> ids;
  for (const auto& [id, e] : scene.entities)
    if (e.kind == EntityKind::object && !e.attached_to && !e.fluents.count("marker")) ids.push_back(id);
  return ids;
}

GoalSet goals_from_scene(const SceneGraph& scene, const OccupancyGrid& grid, const std::vector<std::string>& ids) {
  GoalSet out;
  for (const std::string& id : ids) {
    const Entity* e = scene.find(id);
    if (!e) throw IntentError("no entity '" + id + "' for goal");
    Goal g{id, {e->pose.x, e->pose.y}, grid.cell_of(e->pose.x, e->pose.y)};
    // Objects often sit on furniture; plan to the nearest free cell instead.
    if (!free_cell(grid, g.cell)) {
      double best = kInf;
      GridCell pick = g.cell;
      for (int r = 1; r <= 3 && best == kInf; ++r)
        for (int dx = -r; dx <= r; ++dx)
          for (int dy = -r; dy <= r; ++dy) {
            GridCell c{g.cell.first + dx, g.cell.second + dy};
            if (!free_cell(grid, c)) continue;
            Vec2 m = grid.center(c.first, c.second);
            double d = std::hypot(m.x - g.position.x, m.y - g.position.y);
            if (d < best) {
              best = d;
              pick = c;
            }
          }
      g.cell = pick;
    }
    out.push_back(std::move(g));
  }
  validate_goals(out);
  return out;
}

double GoalPosterior::of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return prob[i];
  throw IntentError("no goal '" + id + "' in posterior");
}

const std::string& GoalPosterior::top() const {
  if (ids.empty()) throw IntentError("empty posterior");
  return ids[std::max_element(prob.begin(), prob.end()) - prob.begin()];
}

json GoalPosterior::to_json() const {
  json j = json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = prob[i];
  return j;
}

GoalPosterior predict_straightline(Vec2 pos, const GoalSet& goals, double beta) {
  validate_goals(goals);
  if (!(beta > 0.0)) throw IntentError("beta must be positive");
  std::vector<double> d;
  for (const Goal& g : goals) d.push_back(std::hypot(g.position.x - pos.x, g.position.y - pos.y));
  return boltzmann(goals, d, beta);
}

double perpendicular_distance(Vec2 pos, Vec2 heading, Vec2 point) {
  double n = std::hypot(heading.x, heading.y);
  if (!(n > 0.0)) throw IntentError("heading must be non-zero");
  double hx = heading.x / n, hy = heading.y / n;
  return std::abs(hx * (point.y - pos.y) - hy * (point.x - pos.x));
}

GoalPosterior predict_perpendicular(Vec2 pos, Vec2 heading, const GoalSet& goals, double beta, double back_penalty) {
  validate_goals(goals);
  if (!(beta > 0.0)) throw IntentError("beta must be positive");
  std::vector<double> d;
  for (const Goal& g : goals) {
    double dist = perpendicular_distance(pos, heading, g.position);
    double forward = heading.x * (g.position.x - pos.x) + heading.y * (g.position.y - pos.y);
    d.push_back(forward > 0.0 ? dist : dist + back_penalty);
  }
  return boltzmann(goals, d, beta);
}

// ------------------------------------------------------------- planning

bool can_step(const OccupancyGrid& grid, GridCell from, int dx, int dy) {
  GridCell to{from.first + dx, from.second + dy};
  if (!free_cell(grid, to)) return false;
  if (dx != 0 && dy != 0)
    return free_cell(grid, {from.first + dx, from.second}) && free_cell(grid, {from.first, from.second + dy});
  return true;
}

PathResult a_star(const OccupancyGrid& grid, GridCell from, GridCell to) {
  PathResult out;
  if (!free_cell(grid, from) || !free_cell(grid, to)) return out;
  const std::size_t n = grid.cells.size();
  std::vector<double> g(n, kInf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<char> closed(n, 0);
  using Item = std::tuple<double, int, int>;  // f, col, row
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[grid.index(from.first, from.second)] = 0.0;
  open.emplace(octile(from, to), from.first, from.second);
  while (!open.empty()) {
    auto [f, col, row] = open.top();
    open.pop();
    std::size_t i = grid.index(col, row);
    if (closed[i]) continue;
    closed[i] = 1;
    if (GridCell{col, row} == to) break;
    for (int k = 0; k < 8; ++k) {
      if (!can_step(grid, {col, row}, kDx[k], kDy[k])) continue;
      GridCell nb{col + kDx[k], row + kDy[k]};
      std::size_t j = grid.index(nb.first, nb.second);
      double ng = g[i] + (k < 4 ? 1.0 : kSqrt2);
      if (ng < g[j] - 1e-12) {
        g[j] = ng;
        parent[j] = static_cast<std::int64_t>(i);
        open.emplace(ng + octile(nb, to), nb.first, nb.second);
      }
    }
  }
  std::size_t t = grid.index(to.first, to.second);
  if (g[t] == kInf) return out;
  out.cost = g[t];
  for (std::int64_t c = static_cast<std::int64_t>(t); c >= 0; c = parent[c])
    out.path.emplace_back(static_cast<int>(c % grid.width), static_cast<int>(c / grid.width));
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

std::vector<double> dijkstra(const OccupancyGrid& grid, GridCell from) {
  std::vector<double> d(grid.cells.size(), kInf);
  if (!free_cell(grid, from)) return d;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  d[grid.index(from.first, from.second)] = 0.0;
  open.emplace(0.0, grid.index(from.first, from.second));
  while (!open.empty()) {
    auto [c, i] = open.top();
    open.pop();
    if (c > d[i]) continue;
    GridCell at{static_cast<int>(i % grid.width), static_cast<int>(i / grid.width)};
    for (int k = 0; k < 8; ++k) {
      if (!can_step(grid, at, kDx[k], kDy[k])) continue;
      std::size_t j = grid.index(at.first + kDx[k], at.second + kDy[k]);
      double nc = c + (k < 4 ? 1.0 : kSqrt2);
      if (nc < d[j]) {
        d[j] = nc;
        open.emplace(nc, j);
      }
    }
  }
  return d;
}

double Planner::cost(GridCell from, GridCell to) {
  if (!grid_.in_bounds(from.first, from.second) || !grid_.in_bounds(to.first, to.second)) return kInf;
  auto it = to_target_.find(to);
  // Moves are symmetric, so distances from the target are costs to it.
  if (it == to_target_.end()) it = to_target_.emplace(to, dijkstra(grid_, to)).first;
  return it->second[grid_.index(from.first, from.second)];
}

// ------------------------------------------------------------- grammar

void TaskGrammar::validate() const {
  std::set<std::string> names(subgoals.begin(), subgoals.end());
  if (names.size() != subgoals.size()) throw IntentError("grammar repeats a subgoal");
  if (names.empty()) throw IntentError("grammar has no subgoals");
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [a, b] : before) {
    if (!names.count(a) || !names.count(b)) throw IntentError("constraint names an unknown subgoal");
    out[a].push_back(b);
  }
  // Depth-first search for a back edge.
  std::map<std::string, int> state;
  std::function<void(const std::string&)> visit = [&](const std::string& v) {
    state[v] = 1;
    for (const auto& w : out[v]) {
      if (state[w] == 1) throw IntentError("grammar constraints are cyclic");
      if (state[w] == 0) visit(w);
    }
    state[v] = 2;
  };
  for (const auto& v : subgoals)
    if (state[v] == 0) visit(v);
  for (const auto& [seq, w] : sequence_weights) {
    if (!(w >= 0.0)) throw IntentError("sequence weights must be non-negative");
    for (const auto& s : seq)
      if (!names.count(s)) throw IntentError("sequence weight names an unknown subgoal");
  }
}

json TaskGrammar::to_json() const {
  json weights = json::array();
  for (const auto& [seq, w] : sequence_weights) weights.push_back({{"sequence", seq}, {"weight", w}});
  json order = json::array();
  for (const auto& [a, b] : before) order.push_back({a, b});
  return {{"subgoals", subgoals}, {"before", order}, {"weights", weights}};
}

TaskGrammar TaskGrammar::from_json(const json& j) {
  TaskGrammar g;
  try {
    g.subgoals = j.at("subgoals").get<std::vector<std::string>>();
    for (const auto& p : j.value("before", json::array())) g.before.emplace_back(p.at(0), p.at(1));
    for (const auto& w : j.value("weights", json::array()))
      g.sequence_weights[w.at("sequence").get<std::vector<std::string>>()] = w.at("weight").get<double>();
  } catch (const json::exception& e) {
    throw IntentError(std::string("bad grammar: ") + e.what());
  }
  g.validate();
  return g;
}

TaskGrammar coffee_grammar() {
  return {{"mug", "coffee_maker", "milk", "sugar"}, {{"mug", "coffee_maker"}}, {}};
}

TaskGrammar unordered_grammar(const std::vector<std::string>& subgoals) { return {subgoals, {}, {}}; }

std::vector<std::vector<std::string>> consistent_sequences(const TaskGrammar& grammar,
                                                           const std::set<std::string>& completed,
                                                           std::size_t limit, std::uint64_t seed) {
  grammar.validate();
  std::vector<std::string> remaining;
  for (const auto& s : grammar.subgoals)
    if (!completed.count(s)) remaining.push_back(s);
  // Completing b before a contradicts a < b; no ordering of the rest helps.
  for (const auto& [a, b] : grammar.before)
    if (completed.count(b) && !completed.count(a)) return {};

  auto ready = [&](const std::string& s, const std::set<std::string>& done) {
    for (const auto& [a, b] : grammar.before)
      if (b == s && !done.count(a)) return false;
    return true;
  };

  std::vector<std::vector<std::string>> out;
  std::vector<std::string> seq;
  std::set<std::string> done = completed;
  bool overflow = false;
  std::function<void()> extend = [&] {
    if (overflow) return;
    if (seq.size() == remaining.size()) {
      if (out.size() == limit) {
        overflow = true;
        return;
      }
      out.push_back(seq);
      return;
    }
    for (const auto& s : remaining) {
      if (done.count(s) || !ready(s, done)) continue;
      seq.push_back(s);
      done.insert(s);
      extend();
      done.erase(s);
      seq.pop_back();
    }
  };
  extend();
  if (!overflow) return out;

  out.clear();
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < limit; ++k) {
    std::set<std::string> d = completed;
    std::vector<std::string> s;
    while (s.size() < remaining.size()) {
      std::vector<std::string> options;
      for (const auto& r : remaining)
        if (!d.count(r) && ready(r, d)) options.push_back(r);
      const auto& pick = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      s.push_back(pick);
      d.insert(pick);
    }
    out.push_back(std::move(s));
  }
  return out;
}

GoalPosterior grammar_prior(const TaskGrammar& grammar, const std::set<std::string>& completed,
                            const GoalSet& goals) {
  validate_goals(goals);
  std::vector<double> w(goals.size(), 0.0);
  for (const auto& seq : consistent_sequences(grammar, completed)) {
    if (seq.empty()) continue;
    auto wt = grammar.sequence_weights.find(seq);
    double weight = wt == grammar.sequence_weights.end() ? 1.0 : wt->second;
    for (std::size_t i = 0; i < goals.size(); ++i)
      if (goals[i].id == seq.front()) w[i] += weight;
  }
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) throw IntentError("no consistent parse");
  return normalized(goals, std::move(w));
}

double prefix_cost(const std::vector<GridCell>& prefix) {
  double c = 0.0;
  for (std::size_t i = 1; i < prefix.size(); ++i)
    c += std::hypot(prefix[i].first - prefix[i - 1].first, prefix[i].second - prefix[i - 1].second);
  return c;
}

GoalPosterior predict_grammar(const std::vector<GridCell>& prefix, const TaskGrammar& grammar,
                              const std::set<std::string>& completed, const GoalSet& goals, Planner& planner,
                              double lambda) {
  if (prefix.empty()) throw IntentError("prefix needs at least the start cell");
  if (lambda < 0.0) throw IntentError("lambda must be non-negative");
  for (const GridCell& c : prefix)
    if (!planner.grid().in_bounds(c.first, c.second)) throw IntentError("prefix leaves the grid");
  GoalPosterior prior = grammar_prior(grammar, completed, goals);
  const double travelled = prefix_cost(prefix);
  std::vector<double> w(goals.size(), 0.0);
  std::vector<double> detour(goals.size(), kInf);
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (prior.prob[i] == 0.0) continue;
    double ahead = planner.cost(prefix.back(), goals[i].cell);
    double direct = planner.cost(prefix.front(), goals[i].cell);
    if (ahead == kInf || direct == kInf) continue;
    detour[i] = travelled + ahead - direct;
  }
  double lo = *std::min_element(detour.begin(), detour.end());
  if (lo == kInf) throw IntentError("no consistent parse");
  for (std::size_t i = 0; i < goals.size(); ++i)
    if (detour[i] != kInf) w[i] = prior.prob[i] * std::exp(-lambda * (detour[i] - lo));
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) throw IntentError("no consistent parse");
  return normalized(goals, std::move(w));
}

// ------------------------------------------------------------- heat map

HeatGrid posterior_heatmap(const GoalPosterior& posterior, const GoalSet& goals, const OccupancyGrid& grid) {
  HeatGrid h;
  h.width = grid.width;
  h.height = grid.height;
  h.values.assign(static_cast<std::size_t>(grid.width) * grid.height, 0.0);
  const double sigma = grid.resolution;
  const double norm = grid.resolution * grid.resolution / (2.0 * kPi * sigma * sigma);
  for (const Goal& g : goals) {
    double m = posterior.of(g.id);
    if (m == 0.0) continue;
    for (int row = 0; row < grid.height; ++row)
      for (int col = 0; col < grid.width; ++col) {
        Vec2 c = grid.center(col, row);
        double d2 = (c.x - g.position.x) * (c.x - g.position.x) + (c.y - g.position.y) * (c.y - g.position.y);
        h.values[grid.index(col, row)] += m * norm * std::exp(-d2 / (2.0 * sigma * sigma));
      }
  }
  h.mass = std::accumulate(h.values.begin(), h.values.end(), 0.0);
  double peak = *std::max_element(h.values.begin(), h.values.end());
  if (peak > 0.0)
    for (double& v : h.values) v /= peak;
  return h;
}

// ------------------------------------------------------------- synthetic data

std::vector<GridCell> noisy_rational_path(Planner& planner, GridCell start, GridCell goal, double lambda,
                                          std::mt19937_64& rng, int max_steps) {
  if (planner.cost(start, goal) == kInf) throw IntentError("goal is unreachable from the start");
  std::vector<GridCell> path{start};
  GridCell at = start;
  for (int step = 0; step < max_steps && at != goal; ++step) {
    std::vector<GridCell> options;
    std::vector<double> q;
    for (int k = 0; k < 8; ++k) {
      if (!can_step(planner.grid(), at, kDx[k], kDy[k])) continue;
      GridCell nb{at.first + kDx[k], at.second + kDy[k]};
      options.push_back(nb);
      q.push_back((k < 4 ? 1.0 : kSqrt2) + planner.cost(nb, goal));
    }
    double lo = *std::min_element(q.begin(), q.end());
    std::vector<double> w;
    for (double v : q) w.push_back(std::exp(-lambda * (v - lo)));
    at = options[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)];
    path.push_back(at);
  }
  return path;
}

}  // namespace vrgym::intent

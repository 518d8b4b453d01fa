#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "vrgym/intent.hpp"

using namespace vrgym;
using namespace vrgym::intent;

namespace {

// Rows listed north to south like a map; '#' blocked.
OccupancyGrid grid_of(const std::vector<std::string>& rows) {
  OccupancyGrid g;
  g.height = static_cast<int>(rows.size());
  g.width = static_cast<int>(rows[0].size());
  g.cells.assign(static_cast<std::size_t>(g.width) * g.height, Cell::free);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      if (rows[g.height - 1 - r][c] == '#') g.cells[g.index(c, r)] = Cell::blocked;
  return g;
}

OccupancyGrid open_grid(int w, int h) { return grid_of(std::vector<std::string>(h, std::string(w, '.'))); }

Goal goal_at(const std::string& id, double x, double y) {
  return {id, {x, y}, {static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y))}};
}

}  // namespace

TEST_CASE("straight-line posterior") {
  SUBCASE("equidistant goals are uniform") {
    GoalSet g{goal_at("a", 1, 0), goal_at("b", 0, 1), goal_at("c", -1, 0), goal_at("d", 0, -1)};
    auto p = predict_straightline({0, 0}, g);
    for (double v : p.prob) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("large beta concentrates on the nearer goal") {
    GoalSet g{goal_at("near", 1, 0), goal_at("far", 2, 0)};
    auto p = predict_straightline({0, 0}, g, 100.0);
    CHECK(p.of("near") >= 0.99);
    CHECK(p.top() == "near");
  }
  SUBCASE("single goal") {
    auto p = predict_straightline({3, 4}, {goal_at("x", 0, 0)});
    CHECK(p.prob[0] == 1.0);
  }
  SUBCASE("rigid motion invariance") {
    GoalSet g{goal_at("a", 1, 2), goal_at("b", -3, 0.5), goal_at("c", 2, -2)};
    Vec2 pos{0.3, -0.7};
    auto p = predict_straightline(pos, g);
    const double th = 0.77, tx = 5.0, ty = -2.0;
    auto move = [&](Vec2 v) {
      return Vec2{std::cos(th) * v.x - std::sin(th) * v.y + tx, std::sin(th) * v.x + std::cos(th) * v.y + ty};
    };
    GoalSet moved = g;
    for (auto& x : moved) x.position = move(x.position);
    auto q = predict_straightline(move(pos), moved);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.prob[i] - q.prob[i]) <= 1e-9);
  }
  SUBCASE("a co-located duplicate splits its mass") {
    auto p = predict_straightline({0, 0}, {goal_at("a", 1, 0), goal_at("b", 0, 3)});
    auto q = predict_straightline({0, 0}, {goal_at("a", 1, 0), goal_at("a2", 1, 0), goal_at("b", 0, 3)});
    CHECK(q.of("a") == doctest::Approx(q.of("a2")));
    CHECK(q.of("a") + q.of("a2") > p.of("a"));
  }
  CHECK_THROWS_AS(predict_straightline({0, 0}, {}), IntentError);
  CHECK_THROWS_AS(predict_straightline({0, 0}, {goal_at("a", 1, 0), goal_at("a", 2, 0)}), IntentError);
}

TEST_CASE("perpendicular posterior") {
  CHECK(perpendicular_distance({0, 0}, {1, 0}, {2, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perpendicular_distance({0, 0}, {7, 0}, {2, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(perpendicular_distance({0, 0}, {0, 0}, {1, 1}), IntentError);

  GoalSet mirrored{goal_at("up", 3, 1), goal_at("down", 3, -1)};
  auto p = predict_perpendicular({0, 0}, {1, 0}, mirrored);
  CHECK(p.of("up") == doctest::Approx(p.of("down")).epsilon(1e-12));

  GoalSet g{goal_at("on_ray", 4, 0), goal_at("off", 2, 1.5), goal_at("behind", -2, 0)};
  auto a = predict_perpendicular({0, 0}, {1, 0}, g);
  auto b = predict_perpendicular({0, 0}, {0.01, 0}, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(a.prob[i] - b.prob[i]) <= 1e-12);
  CHECK(a.top() == "on_ray");
  // The goal behind lies on the line but pays the back penalty.
  CHECK(a.of("behind") < a.of("on_ray"));
}

TEST_CASE("a-star") {
  auto g = open_grid(5, 5);
  auto same = a_star(g, {2, 2}, {2, 2});
  CHECK(same.cost == 0.0);
  CHECK(same.path.size() == 1);
  auto corner = a_star(g, {0, 0}, {4, 4});
  CHECK(std::abs(corner.cost - 4.0 * std::sqrt(2.0)) <= 1e-9);
  CHECK(corner.path.front() == GridCell{0, 0});
  CHECK(corner.path.back() == GridCell{4, 4});

  auto walled = grid_of({"..#..", "..#..", "..#..", "..#..", "..#.."});
  CHECK(a_star(walled, {0, 0}, {4, 4}).cost == kInf);
  CHECK(a_star(walled, {0, 0}, {4, 4}).path.empty());
  CHECK(a_star(walled, {0, 0}, {2, 0}).cost == kInf);

  SUBCASE("no corner cutting") {
    auto d = grid_of({"..", "#."});  // (0,0) blocked
    CHECK_FALSE(can_step(d, {1, 0}, -1, 1));
    CHECK(can_step(d, {1, 0}, 0, 1));
    CHECK(a_star(d, {1, 0}, {0, 1}).cost == doctest::Approx(2.0));
  }

  SUBCASE("matches dijkstra on random grids") {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
      std::uniform_int_distribution<int> side(4, 14);
      OccupancyGrid r = open_grid(side(rng), side(rng));
      std::bernoulli_distribution wall(0.3);
      for (auto& c : r.cells) c = wall(rng) ? Cell::blocked : Cell::free;
      std::uniform_int_distribution<int> col(0, r.width - 1), row(0, r.height - 1);
      GridCell s{col(rng), row(rng)}, t{col(rng), row(rng)};
      r.cells[r.index(s.first, s.second)] = Cell::free;
      r.cells[r.index(t.first, t.second)] = Cell::free;
      auto a = a_star(r, s, t);
      double d = dijkstra(r, s)[r.index(t.first, t.second)];
      if (d == kInf) {
        CHECK(a.cost == kInf);
        continue;
      }
      ++checked;
      CHECK(std::abs(a.cost - d) <= 1e-9);
      double walked = 0.0;
      for (std::size_t i = 1; i < a.path.size(); ++i) {
        int dx = a.path[i].first - a.path[i - 1].first, dy = a.path[i].second - a.path[i - 1].second;
        REQUIRE(can_step(r, a.path[i - 1], dx, dy));
        walked += (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
      }
      CHECK(std::abs(walked - a.cost) <= 1e-9);
    }
    CHECK(checked > 100);
  }

  Planner planner(walled);
  CHECK(planner.cost({0, 0}, {1, 4}) == doctest::Approx(3.0 + std::sqrt(2.0)));
  CHECK(planner.cost({0, 0}, {4, 4}) == kInf);
}

TEST_CASE("task grammar") {
  auto coffee = coffee_grammar();
  CHECK_NOTHROW(coffee.validate());
  // 4 subgoals, mug before coffee_maker: 4!/2 orders.
  CHECK(consistent_sequences(coffee, {}).size() == 12);
  CHECK(consistent_sequences(coffee, {"coffee_maker"}).empty());
  auto after_mug = consistent_sequences(coffee, {"mug"});
  CHECK(after_mug.size() == 6);

  TaskGrammar cyclic{{"a", "b"}, {{"a", "b"}, {"b", "a"}}, {}};
  CHECK_THROWS_AS(cyclic.validate(), IntentError);
  CHECK_THROWS_AS((TaskGrammar{{"a"}, {{"a", "z"}}, {}}.validate()), IntentError);

  auto round = TaskGrammar::from_json(coffee.to_json());
  CHECK(round.subgoals == coffee.subgoals);
  CHECK(round.before == coffee.before);

  SUBCASE("sampling beyond the enumeration limit") {
    auto g = unordered_grammar({"a", "b", "c", "d", "e", "f", "g", "h"});  // 40320 orders
    auto s = consistent_sequences(g, {}, 10000, 3);
    CHECK(s.size() == 10000);
    CHECK(s == consistent_sequences(g, {}, 10000, 3));
  }
}

TEST_CASE("grammar predictor") {
  auto grid = open_grid(12, 12);
  GoalSet goals{goal_at("mug", 10.5, 10.5), goal_at("coffee_maker", 10.5, 1.5), goal_at("milk", 1.5, 10.5),
                goal_at("sugar", 6.5, 10.5)};
  Planner planner(grid);
  auto coffee = coffee_grammar();

  SUBCASE("empty prefix returns the prior") {
    auto prior = grammar_prior(coffee, {}, goals);
    auto p = predict_grammar({{1, 1}}, coffee, {}, goals, planner);
    for (std::size_t i = 0; i < goals.size(); ++i) CHECK(p.prob[i] == doctest::Approx(prior.prob[i]).epsilon(1e-12));
    CHECK(prior.of("coffee_maker") == 0.0);
    // 6 of 12 orders start with mug, 3 each with milk and sugar.
    CHECK(prior.of("mug") == doctest::Approx(0.5));
  }
  SUBCASE("mug probability rises along the straight path") {
    double last = 0.0;
    std::vector<GridCell> prefix{{1, 1}};
    for (int k = 2; k <= 10; ++k) {
      prefix.emplace_back(k, k);
      double p = predict_grammar(prefix, coffee, {}, goals, planner).of("mug");
      CHECK(p >= last - 1e-12);
      last = p;
    }
    CHECK(last > 0.9);
  }
  SUBCASE("completed subgoals") {
    auto p = predict_grammar({{5, 5}}, coffee, {"mug"}, goals, planner);
    CHECK(p.of("mug") == 0.0);
    CHECK(p.of("coffee_maker") > 0.0);
  }
  SUBCASE("no consistent parse") {
    CHECK_THROWS_WITH_AS(predict_grammar({{5, 5}}, coffee, {"coffee_maker"}, goals, planner), "no consistent parse",
                         IntentError);
    TaskGrammar zero = coffee;
    for (const auto& s : consistent_sequences(coffee, {})) zero.sequence_weights[s] = 0.0;
    CHECK_THROWS_WITH_AS(grammar_prior(zero, {}, goals), "no consistent parse", IntentError);
  }
  SUBCASE("unreachable goals get no mass") {
    auto walled = grid_of({"......#.....", "......#.....", "......#.....", "......#.....", "......#.....",
                           "......#.....", "......#.....", "......#.....", "......#.....", "......#.....",
                           "......#.....", "......#....."});
    Planner pw(walled);
    auto p = predict_grammar({{1, 1}}, unordered_grammar({"mug", "coffee_maker", "milk", "sugar"}), {}, goals, pw);
    CHECK(p.of("mug") == 0.0);
    CHECK(p.of("coffee_maker") == 0.0);
    CHECK(p.of("milk") == doctest::Approx(1.0));
  }
}

TEST_CASE("noisy-rational walks reach the goal") {
  auto grid = open_grid(10, 10);
  Planner planner(grid);
  std::mt19937_64 rng(4);
  auto path = noisy_rational_path(planner, {0, 0}, {9, 7}, 1.0, rng);
  CHECK(path.front() == GridCell{0, 0});
  CHECK(path.back() == GridCell{9, 7});
  std::mt19937_64 again(4);
  CHECK(path == noisy_rational_path(planner, {0, 0}, {9, 7}, 1.0, again));
}

TEST_CASE("posterior heat map") {
  auto grid = open_grid(20, 20);
  SUBCASE("single goal peaks at its cell") {
    GoalSet g{goal_at("a", 10.5, 10.5)};
    auto h = posterior_heatmap(predict_straightline({0, 0}, g), g, grid);
    CHECK(h.at(10, 10) == 1.0);
    for (double v : h.values) CHECK(v <= 1.0);
    CHECK(std::abs(h.mass - 1.0) <= 1e-3);
  }
  SUBCASE("equal posteriors give equal peaks") {
    GoalSet g{goal_at("a", 5.5, 5.5), goal_at("b", 14.5, 14.5)};
    auto h = posterior_heatmap(predict_straightline({10, 10}, g), g, grid);
    CHECK(h.at(5, 5) == doctest::Approx(h.at(14, 14)).epsilon(1e-12));
    CHECK(h.at(5, 5) == doctest::Approx(1.0));
    CHECK(std::abs(h.mass - 1.0) <= 1e-3);
  }
}

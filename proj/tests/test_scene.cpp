#include <doctest.h>

#include <cmath>
#include <random>

#include "vrgym/scene.hpp"

using namespace vrgym;

namespace {

// Closed 10 x 10 m room centred on the origin with 1 m thick walls.
std::string square_room(double ax = 0.0, double ay = 0.0, double yaw = 0.0) {
  nlohmann::json doc = {
      {"entities",
       {{{"id", "wall_e"}, {"kind", "wall"}, {"pose", {{"x", 5.5}, {"y", 0.0}}}, {"half_extents", {0.5, 6.0}}},
        {{"id", "wall_w"}, {"kind", "wall"}, {"pose", {{"x", -5.5}, {"y", 0.0}}}, {"half_extents", {0.5, 6.0}}},
        {{"id", "wall_n"}, {"kind", "wall"}, {"pose", {{"x", 0.0}, {"y", 5.5}}}, {"half_extents", {5.0, 0.5}}},
        {{"id", "wall_s"}, {"kind", "wall"}, {"pose", {{"x", 0.0}, {"y", -5.5}}}, {"half_extents", {5.0, 0.5}}},
        {{"id", "agent"},
         {"kind", "agent"},
         {"pose", {{"x", ax}, {"y", ay}, {"yaw", yaw}}},
         {"half_extents", {0.25, 0.25}}}}}};
  return doc.dump();
}

std::string kitchen() {
  return R"({
    "entities": [
      {"id": "agent", "kind": "agent", "pose": {"x": 0, "y": 0}, "half_extents": [0.25, 0.25]},
      {"id": "door", "kind": "door", "pose": {"x": 1.0, "y": 0}, "half_extents": [0.1, 0.5]},
      {"id": "mug", "kind": "object", "pose": {"x": 0, "y": 0.8}, "half_extents": [0.05, 0.05],
       "transitions": [{"verb": "pour", "pre": {"held.contents": "milk"}, "post": {"filled_milk": true}}]},
      {"id": "milk", "kind": "object", "pose": {"x": -0.6, "y": 0}, "half_extents": [0.05, 0.1],
       "fluents": {"contents": "milk"}},
      {"id": "coffee_maker", "kind": "object", "pose": {"x": 0, "y": -5}, "half_extents": [0.2, 0.2],
       "fluents": {"on": false}}
    ]})";
}

}  // namespace

TEST_CASE("normalize_yaw wraps into [-pi, pi)") {
  CHECK(normalize_yaw(0.0) == 0.0);
  CHECK(normalize_yaw(kPi) == doctest::Approx(-kPi));
  CHECK(normalize_yaw(-kPi) == -kPi);
  CHECK(normalize_yaw(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-100, 100);
  for (int i = 0; i < 1000; ++i) {
    double y = normalize_yaw(d(rng));
    CHECK(y >= -kPi);
    CHECK(y < kPi);
  }
}

TEST_CASE("load_scene: empty document") {
  SceneGraph s = load_scene(R"({"entities":[]})");
  CHECK(s.entities.empty());
  CHECK(s.tick == 0);
}

TEST_CASE("load_scene: 3x3 ascii map has eight unit walls") {
  SceneGraph s = load_scene(R"({"cell_size": 1, "ascii": ["###", "#.#", "###"]})");
  int walls = 0;
  for (const auto& [id, e] : s.entities) {
    if (e.kind != EntityKind::wall) continue;
    ++walls;
    CHECK(e.half_extents.x == 0.5);
    CHECK(e.half_extents.y == 0.5);
  }
  CHECK(walls == 8);
}

TEST_CASE("load_scene: rejects overlapping walls") {
  auto doc = R"({"entities":[
    {"id":"a","kind":"wall","pose":{"x":0,"y":0},"half_extents":[1,1]},
    {"id":"b","kind":"wall","pose":{"x":1,"y":0},"half_extents":[1,1]}]})";
  CHECK_THROWS_WITH_AS(load_scene(doc), doctest::Contains("static overlap"), SceneError);
}

TEST_CASE("load_scene: errors name the offending line or field") {
  CHECK_THROWS_WITH_AS(load_scene("{\n \"entities\": [\n  {oops}\n]}"), doctest::Contains("line 3"), SceneError);
  CHECK_THROWS_WITH_AS(load_scene(R"({"entities":[{"id":"a","kind":"wall","half_extents":[1,"x"]}]})"),
                       doctest::Contains("$.entities[0].half_extents[1]"), SceneError);
  CHECK_THROWS_WITH_AS(load_scene(R"({"entities":[{"id":"a","kind":"wall","half_extents":[1,0]}]})"),
                       doctest::Contains("positive"), SceneError);
  CHECK_THROWS_AS(load_scene(R"({"entities":[{"id":"a","kind":"lamp","half_extents":[1,1]}]})"), SceneError);
}

TEST_CASE("ascii map places doors, agents, goals and objects") {
  SceneGraph s = load_scene(R"({"cell_size": 2, "ascii": ["#####", "#A.G#", "#.D.#", "#m.m#", "#####"]})");
  CHECK(s.at("agent").pose == Pose{3.0, 7.0, 0.0});
  CHECK(s.at("goal").pose.x == 7.0);
  CHECK(s.at("m").kind == EntityKind::object);
  CHECK(s.find("m_2") != nullptr);
  const Entity& door = s.at("door_002_002");
  CHECK(door.is_closed_door());
  CHECK(std::get<ScalarFluent>(door.fluents.at("angle")).value == 0.0);
}

TEST_CASE("step: free-space kinematics") {
  SceneGraph s = load_scene(R"({"entities":[{"id":"a","kind":"agent","pose":{"x":0,"y":0},"half_extents":[0.25,0.25]}]})");
  auto out = step(s, {{"a", 1.0, 0.0}});
  CHECK(out.scene.at("a").pose.x == 1.0 / 60.0);
  CHECK(out.scene.at("a").pose.y == 0.0);
  CHECK(out.events.empty());
  CHECK(out.scene.tick == 1);
}

TEST_CASE("step: no commands only advances the tick") {
  SceneGraph s = load_scene(kitchen());
  auto out = step(s, {});
  CHECK(out.scene.tick == 1);
  out.scene.tick = 0;
  CHECK(to_json(out.scene) == to_json(s));
}

TEST_CASE("step: sweep stops at the wall face and reports a collision") {
  // Wall face at x = 1.0. Agent half extent 0.25.
  auto doc = [](double ax) {
    return nlohmann::json{{"entities",
                           {{{"id", "w"}, {"kind", "wall"}, {"pose", {{"x", 1.5}, {"y", 0}}}, {"half_extents", {0.5, 1.0}}},
                            {{"id", "a"}, {"kind", "agent"}, {"pose", {{"x", ax}, {"y", 0}}}, {"half_extents", {0.25, 0.25}}}}}}
        .dump();
  };
  SUBCASE("0.4 m gap: speed clamps to v_max, no contact in one tick") {
    auto out = step(load_scene(doc(1.0 - 0.25 - 0.4)), {{"a", 60.0, 0.0}});
    CHECK(out.scene.at("a").pose.x == doctest::Approx(0.35 + 2.0 / 60.0).epsilon(1e-12));
    CHECK(out.events.empty());
  }
  SUBCASE("0.02 m gap: contact within the tick") {
    auto out = step(load_scene(doc(1.0 - 0.25 - 0.02)), {{"a", 60.0, 0.0}});
    CHECK(out.scene.at("a").pose.x == 0.75);
    REQUIRE(out.events.size() == 1);
    auto* c = std::get_if<CollisionEvent>(&out.events[0]);
    REQUIRE(c);
    CHECK(c->obstacle_id == "w");
    CHECK(c->tick == 1);
    // Pushing into the wall keeps reporting contact without penetrating.
    auto again = step(out.scene, {{"a", 2.0, 0.0}});
    CHECK(again.scene.at("a").pose.x == 0.75);
    CHECK(again.events.size() == 1);
  }
}

TEST_CASE("step: errors") {
  SceneGraph s = load_scene(kitchen());
  CHECK_THROWS_AS(step(s, {{"ghost", 1.0, 0.0}}), SceneError);
  CHECK_THROWS_AS(step(s, {{"agent", 1.0, 0.0}, {"agent", 0.5, 0.0}}), SceneError);
  CHECK_NOTHROW(step(s, {{"agent", 1.0, 0.0}, {"agent", 1.0, 0.0}}));
}

TEST_CASE("step: random driving never penetrates walls and time is tick/60") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(-3, 3), w(-4, 4);
  SceneGraph s = load_scene(R"({"ascii": ["#######", "#A....#", "#.##..#", "#....A#", "#######"]})");
  auto agents = s.agent_ids();
  REQUIRE(agents.size() == 2);
  for (int t = 0; t < 3000; ++t) {
    std::vector<VelocityCommand> cmds;
    for (const auto& a : agents) cmds.push_back({a, v(rng), w(rng)});
    s = step(s, cmds).scene;
    CHECK(s.time() == static_cast<double>(t + 1) / 60.0);
    for (const auto& a : agents) {
      Box ab = s.at(a).box();
      for (const auto& [id, e] : s.entities) {
        if (id == a || !e.blocks_motion()) continue;
        Box b = e.box();
        double sep = std::max({b.min_x - ab.max_x, ab.min_x - b.max_x, b.min_y - ab.max_y, ab.min_y - b.max_y});
        REQUIRE(sep >= -1e-9);
      }
    }
  }
}

TEST_CASE("step: identical inputs give identical outputs") {
  auto run = [] {
    SceneGraph s = load_scene(kitchen());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> v(-2, 2);
    std::string log;
    for (int t = 0; t < 500; ++t) {
      auto out = step(s, {{"agent", v(rng), v(rng)}});
      for (const auto& e : out.events) log += to_json(e).dump();
      s = std::move(out.scene);
    }
    return log + to_json(s).dump();
  };
  CHECK(run() == run());
}

TEST_CASE("interact: doors") {
  SceneGraph s = load_scene(kitchen());
  auto out = interact(s, {"agent", Verb::twist_door, "door"});
  CHECK(out.event.outcome == Outcome::ok);
  const Entity& door = out.scene.at("door");
  CHECK(std::get<bool>(door.fluents.at("open")));
  CHECK(std::get<ScalarFluent>(door.fluents.at("angle")).value == doctest::Approx(kPi / 2));
  // The open door no longer blocks motion.
  CHECK_FALSE(door.blocks_motion());
  auto again = interact(out.scene, {"agent", Verb::push_door, "door"});
  CHECK(again.event.outcome == Outcome::blocked);
}

TEST_CASE("interact: pour from a held milk carton fills the mug") {
  SceneGraph s = load_scene(kitchen());
  s = interact(s, {"agent", Verb::grasp, "milk"}).scene;
  auto out = interact(s, {"agent", Verb::pour, "mug"});
  CHECK(out.event.outcome == Outcome::ok);
  CHECK(std::get<bool>(out.scene.at("mug").fluents.at("filled_milk")));
  // Pouring with empty hands fails the precondition.
  auto empty = interact(load_scene(kitchen()), {"agent", Verb::pour, "mug"});
  CHECK(empty.event.outcome == Outcome::blocked);
}

TEST_CASE("interact: out of range and error paths") {
  SceneGraph s = load_scene(kitchen());
  auto out = interact(s, {"agent", Verb::press_button, "coffee_maker"});
  CHECK(out.event.outcome == Outcome::out_of_range);
  CHECK_FALSE(std::get<bool>(out.scene.at("coffee_maker").fluents.at("on")));
  CHECK_THROWS_AS(interact(s, {"agent", Verb::press_button, "nothing"}), SceneError);
  CHECK_THROWS_AS(interact(s, {"agent", Verb::twist_door, "mug"}), SceneError);
  CHECK_THROWS_AS(interact(s, {"agent", Verb::grasp, std::nullopt}), SceneError);
  CHECK(interact(s, {"agent", Verb::wave, std::nullopt}).event.outcome == Outcome::ok);
}

TEST_CASE("interact: press_button toggles") {
  SceneGraph s = load_scene(kitchen());
  s.at("agent").pose = {0, -4.2, 0};
  s = interact(s, {"agent", Verb::press_button, "coffee_maker"}).scene;
  CHECK(std::get<bool>(s.at("coffee_maker").fluents.at("on")));
  s = interact(s, {"agent", Verb::press_button, "coffee_maker"}).scene;
  CHECK_FALSE(std::get<bool>(s.at("coffee_maker").fluents.at("on")));
}

TEST_CASE("grasp_attach: rigid attachment and release") {
  SceneGraph s = load_scene(kitchen());
  s.entities.erase("door");
  s = grasp_attach(s, "agent", "mug");
  CHECK_THROWS_WITH_AS(grasp_attach(s, "agent", "milk"), "hands full", SceneError);
  const Pose start_offset = *s.at("mug").attach_offset;

  // Drive 1 m forward: 30 ticks at 2 m/s.
  for (int t = 0; t < 30; ++t) s = step(s, {{"agent", 2.0, 0.0}}).scene;
  CHECK(s.at("agent").pose.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.at("mug").pose.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.at("mug").pose.y == doctest::Approx(0.8).epsilon(1e-12));

  // Turn while driving; the offset in the agent frame stays fixed.
  for (int t = 0; t < 90; ++t) {
    s = step(s, {{"agent", 1.0, 1.0}}).scene;
    const Pose& a = s.at("agent").pose;
    const Pose& m = s.at("mug").pose;
    double c = std::cos(-a.yaw), sn = std::sin(-a.yaw);
    double lx = c * (m.x - a.x) - sn * (m.y - a.y);
    double ly = sn * (m.x - a.x) + c * (m.y - a.y);
    REQUIRE(std::abs(lx - start_offset.x) <= 1e-9);
    REQUIRE(std::abs(ly - start_offset.y) <= 1e-9);
  }

  // Hand-composed endpoint: offset (0, 0.8) rotated by the final yaw.
  const Pose a = s.at("agent").pose;
  s = release(s, "agent");
  CHECK_FALSE(s.at("mug").attached_to.has_value());
  CHECK(s.at("mug").pose.x == doctest::Approx(a.x - 0.8 * std::sin(a.yaw)).epsilon(1e-12));
  CHECK(s.at("mug").pose.y == doctest::Approx(a.y + 0.8 * std::cos(a.yaw)).epsilon(1e-12));
  // Released objects stay put.
  Pose dropped = s.at("mug").pose;
  s = step(s, {{"agent", 2.0, 0.0}}).scene;
  CHECK(s.at("mug").pose == dropped);
}

TEST_CASE("grasp_attach: object held by another agent") {
  auto doc = R"({"entities":[
    {"id":"a","kind":"agent","pose":{"x":0,"y":0},"half_extents":[0.25,0.25]},
    {"id":"b","kind":"agent","pose":{"x":1,"y":0},"half_extents":[0.25,0.25]},
    {"id":"cup","kind":"object","pose":{"x":0.5,"y":0.5},"half_extents":[0.05,0.05]}]})";
  SceneGraph s = grasp_attach(load_scene(doc), "a", "cup");
  CHECK_THROWS_WITH_AS(grasp_attach(s, "b", "cup"), doctest::Contains("already attached"), SceneError);
  CHECK(interact(s, {"b", Verb::grasp, "cup"}).event.outcome == Outcome::blocked);
}

TEST_CASE("grasp contact patch faces the approaching agent") {
  SceneGraph s = load_scene(kitchen());
  auto out = interact(s, {"agent", Verb::grasp, "mug", 0.9});
  REQUIRE(out.event.contact);
  CHECK(out.event.contact->face == 3);  // agent is south of the mug
  CHECK(out.event.contact->u == 4);
  CHECK(out.event.contact->v == 7);
}

TEST_CASE("render_first_person: analytic box intersection") {
  SceneGraph s = load_scene(square_room());
  DepthScan one = render_first_person(s, "agent", 1, 0.0);
  CHECK(one.depth[0] == doctest::Approx(5.0 - 0.25).epsilon(1e-12));
  CHECK(one.label[0] == std::optional<std::string>("wall_e"));
  CHECK(one.normal[0] == Vec2{-1.0, 0.0});

  DepthScan three = render_first_person(s, "agent", 3, kPi / 2);
  CHECK(three.depth[0] == doctest::Approx(three.depth[2]).epsilon(1e-12));
  // 45 degree ray from the centre: distance 5*sqrt(2) minus own-box exit 0.25*sqrt(2).
  CHECK(three.depth[0] == doctest::Approx(4.75 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("render_first_person: matches closed form in rectangular rooms") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-4.5, 4.5), ang(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    double px = pos(rng), py = pos(rng), yaw = ang(rng);
    SceneGraph s = load_scene(square_room(px, py, yaw));
    const int n = 17;
    const double fov = 2 * kPi;
    DepthScan scan = render_first_person(s, "agent", n, fov);
    for (int i = 0; i < n; ++i) {
      double th = normalize_yaw(yaw) - fov / 2 + i * fov / (n - 1);
      double c = std::cos(th), sn = std::sin(th);
      double tx = c > 0 ? (5 - px) / c : c < 0 ? (-5 - px) / c : INFINITY;
      double ty = sn > 0 ? (5 - py) / sn : sn < 0 ? (-5 - py) / sn : INFINITY;
      double ex = c != 0 ? 0.25 / std::abs(c) : INFINITY;
      double ey = sn != 0 ? 0.25 / std::abs(sn) : INFINITY;
      double expected = std::min(tx, ty) - std::min(ex, ey);
      REQUIRE(std::abs(scan.depth[i] - expected) <= 1e-6);
      REQUIRE(std::hypot(scan.normal[i].x, scan.normal[i].y) == 1.0);
    }
  }
}

TEST_CASE("render_first_person: empty scene and argument errors") {
  SceneGraph s = load_scene(R"({"entities":[{"id":"a","kind":"agent","pose":{"x":0,"y":0},"half_extents":[0.25,0.25]}]})");
  DepthScan scan = render_first_person(s, "a", 8, kPi);
  for (int i = 0; i < 8; ++i) {
    CHECK(std::isinf(scan.depth[i]));
    CHECK_FALSE(scan.label[i].has_value());
  }
  CHECK_THROWS_AS(render_first_person(s, "zz", 8, kPi), SceneError);
  CHECK_THROWS_AS(render_first_person(s, "a", 0, kPi), SceneError);
  CHECK_THROWS_AS(render_first_person(s, "a", 4, 7.0), SceneError);
}

TEST_CASE("occupancy_grid") {
  SUBCASE("empty scene is all free") {
    CHECK(occupancy_grid(load_scene(R"({"entities":[]})"), 0.5).count_free() ==
          occupancy_grid(load_scene(R"({"entities":[]})"), 0.5).cells.size());
    OccupancyGrid g = occupancy_grid(load_scene(R"({"entities":[]})"), 1.0, Box{0, 0, 4, 4});
    CHECK(g.cells.size() == 16);
    CHECK(g.count_free() == 16);
  }
  SUBCASE("3x3 map: eight blocked, one free") {
    OccupancyGrid g = occupancy_grid(load_scene(R"({"ascii": ["###", "#.#", "###"]})"), 1.0);
    CHECK(g.width == 3);
    CHECK(g.height == 3);
    CHECK(g.count_free() == 1);
    CHECK_FALSE(g.blocked(1, 1));
  }
  SUBCASE("opening a door frees exactly its cells") {
    SceneGraph s = load_scene(R"({"ascii": ["#####", "#.D.#", "#####"]})");
    OccupancyGrid closed = occupancy_grid(s, 0.5);
    s.at("door_001_002").fluents["open"] = true;
    OccupancyGrid open = occupancy_grid(s, 0.5);
    int differing = 0;
    for (std::size_t i = 0; i < closed.cells.size(); ++i) {
      if (closed.cells[i] == open.cells[i]) continue;
      ++differing;
      int col = static_cast<int>(i % closed.width), row = static_cast<int>(i / closed.width);
      Vec2 c = closed.center(col, row);
      CHECK(s.at("door_001_002").box().contains(c.x, c.y));
    }
    CHECK(differing == 4);
  }
  CHECK_THROWS_AS(occupancy_grid(load_scene(R"({"entities":[]})"), 0.0), SceneError);
}

TEST_CASE("scene snapshot round-trips exactly") {
  SceneGraph s = load_scene(kitchen());
  s = grasp_attach(s, "agent", "mug");
  for (int t = 0; t < 37; ++t) s = step(s, {{"agent", 0.7, 0.3}}).scene;
  nlohmann::json j = to_json(s);
  SceneGraph back = scene_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back).dump() == j.dump());
  auto a = step(s, {{"agent", 1.3, -0.4}}).scene;
  auto b = step(back, {{"agent", 1.3, -0.4}}).scene;
  CHECK(to_json(a).dump() == to_json(b).dump());
}

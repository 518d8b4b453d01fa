#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "vrgym/datalog.hpp"

using namespace vrgym;
using namespace vrgym::datalog;

namespace {

const char* kRoom = R"({"cell_size": 1, "ascii": ["#######", "#A....#", "#..m..#", "#....A#", "#######"]})";

std::vector<ScriptStep> random_script(std::uint64_t seed, int steps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> v(-2.5, 2.5), w(-4.0, 4.0);
  std::uniform_int_distribution<int> coin(0, 9);
  std::vector<ScriptStep> script(steps);
  for (auto& s : script) {
    if (coin(rng) < 7) s.commands.push_back({"agent", v(rng), w(rng)});
    if (coin(rng) < 3) s.commands.push_back({"agent_2", v(rng), w(rng)});
    if (coin(rng) == 0) s.actions.push_back({"agent", Verb::grasp, "m"});
    if (coin(rng) == 0) s.actions.push_back({"agent", Verb::release, "m"});
    if (coin(rng) == 0) s.actions.push_back({"agent_2", Verb::wave, std::nullopt});
  }
  return script;
}

std::size_t count_rows(const std::string& csv) {
  return static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("record appends and rejects tick regression") {
  SessionLog log;
  log.record(OdometrySample{0, "a", {0, 0, 0}});
  CHECK(log.size() == 1);
  log.record(OdometrySample{0, "b", {1, 0, 0}});
  log.record(OdometrySample{3, "a", {1, 0, 0}});
  CHECK_THROWS_AS(log.record(OdometrySample{2, "a", {0, 0, 0}}), LogError);
  CHECK(log.size() == 3);
}

TEST_CASE("footprint export") {
  SessionLog log;
  CHECK(footprint_export(log, "a") == "tick,x,y,yaw\n");
  log.record(OdometrySample{0, "a", {0, 0, 0}});
  log.record(OdometrySample{0, "b", {5, 5, 0}});
  log.record(OdometrySample{1, "a", {0.5, 0, 0.25}});
  log.record(OdometrySample{2, "a", {1, 0, -1}});
  CHECK(footprint_export(log, "a") == "tick,x,y,yaw\n0,0,0,0\n1,0.5,0,0.25\n2,1,0,-1\n");
  CHECK(footprint_export(log, "b") == "tick,x,y,yaw\n0,5,5,0\n");
}

TEST_CASE("straight-line run gives a monotone x column") {
  std::vector<ScriptStep> script(90, ScriptStep{{{"agent", 1.0, 0.0}}, {}});
  SessionLog log = simulate_and_record(kRoom, script);
  std::istringstream csv(footprint_export(log, "agent"));
  std::string line;
  std::getline(csv, line);
  double prev = -1e9;
  int rows = 0;
  while (std::getline(csv, line)) {
    double x = std::stod(line.substr(line.find(',') + 1));
    CHECK(x >= prev);
    prev = x;
    ++rows;
  }
  CHECK(rows == 91);  // initial sample plus one per moving tick
}

TEST_CASE("odometry sampler: every moving tick, every sixth tick when idle") {
  SceneGraph s = load_scene(kRoom);
  OdometrySampler sampler;
  CHECK(sampler.sample(s).size() == 2);
  std::vector<std::int64_t> idle_ticks;
  for (int i = 0; i < 13; ++i) {
    advance(s, {{"agent", 1.0, 0.0}});
    for (const auto& o : sampler.sample(s)) {
      if (o.agent_id == "agent") CHECK(o.tick == s.tick);
      if (o.agent_id == "agent_2") idle_ticks.push_back(o.tick);
    }
  }
  CHECK(idle_ticks == std::vector<std::int64_t>{6, 12});
}

TEST_CASE("jsonl round trip and file sink") {
  auto script = random_script(3, 200);
  SessionLog log = simulate_and_record(kRoom, script, {"s1", "subj", ""});
  std::string text = log.to_jsonl();
  SessionLog back = SessionLog::from_jsonl(text);
  CHECK(back.info().session_id == "s1");
  CHECK(back.info().scene_hash == scene_hash(kRoom));
  REQUIRE(back.size() == log.size());
  CHECK(back.records() == log.records());
  CHECK(back.to_jsonl() == text);

  auto path = std::filesystem::temp_directory_path() / "vrgym_test_session.jsonl";
  {
    SessionLog live({"s2", "subj", "h"}, path);
    live.record(OdometrySample{1, "a", {0.1, 0.2, 0.3}});
    // Flushed per record: readable while the writer is still open.
    SessionLog seen = SessionLog::load(path);
    CHECK(seen.size() == 1);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(SessionLog::from_jsonl("{\"t\":1,\"kind\":\"bogus\",\"agent\":\"a\"}\n"), LogError);
}

TEST_CASE("replay of a fresh recording has zero divergence") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SessionLog log = simulate_and_record(kRoom, random_script(seed, 300));
    auto r = replay(SessionLog::from_jsonl(log.to_jsonl()), kRoom);
    CHECK(r.divergences.empty());
    CHECK(r.final_scene.tick == 300);
  }
}

TEST_CASE("tampered odometry is reported at its tick") {
  SessionLog log = simulate_and_record(kRoom, random_script(9, 120));
  std::string text = log.to_jsonl();
  nlohmann::json tampered;
  std::int64_t tick = -1;
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (tick < 0 && j["kind"] == "odom" && j["t"].get<std::int64_t>() > 50) {
      j["x"] = j["x"].get<double>() + 1e-12;
      tick = j["t"];
    }
    out += j.dump() + "\n";
  }
  auto r = replay(SessionLog::from_jsonl(out), kRoom);
  REQUIRE(r.divergences.size() == 1);
  CHECK(r.divergences[0].tick == tick);
}

TEST_CASE("replay edge cases") {
  SessionLog empty({"e", "s", scene_hash(kRoom)});
  auto r = replay(empty, kRoom);
  CHECK(r.divergences.empty());
  CHECK(r.final_scene.tick == 0);
  CHECK_THROWS_AS(replay(empty, R"({"entities": []})"), LogError);
}

TEST_CASE("grasp contacts are logged and accumulate into heat maps") {
  const char* doc = R"({"cell_size": 1, "ascii": ["#####", "#Am.#", "#####"]})";
  std::vector<ScriptStep> script;
  for (int i = 0; i < 5; ++i) {
    script.push_back({{}, {{"agent", Verb::grasp, "m"}}});
    script.push_back({{}, {{"agent", Verb::release, "m"}}});
  }
  SessionLog log = simulate_and_record(doc, script);
  auto contacts = contacts_for(log, "m");
  REQUIRE(contacts.size() == 5);
  HeatMap h = heatmap_accumulate(contacts, "m");
  CHECK(h.total() == 5);
  CHECK(h.counts[h.index(contacts[0].patch)] == 5);
}

TEST_CASE("heatmap_accumulate") {
  HeatMap none = heatmap_accumulate({}, "mug");
  CHECK(none.counts.size() == 256);
  CHECK(none.total() == 0);

  std::vector<GraspContactEvent> ev(7, GraspContactEvent{0, "a", "mug", {2, 3, 4}});
  HeatMap h = heatmap_accumulate(ev, "mug");
  CHECK(h.counts[h.index({2, 3, 4})] == 7);
  CHECK(h.total() == 7);

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> f(0, 3), g(0, 7);
  std::vector<GraspContactEvent> many;
  for (int i = 0; i < 1000; ++i) many.push_back({i, "a", "mug", {f(rng), g(rng), g(rng)}});
  CHECK(heatmap_accumulate(many, "mug").total() == 1000);

  CHECK_THROWS_AS(heatmap_accumulate({{0, "a", "mug", {4, 0, 0}}}, "mug"), LogError);
  CHECK_THROWS_AS(heatmap_accumulate({{0, "a", "mug", {0, 8, 0}}}, "mug"), LogError);
  CHECK_THROWS_AS(heatmap_accumulate({{0, "a", "cup", {0, 0, 0}}}, "mug"), LogError);
}

TEST_CASE("heatmap_average") {
  HeatMap p = heatmap_accumulate(std::vector<GraspContactEvent>(2, {0, "a", "mug", {0, 1, 1}}), "mug");
  HeatMap q = heatmap_accumulate(std::vector<GraspContactEvent>(4, {0, "a", "mug", {3, 7, 0}}), "mug");
  HeatMap avg = heatmap_average({p, q});
  CHECK((*avg.normalized)[p.index({0, 1, 1})] == 0.5);
  CHECK((*avg.normalized)[p.index({3, 7, 0})] == 0.5);
  double sum = 0;
  for (double v : *avg.normalized) sum += v;
  CHECK(sum == 1.0);
  CHECK(avg.total() == 6);

  std::vector<GraspContactEvent> mixed = {{0, "a", "mug", {1, 1, 1}}, {0, "a", "mug", {1, 1, 1}},
                                          {0, "a", "mug", {1, 2, 1}}};
  HeatMap m = heatmap_accumulate(mixed, "mug");
  CHECK(*heatmap_average({m}).normalized == m.normalize());
  CHECK(*heatmap_average({m, m, m}).normalized == m.normalize());

  CHECK_THROWS_AS(heatmap_average({}), LogError);
  HeatMap small = heatmap_accumulate({}, "mug", {4, 4, 4});
  CHECK_THROWS_AS(heatmap_average({m, small}), LogError);
}

TEST_CASE("heat map json") {
  HeatMap m = heatmap_accumulate({{0, "a", "mug", {1, 1, 1}}}, "mug");
  auto j = to_json(m);
  CHECK(j["dims"] == nlohmann::json::array({4, 8, 8}));
  CHECK(j["object"] == "mug");
  HeatMap back = heatmap_from_json(j);
  CHECK(back.counts == m.counts);
}

TEST_CASE("export row count equals the agent's sample count") {
  SessionLog log = simulate_and_record(kRoom, random_script(12, 400));
  for (const char* agent : {"agent", "agent_2"}) {
    std::size_t n = 0;
    for (const auto& r : log.records())
      if (auto* s = std::get_if<OdometrySample>(&r); s && s->agent_id == agent) ++n;
    CHECK(count_rows(footprint_export(log, agent)) == n);
  }
}

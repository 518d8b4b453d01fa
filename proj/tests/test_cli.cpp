#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "vrgym/datalog.hpp"
#include "vrgym/envs.hpp"
#include "vrgym/irl.hpp"
#include "vrgym/mdp.hpp"

namespace fs = std::filesystem;
using namespace vrgym;

namespace {

const fs::path kData = VRGYM_DATA_DIR;

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("vrgym_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + "'" VRGYM_CLI "' " + args + " >>'" +
                    (scratch() / "cli.log").string() + "' 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// A short scripted kitchen session with one grasp, saved as JSONL.
fs::path kitchen_session(const std::string& id) {
  std::vector<datalog::ScriptStep> script;
  for (int i = 0; i < 90; ++i) script.push_back({{{"agent", 1.0, i < 30 ? 0.8 : 0.0}}, {}});
  script.push_back({{}, {{"agent", Verb::wave, std::nullopt, 0.5}}});
  auto log = datalog::simulate_and_record(slurp(kData / "kitchen.json"), script, {id, "subject_" + id, ""});
  fs::path p = scratch() / (id + ".jsonl");
  log.save(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("serve --scene " + q(scratch() / "missing.json")) == 2);
  CHECK(run("serve --scene " + q(kData / "kitchen.json") + " --hz 0") == 2);
  CHECK(run("serve --scene " + q(kData / "kitchen.json"), "VRGL_HZ=0") == 2);
  CHECK(run("train-rl --algo ppo --env " + q(kData / "maze_env.json")) == 2);
  CHECK(run("train-rl --algo q --env " + q(kData / "corridor_env.json") + " --out " + q(scratch())) == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("serve runs for a bounded time") {
  CHECK(run("serve --scene " + q(kData / "kitchen.json") + " --tcp 0 --ws 0 --duration 0.3") == 0);
}

TEST_CASE("train-rl is reproducible byte for byte") {
  fs::path a = scratch() / "rl_a", b = scratch() / "rl_b";
  const std::string args = "train-rl --algo q --env " + q(kData / "maze_env.json") + " --seed 3 --episodes 40";
  REQUIRE(run(args + " --out " + q(a)) == 0);
  REQUIRE(run(args + " --out " + q(b), "VRGL_EPISODES=40") == 0);
  std::string csv = slurp(a / "rl_q_seed3.csv");
  CHECK(count_lines(csv) == 41);
  CHECK(csv == slurp(b / "rl_q_seed3.csv"));
  CHECK(slurp(a / "rl_q_seed3_checkpoint.json") == slurp(b / "rl_q_seed3_checkpoint.json"));

  REQUIRE(run("export --what curves --input " + q(a / "rl_q_seed3.csv") + " --out " + q(a)) == 0);
  CHECK(count_lines(slurp(a / "curves.csv")) == 41);
}

TEST_CASE("train-irl from an exported mdp") {
  fs::path dir = scratch() / "irl";
  REQUIRE(run("export --what mdp --env " + q(kData / "grasp_env.json") + " --out " + q(dir)) == 0);
  GridMDP mdp = grid_mdp_from_json(nlohmann::json::parse(slurp(dir / "mdp.json")));
  std::mt19937_64 rng(5);
  auto demos = irl::sample_optimal_demos(mdp, mdp.reward, 20, 30, rng);
  std::ofstream(dir / "demos.jsonl") << irl::demos_to_jsonl(demos);

  CHECK(run("train-irl --algo maxent --mdp " + q(dir / "mdp.json") + " --demos " + q(dir / "demos.jsonl") +
            " --out " + q(dir)) == 0);
  auto reward = nlohmann::json::parse(slurp(dir / "reward_maxent.json"));
  CHECK(reward.at("reward").size() == static_cast<std::size_t>(mdp.n_states));

  std::ofstream(dir / "pw.json") << R"({"samples": 300, "burn_in": 100})";
  CHECK(run("train-irl --algo bayesian --mdp " + q(dir / "mdp.json") + " --demos " + q(dir / "demos.jsonl") +
            " --config " + q(dir / "pw.json") + " --out " + q(dir)) == 0);
  CHECK(fs::exists(dir / "diagnostics_bayesian.json"));
  CHECK(run("train-irl --algo maxent --mdp " + q(dir / "demos.jsonl") + " --demos " + q(dir / "demos.jsonl")) == 2);
}

TEST_CASE("session tools") {
  fs::path log = kitchen_session("k1");
  fs::path dir = scratch() / "session";
  const std::string scene = q(kData / "kitchen.json");

  CHECK(run("replay --session " + q(log) + " --scene " + scene + " --out " + q(dir)) == 0);
  auto report = nlohmann::json::parse(slurp(dir / "replay_k1.json"));
  CHECK(report.at("divergences").empty());

  // Nudging one logged pose is reported and fails the command.
  std::string text = slurp(log);
  auto pos = text.find("\"x\":");
  REQUIRE(pos != std::string::npos);
  text.insert(pos + 4, "1");
  std::ofstream(scratch() / "k1_bad.jsonl") << text;
  CHECK(run("replay --session " + q(scratch() / "k1_bad.jsonl") + " --scene " + scene + " --out " + q(dir)) == 1);
  CHECK(run("replay --session " + q(log) + " --scene " + q(kData / "maze.json") + " --out " + q(dir)) == 2);

  auto session = datalog::SessionLog::load(log);
  std::size_t odom = 0;
  for (const auto& r : session.records()) odom += std::holds_alternative<datalog::OdometrySample>(r);
  for (std::string algo : {"line", "perp", "grammar"}) {
    CHECK(run("predict-intent --algo " + algo + " --session " + q(log) + " --scene " + scene + " --out " + q(dir)) == 0);
    CHECK(count_lines(slurp(dir / ("posterior_" + algo + ".jsonl"))) == odom);
  }

  CHECK(run("export --what footprints --session " + q(log) + " --out " + q(dir)) == 0);
  CHECK(count_lines(slurp(dir / "footprints_k1_agent.csv")) == odom + 1);
  CHECK(run("export --what heatmap --object mug --session " + q(log) + " --session " + q(log) + " --out " + q(dir)) == 0);
  CHECK(fs::exists(dir / "heatmap_mug.json"));
  CHECK(run("export --what heatmap --session " + q(log)) == 2);
}

TEST_CASE("bench-bridge against an in-process broker") {
  fs::path dir = scratch() / "bench";
  CHECK(run("bench-bridge --size 4096 --count 50 --out " + q(dir)) == 0);
  auto j = nlohmann::json::parse(slurp(dir / "bench_bridge.json"));
  CHECK(j.at("messages_received") == 50);
  CHECK(j.at("loss") == 0);
}

TEST_CASE("record attaches to serve and the log replays") {
  const int port = 20000 + static_cast<int>(::getpid() % 20000);
  fs::path dir = scratch() / "live";
  std::thread server([&] {
    run("serve --scene " + q(kData / "kitchen.json") + " --ws 0 --duration 2.5 --tcp " + std::to_string(port));
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  CHECK(run("record --session live --subject p1 --duration 1 --port " + std::to_string(port) + " --out " + q(dir)) == 0);
  CHECK(run("record --session live --subject p1 --duration 1 --port " + std::to_string(port) + " --out " + q(dir)) == 2);
  server.join();
  REQUIRE(fs::exists(dir / "live.jsonl"));
  CHECK(run("replay --session " + q(dir / "live.jsonl") + " --scene " + q(kData / "kitchen.json") + " --out " + q(dir)) == 0);
}

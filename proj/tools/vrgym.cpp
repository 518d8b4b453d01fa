// vrgym command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error. Every flag can be set through an
// environment variable VRGL_<FLAG> (dashes become underscores).

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "vrgym/bridge/broker.hpp"
#include "vrgym/bridge/client.hpp"
#include "vrgym/datalog.hpp"
#include "vrgym/envs.hpp"
#include "vrgym/intent.hpp"
#include "vrgym/irl.hpp"
#include "vrgym/rl.hpp"
#include "vrgym/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vrgym;

namespace {

// Bad input: missing files, malformed documents, invalid values.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

// Scene parse errors are configuration errors.
SceneGraph load_scene_file(const fs::path& p, std::string* document = nullptr) {
  std::string doc = read_text(p);
  try {
    SceneGraph s = load_scene(doc);
    if (document) *document = std::move(doc);
    return s;
  } catch (const SceneError& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

datalog::SessionLog load_session(const fs::path& p) {
  read_text(p);  // existence check with a usage error
  try {
    return datalog::SessionLog::load(p);
  } catch (const datalog::LogError& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

std::unique_ptr<envs::Environment> load_env(const fs::path& p) {
  json cfg = read_json(p);
  try {
    return envs::make_env(cfg, p.parent_path());
  } catch (const std::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

// Names every option's VRGL_ variable after its long flag.
void bind_env(CLI::App& app) {
  for (CLI::Option* opt : app.get_options()) {
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string env = "VRGL_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    opt->envname(env);
  }
  for (CLI::App* sub : app.get_subcommands({})) bind_env(*sub);
}

std::string first_agent(const datalog::SessionLog& log) {
  for (const auto& r : log.records())
    if (const auto* o = std::get_if<datalog::OdometrySample>(&r)) return o->agent_id;
  throw UsageError("session has no odometry");
}

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');)
    if (!part.empty()) out.push_back(part);
  return out;
}

// ------------------------------------------------------------- serve

struct ServeArgs {
  std::string scene;
  int tcp = 9763;
  int ws = 9764;
  double hz = 20.0;
  std::string static_dir;
  double duration = 0.0;
};

int cmd_serve(const ServeArgs& a) {
  if (!(a.hz > 0.0) || a.hz > kTicksPerSecond) throw UsageError("--hz must be in (0, 60]");
  if (a.duration < 0.0) throw UsageError("--duration must be non-negative");
  server::ServeOptions o;
  load_scene_file(a.scene, &o.scene_document);
  o.tcp_port = static_cast<std::uint16_t>(a.tcp);
  if (a.ws > 0)
    o.ws_port = static_cast<std::uint16_t>(a.ws);
  else
    o.ws_port.reset();
  o.snapshot_hz = a.hz;
  o.static_dir = a.static_dir;
  server::SimServer s(o);
  s.start();
  std::cout << json{{"tcp", s.tcp_port()}, {"ws", s.ws_port()}, {"snapshot_hz", a.hz}}.dump() << std::endl;
  auto start = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (a.duration > 0.0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(a.duration))
      break;
  }
  s.stop();
  std::cout << json{{"ticks", s.tick()}, {"snapshots", s.snapshots()}}.dump() << std::endl;
  return 0;
}

// ------------------------------------------------------------- record

struct RecordArgs {
  std::string session, subject, host = "127.0.0.1", out = "out";
  int port = 9763;
  double duration = 0.0;
};

int cmd_record(const RecordArgs& a) {
  if (a.session.empty() || a.session.find('/') != std::string::npos) throw UsageError("bad --session id");
  fs::path file = fs::path(a.out) / (a.session + ".jsonl");
  if (fs::exists(file)) throw UsageError("session '" + a.session + "' already exists at " + file.string());
  fs::create_directories(a.out);
  auto start = std::chrono::steady_clock::now();
  auto keep = [&] {
    if (g_interrupted) return false;
    return a.duration <= 0.0 || std::chrono::steady_clock::now() - start < std::chrono::duration<double>(a.duration);
  };
  auto log = server::record_session(a.host, static_cast<std::uint16_t>(a.port), a.session, a.subject, file, keep);
  std::cout << json{{"session", a.session}, {"file", file.string()}, {"records", log.size()}}.dump() << std::endl;
  return 0;
}

// ------------------------------------------------------------- train-rl

struct TrainRlArgs {
  std::string algo, env, config, out = "out";
  std::uint64_t seed = 1;
  int episodes = 0;
};

int cmd_train_rl(const TrainRlArgs& a) {
  auto env = load_env(a.env);
  rl::TrainConfig cfg;
  try {
    cfg = a.config.empty() ? rl::TrainConfig{} : rl::train_config_from_json(read_json(a.config));
    cfg.seed = a.seed;
    if (a.episodes > 0) cfg.episodes = a.episodes;
    cfg.validate();
  } catch (const rl::RlError& e) {
    throw UsageError(e.what());
  }

  rl::TrainReport report;
  json checkpoint;
  try {
    if (a.algo == "q") {
      if (!env->state_index()) throw UsageError("tabular Q-learning needs an environment with grid states");
      rl::EnvTask task(*env);
      auto r = rl::q_learning_train(task, cfg);
      report = r.report;
      checkpoint = r.table.to_json();
    } else if (a.algo == "dqn") {
      auto r = rl::dqn_train(*env, cfg);
      report = r.report;
      checkpoint = r.net.to_json();
    } else if (a.algo == "dueling") {
      auto r = rl::dueling_dqn_train(*env, cfg);
      report = r.report;
      checkpoint = r.net.to_json();
    } else if (a.algo == "ac") {
      auto r = rl::actor_critic_train(*env, cfg);
      report = r.report;
      checkpoint = {{"policy", r.model.policy.to_json()}, {"value", r.model.value.to_json()}};
    } else {
      auto r = rl::ddpg_train(*env, cfg);
      report = r.report;
      checkpoint = {{"actor", r.model.actor.to_json()},
                    {"critic", r.model.critic.to_json()},
                    {"low", r.model.low},
                    {"high", r.model.high}};
    }
  } catch (const rl::RlError& e) {
    // Mismatched algorithm and action space.
    throw UsageError(e.what());
  }

  const std::string stem = "rl_" + a.algo + "_seed" + std::to_string(a.seed);
  write_text(fs::path(a.out) / (stem + ".csv"), report.to_csv());
  write_text(fs::path(a.out) / (stem + "_checkpoint.json"), checkpoint.dump() + "\n");
  auto ma = report.moving_average(100);
  std::cout << json{{"algo", a.algo},
                    {"episodes", report.episodes()},
                    {"success_rate_last100", report.success_rate_last(100)},
                    {"final_ma100", ma.empty() ? 0.0 : ma.back()},
                    {"report", (fs::path(a.out) / (stem + ".csv")).string()}}
                   .dump()
            << std::endl;
  return 0;
}

// ------------------------------------------------------------- train-irl

struct TrainIrlArgs {
  std::string algo, mdp, demos, config, out = "out";
  std::uint64_t seed = 1;
};

int cmd_train_irl(const TrainIrlArgs& a) {
  GridMDP mdp;
  irl::Demos demos;
  json cfg = a.config.empty() ? json::object() : read_json(a.config);
  try {
    mdp = grid_mdp_from_json(read_json(a.mdp));
    demos = irl::demos_from_jsonl(read_text(a.demos));
    irl::validate_demos(mdp, demos);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (demos.empty()) throw UsageError("no demonstrations in " + a.demos);

  if (a.algo == "maxent") {
    irl::MaxEntConfig c;
    try {
      c.iterations = cfg.value("iterations", c.iterations);
      c.lr = cfg.value("lr", c.lr);
      c.lr_decay = cfg.value("lr_decay", c.lr_decay);
      c.grad_tol = cfg.value("grad_tol", c.grad_tol);
      if (cfg.contains("horizon")) c.horizon = cfg["horizon"].get<int>();
      c.theta_bound = cfg.value("theta_bound", c.theta_bound);
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad MaxEnt config: ") + e.what());
    }
    auto r = irl::maxent_irl(mdp, demos, c);
    write_text(fs::path(a.out) / "reward_maxent.json", r.reward.to_json(mdp).dump() + "\n");
    write_text(fs::path(a.out) / "diagnostics_maxent.json", r.diagnostics.to_json().dump() + "\n");
    std::cout << json{{"algo", "maxent"},
                      {"iterations", r.diagnostics.iterations},
                      {"converged", r.diagnostics.converged},
                      {"diverged", r.diagnostics.diverged}}
                     .dump()
              << std::endl;
    return r.diagnostics.diverged ? 1 : 0;
  }

  irl::PolicyWalkConfig c;
  try {
    c.delta = cfg.value("delta", c.delta);
    c.alpha = cfg.value("alpha", c.alpha);
    c.samples = cfg.value("samples", c.samples);
    c.burn_in = cfg.value("burn_in", c.burn_in);
    c.low = cfg.value("low", c.low);
    c.high = cfg.value("high", c.high);
    c.thin = cfg.value("thin", c.thin);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad PolicyWalk config: ") + e.what());
  }
  c.seed = a.seed;
  irl::PosteriorSamples post;
  try {
    post = irl::bayesian_irl_policywalk(mdp, demos, c);
  } catch (const irl::IrlError& e) {
    throw UsageError(e.what());
  }
  json reward = {{"reward", post.mean}};
  write_text(fs::path(a.out) / "reward_bayesian.json", reward.dump() + "\n");
  write_text(fs::path(a.out) / "diagnostics_bayesian.json", post.to_json().dump() + "\n");
  std::cout << json{{"algo", "bayesian"}, {"kept", post.rewards.size()}, {"acceptance_rate", post.acceptance_rate}}.dump()
            << std::endl;
  return 0;
}

// ------------------------------------------------------------- predict-intent

struct PredictArgs {
  std::string algo, session, scene, agent, goals, grammar, out = "out";
  double beta = 2.0;
  double lambda = 1.0;
};

int cmd_predict(const PredictArgs& a) {
  std::string doc;
  SceneGraph scene = load_scene_file(a.scene, &doc);
  auto log = load_session(a.session);
  if (!log.info().scene_hash.empty() && log.info().scene_hash != datalog::scene_hash(doc))
    throw UsageError("session was recorded on a different scene");
  const std::string agent = a.agent.empty() ? first_agent(log) : a.agent;
  OccupancyGrid grid = occupancy_grid(scene, scene.cell_size);
  std::vector<std::string> ids = a.goals.empty() ? intent::default_goal_ids(scene) : split_ids(a.goals);
  intent::GoalSet goals;
  intent::TaskGrammar grammar;
  try {
    goals = intent::goals_from_scene(scene, grid, ids);
    if (!a.grammar.empty()) {
      grammar = intent::TaskGrammar::from_json(read_json(a.grammar));
    } else {
      grammar = intent::coffee_grammar();
      bool covered = std::all_of(grammar.subgoals.begin(), grammar.subgoals.end(), [&](const std::string& s) {
        return std::find(ids.begin(), ids.end(), s) != ids.end();
      });
      if (!covered) grammar = intent::unordered_grammar(ids);
    }
  } catch (const intent::IntentError& e) {
    throw UsageError(e.what());
  }

  intent::Planner planner(grid);
  std::set<std::string> completed;
  std::vector<intent::GridCell> prefix;
  std::string out;
  std::size_t lines = 0;
  for (const auto& r : log.records()) {
    if (const auto* ev = std::get_if<ActionEvent>(&r)) {
      // A successful grasp completes that subgoal and starts a new segment.
      if (ev->agent_id == agent && ev->verb == Verb::grasp && ev->outcome == Outcome::ok && ev->target_id) {
        completed.insert(*ev->target_id);
        if (!prefix.empty()) prefix = {prefix.back()};
      }
      continue;
    }
    const auto* o = std::get_if<datalog::OdometrySample>(&r);
    if (!o || o->agent_id != agent) continue;
    json line = {{"tick", o->tick}, {"agent", agent}, {"x", o->pose.x}, {"y", o->pose.y}};
    try {
      intent::GoalPosterior post;
      if (a.algo == "line") {
        post = intent::predict_straightline({o->pose.x, o->pose.y}, goals, a.beta);
      } else if (a.algo == "perp") {
        post = intent::predict_perpendicular({o->pose.x, o->pose.y}, {std::cos(o->pose.yaw), std::sin(o->pose.yaw)},
                                             goals, a.beta);
      } else {
        auto cell = grid.cell_of(o->pose.x, o->pose.y);
        if (prefix.empty() || prefix.back() != cell) prefix.push_back(cell);
        post = intent::predict_grammar(prefix, grammar, completed, goals, planner, a.lambda);
      }
      line["posterior"] = post.to_json();
      line["top"] = post.top();
    } catch (const intent::IntentError& e) {
      line["error"] = e.what();
    }
    out += line.dump() + "\n";
    ++lines;
  }
  fs::path file = fs::path(a.out) / ("posterior_" + a.algo + ".jsonl");
  write_text(file, out);
  std::cout << json{{"algo", a.algo}, {"agent", agent}, {"samples", lines}, {"file", file.string()}}.dump()
            << std::endl;
  return 0;
}

// ------------------------------------------------------------- bench-bridge

struct BenchArgs {
  std::size_t size = 524288;
  std::size_t count = 1000;
  std::string host = "127.0.0.1", out = "out";
  int port = 0;  // 0: start a broker in-process
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a) {
  if (a.count == 0) throw UsageError("--count must be positive");
  std::unique_ptr<bridge::Broker> local;
  std::uint16_t port = static_cast<std::uint16_t>(a.port);
  if (port == 0) {
    local = bridge::serve(0, a.host);
    port = local->port();
  }
  auto st = bridge::benchmark_throughput(a.size, a.count, a.host, port, a.seed);
  json j = st.to_json();
  j["payload_bytes"] = a.size;
  j["count"] = a.count;
  write_text(fs::path(a.out) / "bench_bridge.json", j.dump(2) + "\n");
  std::cout << j.dump() << std::endl;
  bool ok = st.error.empty() && st.loss == 0 && st.crc_failures == 0 && st.out_of_order == 0 &&
            st.messages_received == a.count;
  return ok ? 0 : 1;
}

// ------------------------------------------------------------- replay

struct ReplayArgs {
  std::string session, scene, out = "out";
};

int cmd_replay(const ReplayArgs& a) {
  std::string doc;
  load_scene_file(a.scene, &doc);
  auto log = load_session(a.session);
  datalog::ReplayResult r;
  try {
    r = datalog::replay(log, doc);
  } catch (const datalog::LogError& e) {
    throw UsageError(e.what());
  }
  json divs = json::array();
  for (const auto& d : r.divergences) {
    json j = {{"tick", d.tick},
              {"agent", d.agent_id},
              {"logged", {{"x", d.logged.x}, {"y", d.logged.y}, {"yaw", d.logged.yaw}}}};
    if (d.replayed) j["replayed"] = {{"x", d.replayed->x}, {"y", d.replayed->y}, {"yaw", d.replayed->yaw}};
    divs.push_back(std::move(j));
  }
  json report = {{"session", log.info().session_id},
                 {"records", log.size()},
                 {"final_tick", r.final_scene.tick},
                 {"divergences", divs}};
  write_text(fs::path(a.out) / ("replay_" + log.info().session_id + ".json"), report.dump(2) + "\n");
  std::cout << json{{"session", log.info().session_id}, {"divergences", divs.size()}}.dump() << std::endl;
  return divs.empty() ? 0 : 1;
}

// ------------------------------------------------------------- export

struct ExportArgs {
  std::string what, agent, object, env, out = "out";
  std::vector<std::string> sessions, inputs;
  double resolution = 0.0;
};

int cmd_export(const ExportArgs& a) {
  fs::path out(a.out);
  if (a.what == "footprints") {
    if (a.sessions.empty()) throw UsageError("footprints need --session");
    for (const auto& path : a.sessions) {
      auto log = load_session(path);
      std::string agent = a.agent.empty() ? first_agent(log) : a.agent;
      write_text(out / ("footprints_" + log.info().session_id + "_" + agent + ".csv"),
                 datalog::footprint_export(log, agent));
    }
  } else if (a.what == "heatmap") {
    if (a.sessions.empty() || a.object.empty()) throw UsageError("heatmap needs --session and --object");
    json subjects = json::array();
    std::vector<datalog::HeatMap> maps;
    for (const auto& path : a.sessions) {
      auto log = load_session(path);
      maps.push_back(datalog::heatmap_accumulate(datalog::contacts_for(log, a.object), a.object));
      subjects.push_back({{"session", log.info().session_id},
                          {"subject", log.info().subject_id},
                          {"map", datalog::to_json(maps.back())}});
    }
    json doc = {{"object", a.object}, {"subjects", subjects}, {"average", datalog::to_json(datalog::heatmap_average(maps))}};
    write_text(out / ("heatmap_" + a.object + ".json"), doc.dump(2) + "\n");
  } else if (a.what == "curves") {
    if (a.inputs.empty()) throw UsageError("curves need --input report CSVs");
    std::string csv = "source,episode,return,success,steps,ma100\n";
    for (const auto& path : a.inputs) {
      std::stringstream in(read_text(path));
      std::string line;
      std::getline(in, line);
      if (line != "episode,return,success,steps,ma100") throw UsageError(path + ": not a training report");
      const std::string source = fs::path(path).stem().string();
      while (std::getline(in, line))
        if (!line.empty()) csv += source + "," + line + "\n";
    }
    write_text(out / "curves.csv", csv);
  } else if (a.what == "mdp") {
    if (a.env.empty()) throw UsageError("mdp export needs --env");
    auto env = load_env(a.env);
    double res = a.resolution > 0.0 ? a.resolution : env->scene().cell_size;
    GridMDP mdp;
    try {
      mdp = envs::as_grid_mdp(*env, res);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    write_text(out / "mdp.json", to_json(mdp).dump() + "\n");
  } else if (a.what == "demos") {
    if (a.env.empty() || a.sessions.empty()) throw UsageError("demos need --env and --session");
    auto env = load_env(a.env);
    double res = a.resolution > 0.0 ? a.resolution : env->scene().cell_size;
    GridMDP mdp = envs::as_grid_mdp(*env, res);
    irl::Demos demos;
    for (const auto& path : a.sessions) {
      auto log = load_session(path);
      std::string agent = a.agent.empty() ? first_agent(log) : a.agent;
      std::vector<std::pair<double, double>> xy;
      for (const auto& r : log.records())
        if (const auto* o = std::get_if<datalog::OdometrySample>(&r); o && o->agent_id == agent)
          xy.emplace_back(o->pose.x, o->pose.y);
      auto d = irl::demo_from_footprint(mdp, xy);
      if (!d.steps.empty()) demos.push_back(std::move(d));
    }
    write_text(out / "demos.jsonl", irl::demos_to_jsonl(demos));
  }
  std::cout << json{{"what", a.what}, {"out", out.string()}}.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vrgym: headless VR testbed tools"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the broker and simulator");
  s->add_option("--scene", serve.scene, "Scene document")->required();
  s->add_option("--tcp", serve.tcp, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  s->add_option("--ws", serve.ws, "WebSocket port (0 disables)")->check(CLI::Range(0, 65535));
  s->add_option("--hz", serve.hz, "Snapshot rate");
  s->add_option("--static", serve.static_dir, "Directory served at GET / on the WebSocket port");
  s->add_option("--duration", serve.duration, "Stop after this many seconds (0 runs until interrupted)");

  RecordArgs record;
  auto* r = app.add_subcommand("record", "Log a running server's session to <out>/<session>.jsonl");
  r->add_option("--session", record.session)->required();
  r->add_option("--subject", record.subject)->required();
  r->add_option("--host", record.host);
  r->add_option("--port", record.port)->check(CLI::Range(1, 65535));
  r->add_option("--duration", record.duration, "Stop after this many seconds (0 runs until interrupted)");
  r->add_option("--out", record.out);

  TrainRlArgs train_rl;
  auto* tr = app.add_subcommand("train-rl", "Train an RL agent; writes the report CSV and a checkpoint");
  tr->add_option("--algo", train_rl.algo)->required()->check(CLI::IsMember({"q", "dqn", "dueling", "ac", "ddpg"}));
  tr->add_option("--env", train_rl.env, "Environment config")->required();
  tr->add_option("--seed", train_rl.seed);
  tr->add_option("--config", train_rl.config, "Training config JSON");
  tr->add_option("--episodes", train_rl.episodes, "Override the configured episode count");
  tr->add_option("--out", train_rl.out);

  TrainIrlArgs train_irl;
  auto* ti = app.add_subcommand("train-irl", "Recover a reward from demonstrations");
  ti->add_option("--algo", train_irl.algo)->required()->check(CLI::IsMember({"maxent", "bayesian"}));
  ti->add_option("--mdp", train_irl.mdp, "MDP export (export --what mdp)")->required();
  ti->add_option("--demos", train_irl.demos, "Demonstrations JSONL")->required();
  ti->add_option("--config", train_irl.config, "Algorithm config JSON");
  ti->add_option("--seed", train_irl.seed);
  ti->add_option("--out", train_irl.out);

  PredictArgs predict;
  auto* pi = app.add_subcommand("predict-intent", "Goal posterior for every odometry sample of a session");
  pi->add_option("--algo", predict.algo)->required()->check(CLI::IsMember({"line", "perp", "grammar"}));
  pi->add_option("--session", predict.session)->required();
  pi->add_option("--scene", predict.scene)->required();
  pi->add_option("--agent", predict.agent);
  pi->add_option("--goals", predict.goals, "Comma-separated goal entity ids");
  pi->add_option("--grammar", predict.grammar, "Task grammar JSON");
  pi->add_option("--beta", predict.beta);
  pi->add_option("--lambda", predict.lambda);
  pi->add_option("--out", predict.out);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench-bridge", "Stream payloads through a broker and verify them");
  b->add_option("--size", bench.size);
  b->add_option("--count", bench.count);
  b->add_option("--host", bench.host);
  b->add_option("--port", bench.port, "Broker port (0 starts one in-process)")->check(CLI::Range(0, 65535));
  b->add_option("--seed", bench.seed);
  b->add_option("--out", bench.out);

  ReplayArgs replay;
  auto* rp = app.add_subcommand("replay", "Re-simulate a session and report divergences");
  rp->add_option("--session", replay.session)->required();
  rp->add_option("--scene", replay.scene)->required();
  rp->add_option("--out", replay.out);

  ExportArgs ex;
  auto* e = app.add_subcommand("export", "Write plot data");
  e->add_option("--what", ex.what)
      ->required()
      ->check(CLI::IsMember({"footprints", "heatmap", "curves", "mdp", "demos"}));
  e->add_option("--session", ex.sessions, "Session logs");
  e->add_option("--input", ex.inputs, "Training report CSVs (curves)");
  e->add_option("--agent", ex.agent);
  e->add_option("--object", ex.object);
  e->add_option("--env", ex.env, "Environment config (mdp, demos)");
  e->add_option("--resolution", ex.resolution);
  e->add_option("--out", ex.out);

  bind_env(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*s) return cmd_serve(serve);
    if (*r) return cmd_record(record);
    if (*tr) return cmd_train_rl(train_rl);
    if (*ti) return cmd_train_irl(train_irl);
    if (*pi) return cmd_predict(predict);
    if (*b) return cmd_bench(bench);
    if (*rp) return cmd_replay(replay);
    if (*e) return cmd_export(ex);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

#include "vrgym/server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "vrgym/bridge/broker.hpp"
#include "vrgym/bridge/client.hpp"
#include "vrgym/intent.hpp"

namespace vrgym::server {

using nlohmann::json;

namespace {

// "/agent/<id>/<leaf>" -> id, or empty.
std::string agent_of(const std::string& topic, std::string_view leaf) {
  static constexpr std::string_view kPrefix = "/agent/";
  if (topic.rfind(kPrefix, 0) != 0) return {};
  std::size_t slash = topic.find('/', kPrefix.size());
  if (slash == std::string::npos || topic.compare(slash + 1, std::string::npos, leaf) != 0) return {};
  return topic.substr(kPrefix.size(), slash - kPrefix.size());
}

intent::GoalSet scene_goals(const SceneGraph& scene) {
  intent::GoalSet goals;
  for (const auto& id : intent::default_goal_ids(scene)) {
    const Pose& p = scene.at(id).pose;
    goals.push_back({id, {p.x, p.y}, {0, 0}});
  }
  return goals;
}

}  // namespace

struct SimServer::Impl {
  using Clock = std::chrono::steady_clock;

  ServeOptions options;
  std::unique_ptr<bridge::Broker> broker;
  std::unique_ptr<bridge::BridgeClient> client;

  mutable std::mutex m;
  std::deque<bridge::Envelope> inbox;
  SceneGraph initial;
  datalog::SessionLog log;
  std::unique_ptr<datalog::SessionRecorder> recorder;
  std::atomic<std::int64_t> tick{0};
  std::atomic<std::uint64_t> snapshots{0};
  std::atomic<bool> running{false};
  std::thread loop;

  struct Held {
    VelocityCommand command;
    std::int64_t until = 0;
  };
  std::map<std::string, Held> held;

  void publish(const std::string& topic, const std::string& type, json data) {
    try {
      client->publish(topic, type, std::move(data));
    } catch (const std::exception&) {
      // The broker is in-process; a failed send means we are shutting down.
    }
  }

  void take_input(std::vector<ActionRequest>& actions, std::vector<std::string>& history_replies) {
    std::deque<bridge::Envelope> batch;
    {
      std::lock_guard lock(m);
      batch.swap(inbox);
    }
    const SceneGraph& scene = recorder->scene();
    for (auto& e : batch) {
      try {
        if (e.topic == kHistoryTopic && e.type == "HistoryRequest") {
          history_replies.push_back(e.data.at("reply").get<std::string>());
        } else if (std::string id = agent_of(e.topic, "cmd"); !id.empty() && e.type == "VelocityCommand") {
          if (!scene.find(id)) continue;
          VelocityCommand c{id, e.data.at("v").get<double>(), e.data.value("omega", 0.0)};
          held[id] = {c, scene.tick + 1 + options.command_hold_ticks};
        } else if (std::string id = agent_of(e.topic, "action"); !id.empty() && e.type == "ActionRequest") {
          if (!scene.find(id)) continue;
          ActionRequest r{id, verb_from_string(e.data.at("verb").get<std::string>()), std::nullopt,
                          e.data.value("grip", 0.5)};
          if (e.data.contains("target")) r.target_id = e.data.at("target").get<std::string>();
          actions.push_back(std::move(r));
        }
      } catch (const std::exception&) {
        // Malformed input is dropped; the sender gets no reply.
      }
    }
  }

  void step_once(std::int64_t snapshot_every) {
    std::vector<ActionRequest> actions;
    std::vector<std::string> replies;
    take_input(actions, replies);

    // History replies are answered before this tick's records exist, so a
    // recorder can splice them with live records strictly after end_tick.
    for (const auto& topic : replies) {
      datalog::SessionLog snapshot = history_copy();
      for (const auto& r : snapshot.records()) publish(topic, "Record", datalog::to_json(r));
      publish(topic, "HistoryEnd",
              {{"end_tick", tick.load()}, {"scene_hash", snapshot.info().scene_hash}});
    }

    const std::int64_t next = recorder->scene().tick + 1;
    std::vector<VelocityCommand> commands;
    for (auto it = held.begin(); it != held.end();) {
      if (it->second.until < next) {
        it = held.erase(it);
        continue;
      }
      if (it->second.command.v != 0.0 || it->second.command.omega != 0.0) commands.push_back(it->second.command);
      ++it;
    }

    std::size_t before;
    std::vector<SceneEvent> events;
    {
      std::lock_guard lock(m);
      before = log.size();
      events = recorder->step(commands, actions);
      tick = recorder->scene().tick;
    }
    const SceneGraph& scene = recorder->scene();

    for (std::size_t i = before; i < log.size(); ++i) {
      const auto& rec = log.records()[i];
      publish(kRecordsTopic, "Record", datalog::to_json(rec));
      if (const auto* o = std::get_if<datalog::OdometrySample>(&rec))
        publish("/agent/" + o->agent_id + "/odom", "Odometry",
                {{"tick", o->tick}, {"pose", {{"x", o->pose.x}, {"y", o->pose.y}, {"yaw", o->pose.yaw}}}});
    }
    for (const auto& ev : events) {
      publish(kEventsTopic, "SceneEvent", to_json(ev));
      if (const auto* a = std::get_if<ActionEvent>(&ev))
        publish("/agent/" + a->agent_id + "/action", "ActionEvent", to_json(*a));
    }

    if (scene.tick % snapshot_every == 0) {
      publish(kSnapshotTopic, "SceneGraph", to_json(scene));
      ++snapshots;
      auto goals = scene_goals(scene);
      if (!goals.empty()) {
        for (const auto& id : scene.agent_ids()) {
          const Pose& p = scene.at(id).pose;
          auto post = intent::predict_straightline({p.x, p.y}, goals);
          publish("/agent/" + id + "/intent", "GoalPosterior", {{"tick", scene.tick}, {"posterior", post.to_json()}});
        }
      }
    }
  }

  datalog::SessionLog history_copy() const {
    std::lock_guard lock(m);
    datalog::SessionLog copy(log.info());
    for (const auto& r : log.records()) copy.record(r);
    return copy;
  }

  void run() {
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / options.tick_hz));
    const auto snapshot_every =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(kTicksPerSecond / options.snapshot_hz)));
    auto next = Clock::now();
    while (running) {
      next += period;
      step_once(snapshot_every);
      std::this_thread::sleep_until(next);
    }
  }
};

SimServer::SimServer(ServeOptions options) : impl_(std::make_unique<Impl>()) {
  if (!(options.snapshot_hz > 0.0) || options.snapshot_hz > kTicksPerSecond)
    throw std::invalid_argument("snapshot rate must be in (0, 60] Hz");
  if (!(options.tick_hz > 0.0)) throw std::invalid_argument("tick rate must be positive");
  if (options.command_hold_ticks < 0) throw std::invalid_argument("command hold must be non-negative");
  impl_->initial = load_scene(options.scene_document);
  impl_->log = datalog::SessionLog({"server", "", datalog::scene_hash(options.scene_document)});
  impl_->options = std::move(options);
}

SimServer::~SimServer() { stop(); }

void SimServer::start() {
  if (impl_->running) return;
  bridge::BrokerOptions bo;
  bo.host = impl_->options.host;
  bo.tcp_port = impl_->options.tcp_port;
  impl_->broker = std::make_unique<bridge::Broker>(bo);
  impl_->broker->start();
  if (impl_->options.ws_port) impl_->broker->start_ws(*impl_->options.ws_port, impl_->options.static_dir);

  impl_->recorder = std::make_unique<datalog::SessionRecorder>(impl_->initial, impl_->log);
  impl_->client = std::make_unique<bridge::BridgeClient>(impl_->options.host, impl_->broker->port());
  impl_->client->set_handler([this](bridge::Envelope e) {
    std::lock_guard lock(impl_->m);
    impl_->inbox.push_back(std::move(e));
  });
  for (const char* t : {kSnapshotTopic, kEventsTopic, kRecordsTopic}) impl_->client->advertise(t, "");
  impl_->client->subscribe_sync("/agent/*/cmd");
  impl_->client->subscribe_sync("/agent/*/action");
  impl_->client->subscribe_sync(kHistoryTopic);
  impl_->running = true;
  impl_->loop = std::thread([this] { impl_->run(); });
}

void SimServer::stop() {
  if (!impl_->running.exchange(false)) return;
  if (impl_->loop.joinable()) impl_->loop.join();
  impl_->client->close();
  impl_->broker->stop();
}

std::uint16_t SimServer::tcp_port() const { return impl_->broker ? impl_->broker->port() : 0; }
std::uint16_t SimServer::ws_port() const { return impl_->broker ? impl_->broker->ws_port() : 0; }
std::int64_t SimServer::tick() const { return impl_->tick; }
std::uint64_t SimServer::snapshots() const { return impl_->snapshots; }
datalog::SessionLog SimServer::history() const { return impl_->history_copy(); }

// ------------------------------------------------------------- recorder

datalog::SessionLog record_session(const std::string& host, std::uint16_t port, const std::string& session_id,
                                   const std::string& subject_id, const std::filesystem::path& file,
                                   const std::function<bool()>& keep_going, int timeout_ms) {
  if (std::filesystem::exists(file)) throw datalog::LogError("session '" + session_id + "' already exists at " + file.string());
  bridge::BridgeClient c(host, port);
  const std::string reply = "/recorder/" + session_id + "/history";
  c.subscribe_sync(kRecordsTopic);
  c.subscribe_sync(reply);
  c.publish(kHistoryTopic, "HistoryRequest", {{"reply", reply}});

  std::deque<datalog::Record> live;
  std::vector<datalog::Record> past;
  std::optional<std::int64_t> end_tick;
  std::string hash;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (!end_tick) {
    int left = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count());
    if (left <= 0) throw datalog::LogError("server did not send its history");
    auto e = c.receive(left);
    if (!e) continue;
    if (e->topic == reply && e->type == "HistoryEnd") {
      end_tick = e->data.at("end_tick").get<std::int64_t>();
      hash = e->data.at("scene_hash").get<std::string>();
    } else if (e->topic == reply) {
      past.push_back(datalog::record_from_json(e->data));
    } else if (e->topic == kRecordsTopic) {
      live.push_back(datalog::record_from_json(e->data));
    }
  }

  datalog::SessionLog log({session_id, subject_id, hash}, file);
  for (auto& r : past) log.record(std::move(r));
  for (auto& r : live)
    if (datalog::tick_of(r) > *end_tick) log.record(std::move(r));
  while (keep_going()) {
    auto e = c.receive(50);
    if (!e) {
      if (!c.connected()) break;
      continue;
    }
    if (e->topic != kRecordsTopic) continue;
    auto r = datalog::record_from_json(e->data);
    if (datalog::tick_of(r) > *end_tick) log.record(std::move(r));
  }
  return log;
}

}  // namespace vrgym::server

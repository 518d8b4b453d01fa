#include "vrgym/datalog.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <sstream>

#include <openssl/evp.h>

namespace vrgym::datalog {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw LogError(std::string("record missing '") + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception&) {
    throw LogError(std::string("record field '") + key + "' has the wrong type");
  }
}

ContactPatch patch_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw LogError("patch must be [face, u, v]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

json header_json(const SessionInfo& info) {
  return {{"kind", "session"},
          {"session_id", info.session_id},
          {"subject_id", info.subject_id},
          {"scene_hash", info.scene_hash}};
}

}  // namespace

std::int64_t tick_of(const Record& r) {
  return std::visit([](const auto& e) { return e.tick; }, r);
}

json to_json(const Record& r) {
  struct Visitor {
    json operator()(const OdometrySample& s) const {
      return {{"t", s.tick}, {"kind", "odom"}, {"agent", s.agent_id}, {"x", s.pose.x}, {"y", s.pose.y},
              {"yaw", s.pose.yaw}};
    }
    json operator()(const ActionEvent& e) const { return vrgym::to_json(e); }
    json operator()(const CollisionEvent& e) const { return vrgym::to_json(e); }
    json operator()(const GraspContactEvent& e) const {
      return {{"t", e.tick}, {"kind", "contact"}, {"agent", e.agent_id}, {"object", e.object_id},
              {"patch", {e.patch.face, e.patch.u, e.patch.v}}};
    }
    json operator()(const CommandRecord& c) const {
      return {{"t", c.tick}, {"kind", "cmd"}, {"agent", c.command.agent_id}, {"v", c.command.v},
              {"w", c.command.omega}};
    }
    json operator()(const RequestRecord& r) const {
      json j = {{"t", r.tick}, {"kind", "request"}, {"agent", r.request.agent_id},
                {"verb", std::string(to_string(r.request.verb))}, {"grip", r.request.grip_height}};
      if (r.request.target_id) j["target"] = *r.request.target_id;
      return j;
    }
  };
  return std::visit(Visitor{}, r);
}

Record record_from_json(const json& j) {
  if (!j.is_object()) throw LogError("record must be a JSON object");
  const auto kind = get<std::string>(j, "kind");
  const auto t = get<std::int64_t>(j, "t");
  const auto agent = get<std::string>(j, "agent");
  try {
    if (kind == "odom")
      return OdometrySample{t, agent, {get<double>(j, "x"), get<double>(j, "y"), get<double>(j, "yaw")}};
    if (kind == "action") {
      ActionEvent e{t, agent, verb_from_string(get<std::string>(j, "verb")), std::nullopt,
                    outcome_from_string(get<std::string>(j, "outcome")), std::nullopt};
      if (j.contains("target")) e.target_id = get<std::string>(j, "target");
      if (j.contains("patch")) e.contact = patch_from_json(j["patch"]);
      return e;
    }
    if (kind == "collision") return CollisionEvent{t, agent, get<std::string>(j, "obstacle")};
    if (kind == "contact")
      return GraspContactEvent{t, agent, get<std::string>(j, "object"), patch_from_json(field(j, "patch"))};
    if (kind == "cmd") return CommandRecord{t, {agent, get<double>(j, "v"), get<double>(j, "w")}};
    if (kind == "request") {
      ActionRequest r{agent, verb_from_string(get<std::string>(j, "verb")), std::nullopt, get<double>(j, "grip")};
      if (j.contains("target")) r.target_id = get<std::string>(j, "target");
      return RequestRecord{t, r};
    }
  } catch (const SceneError& e) {
    throw LogError(e.what());
  }
  throw LogError("unknown record kind '" + kind + "'");
}

std::string scene_hash(std::string_view document) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_Digest(document.data(), document.size(), digest, &n, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < n; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

SessionLog::SessionLog(SessionInfo info) : info_(std::move(info)) {}

SessionLog::SessionLog(SessionInfo info, const std::filesystem::path& file) : info_(std::move(info)) {
  sink_ = std::make_unique<std::ofstream>(file, std::ios::out | std::ios::trunc);
  if (!*sink_) throw LogError("cannot open " + file.string());
  *sink_ << header_json(info_).dump() << '\n';
  sink_->flush();
}

void SessionLog::record(Record r) {
  const std::int64_t t = tick_of(r);
  if (t < last_tick_)
    throw LogError("tick regression: " + std::to_string(t) + " after " + std::to_string(last_tick_));
  if (sink_) {
    *sink_ << to_json(r).dump() << '\n';
    sink_->flush();
    if (!*sink_) throw LogError("write failed");
  }
  last_tick_ = t;
  records_.push_back(std::move(r));
}

std::string SessionLog::to_jsonl() const {
  std::string out = header_json(info_).dump() + "\n";
  for (const auto& r : records_) out += to_json(r).dump() + "\n";
  return out;
}

SessionLog SessionLog::from_jsonl(std::string_view text) {
  SessionLog log;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      if (!header_seen && j.is_object() && j.value("kind", "") == "session") {
        log.info_ = {get<std::string>(j, "session_id"), get<std::string>(j, "subject_id"),
                     get<std::string>(j, "scene_hash")};
        header_seen = true;
        continue;
      }
      log.record(record_from_json(j));
    } catch (const json::exception& e) {
      throw LogError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const LogError& e) {
      throw LogError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

SessionLog SessionLog::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LogError("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

void SessionLog::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw LogError("cannot open " + file.string());
  out << to_jsonl();
  if (!out) throw LogError("write failed: " + file.string());
}

std::vector<OdometrySample> OdometrySampler::sample(const SceneGraph& scene) {
  std::vector<OdometrySample> out;
  for (const auto& id : scene.agent_ids()) {
    const Pose& p = scene.at(id).pose;
    auto it = last_.find(id);
    bool due = it == last_.end();
    if (!due) {
      const Pose& q = it->second.pose;
      const bool moved = p.x != q.x || p.y != q.y || p.yaw != q.yaw;
      due = moved || scene.tick - it->second.tick >= kIdlePeriod;
    }
    if (due) {
      out.push_back({scene.tick, id, p});
      last_[id] = {p, scene.tick};
    } else {
      it->second.pose = p;
    }
  }
  return out;
}

SessionRecorder::SessionRecorder(SceneGraph scene, SessionLog& log) : scene_(std::move(scene)), log_(log) {
  log_odometry();
}

std::vector<SceneEvent> SessionRecorder::step(const std::vector<VelocityCommand>& commands,
                                              const std::vector<ActionRequest>& actions) {
  auto events = advance(scene_, commands, actions);
  for (const auto& c : commands) log_.record(CommandRecord{scene_.tick, c});
  for (const auto& a : actions) log_.record(RequestRecord{scene_.tick, a});
  log_events(events);
  log_odometry();
  return events;
}

void SessionRecorder::log_events(const std::vector<SceneEvent>& events) {
  for (const auto& ev : events) {
    if (const auto* a = std::get_if<ActionEvent>(&ev)) {
      log_.record(*a);
      if (a->verb == Verb::grasp && a->outcome == Outcome::ok && a->contact && a->target_id)
        log_.record(GraspContactEvent{a->tick, a->agent_id, *a->target_id, *a->contact});
    } else {
      log_.record(std::get<CollisionEvent>(ev));
    }
  }
}

void SessionRecorder::log_odometry() {
  for (auto& s : sampler_.sample(scene_)) log_.record(std::move(s));
}

SessionLog simulate_and_record(std::string_view scene_document, const std::vector<ScriptStep>& script,
                               SessionInfo info) {
  info.scene_hash = scene_hash(scene_document);
  SessionLog log(std::move(info));
  SessionRecorder rec(load_scene(scene_document), log);
  for (const auto& s : script) rec.step(s.commands, s.actions);
  return log;
}

std::string footprint_export(const SessionLog& session, const std::string& agent_id) {
  std::vector<const OdometrySample*> rows;
  for (const auto& r : session.records())
    if (const auto* s = std::get_if<OdometrySample>(&r); s && s->agent_id == agent_id) rows.push_back(s);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->tick < b->tick; });
  std::string out = "tick,x,y,yaw\n";
  for (const auto* s : rows) {
    out += std::to_string(s->tick);
    out += ',' + format_double(s->pose.x) + ',' + format_double(s->pose.y) + ',' + format_double(s->pose.yaw) + '\n';
  }
  return out;
}

ReplayResult replay(const SessionLog& session, std::string_view scene_document) {
  if (!session.info().scene_hash.empty() && session.info().scene_hash != scene_hash(scene_document))
    throw LogError("scene hash mismatch");
  ReplayResult result;
  SceneGraph& scene = result.final_scene;
  scene = load_scene(scene_document);
  const auto& recs = session.records();
  if (recs.empty()) return result;

  std::vector<VelocityCommand> commands;
  std::vector<ActionRequest> actions;
  auto compare = [&](const OdometrySample& s) {
    const Entity* e = scene.find(s.agent_id);
    if (!e || e->kind != EntityKind::agent) {
      result.divergences.push_back({s.tick, s.agent_id, s.pose, std::nullopt});
      return;
    }
    const Pose& p = e->pose;
    // Bitwise comparison: -0.0 and 0.0 differ, NaN payloads count.
    if (std::memcmp(&p.x, &s.pose.x, sizeof(double)) != 0 || std::memcmp(&p.y, &s.pose.y, sizeof(double)) != 0 ||
        std::memcmp(&p.yaw, &s.pose.yaw, sizeof(double)) != 0)
      result.divergences.push_back({s.tick, s.agent_id, s.pose, p});
  };

  std::size_t i = 0;
  while (i < recs.size()) {
    const std::int64_t t = tick_of(recs[i]);
    if (t > scene.tick) {
      // Inputs for tick t drive the step scene.tick -> t; idle steps before it.
      while (scene.tick + 1 < t) advance(scene, {});
      commands.clear();
      actions.clear();
      for (std::size_t k = i; k < recs.size() && tick_of(recs[k]) == t; ++k) {
        if (const auto* c = std::get_if<CommandRecord>(&recs[k])) commands.push_back(c->command);
        if (const auto* a = std::get_if<RequestRecord>(&recs[k])) actions.push_back(a->request);
      }
      advance(scene, commands, actions);
    }
    for (; i < recs.size() && tick_of(recs[i]) == t; ++i)
      if (const auto* s = std::get_if<OdometrySample>(&recs[i]); s && t == scene.tick) compare(*s);
    // Records older than the scene's start tick cannot be re-simulated.
    for (; i < recs.size() && tick_of(recs[i]) < scene.tick; ++i)
      if (const auto* s = std::get_if<OdometrySample>(&recs[i])) result.divergences.push_back({s->tick, s->agent_id, s->pose, std::nullopt});
  }
  return result;
}

std::uint64_t HeatMap::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::vector<double> HeatMap::normalize() const {
  std::vector<double> out(counts.size(), 0.0);
  const std::uint64_t mx = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  if (mx == 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(mx);
  return out;
}

HeatMap heatmap_accumulate(const std::vector<GraspContactEvent>& events, const std::string& object_id,
                           std::array<int, 3> dims) {
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw LogError("heat map dims must be positive");
  HeatMap map;
  map.object_id = object_id;
  map.dims = dims;
  map.counts.assign(map.size(), 0);
  for (const auto& e : events) {
    if (e.object_id != object_id)
      throw LogError("contact on '" + e.object_id + "' while accumulating '" + object_id + "'");
    const auto& p = e.patch;
    if (p.face < 0 || p.face >= dims[0] || p.u < 0 || p.u >= dims[1] || p.v < 0 || p.v >= dims[2])
      throw LogError("patch out of range at tick " + std::to_string(e.tick));
    ++map.counts[map.index(p)];
  }
  return map;
}

HeatMap heatmap_average(const std::vector<HeatMap>& maps) {
  if (maps.empty()) throw LogError("cannot average an empty list of heat maps");
  HeatMap out;
  out.object_id = maps.front().object_id;
  out.dims = maps.front().dims;
  out.counts.assign(out.size(), 0);
  std::vector<double> mean(out.size(), 0.0);
  for (const auto& m : maps) {
    if (m.dims != out.dims || m.counts.size() != out.size()) throw LogError("heat map dimension mismatch");
    if (m.object_id != out.object_id) throw LogError("heat maps are for different objects");
    auto n = m.normalize();
    for (std::size_t i = 0; i < n.size(); ++i) {
      mean[i] += n[i];
      out.counts[i] += m.counts[i];
    }
  }
  for (double& v : mean) v /= static_cast<double>(maps.size());
  out.normalized = std::move(mean);
  return out;
}

json to_json(const HeatMap& map) {
  json j = {{"object", map.object_id}, {"dims", map.dims}, {"counts", map.counts}};
  if (map.normalized) j["normalized"] = *map.normalized;
  return j;
}

HeatMap heatmap_from_json(const json& j) {
  HeatMap m;
  try {
    m.object_id = j.at("object").get<std::string>();
    m.dims = j.at("dims").get<std::array<int, 3>>();
    m.counts = j.at("counts").get<std::vector<std::uint64_t>>();
    if (j.contains("normalized")) m.normalized = j["normalized"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw LogError(std::string("bad heat map: ") + e.what());
  }
  if (m.counts.size() != m.size() || (m.normalized && m.normalized->size() != m.size()))
    throw LogError("heat map counts do not match dims");
  return m;
}

std::vector<GraspContactEvent> contacts_for(const SessionLog& session, const std::string& object_id) {
  std::vector<GraspContactEvent> out;
  for (const auto& r : session.records())
    if (const auto* c = std::get_if<GraspContactEvent>(&r); c && c->object_id == object_id) out.push_back(*c);
  return out;
}

}  // namespace vrgym::datalog

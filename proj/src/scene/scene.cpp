#include "vrgym/scene.hpp"

#include <algorithm>
#include <cmath>

namespace vrgym {

using nlohmann::json;

double normalize_yaw(double yaw) {
  if (!std::isfinite(yaw)) throw SceneError("non-finite yaw");
  if (yaw >= -kPi && yaw < kPi) return yaw;
  double r = std::fmod(yaw + kPi, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  double out = r - kPi;
  if (out >= kPi) out -= 2.0 * kPi;
  return out;
}

bool boxes_overlap(const Box& a, const Box& b, double eps) {
  return a.min_x < b.max_x - eps && b.min_x < a.max_x - eps && a.min_y < b.max_y - eps &&
         b.min_y < a.max_y - eps;
}

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::wall: return "wall";
    case EntityKind::door: return "door";
    case EntityKind::object: return "object";
    case EntityKind::agent: return "agent";
  }
  return "object";
}

EntityKind entity_kind_from_string(std::string_view s) {
  if (s == "wall") return EntityKind::wall;
  if (s == "door") return EntityKind::door;
  if (s == "object") return EntityKind::object;
  if (s == "agent") return EntityKind::agent;
  throw SceneError("unknown entity kind '" + std::string(s) + "'");
}

namespace {
constexpr std::pair<Verb, std::string_view> kVerbNames[] = {
    {Verb::push_door, "push_door"}, {Verb::twist_door, "twist_door"},
    {Verb::press_button, "press_button"}, {Verb::pour, "pour"},
    {Verb::grasp, "grasp"}, {Verb::release, "release"},
    {Verb::wave, "wave"}, {Verb::stretch, "stretch"},
};
}  // namespace

std::string_view to_string(Verb verb) {
  for (auto [v, name] : kVerbNames)
    if (v == verb) return name;
  return "wave";
}

Verb verb_from_string(std::string_view s) {
  for (auto [v, name] : kVerbNames)
    if (name == s) return v;
  throw SceneError("unknown verb '" + std::string(s) + "'");
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::ok: return "ok";
    case Outcome::blocked: return "blocked";
    case Outcome::out_of_range: return "out_of_range";
  }
  return "ok";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "ok") return Outcome::ok;
  if (s == "blocked") return Outcome::blocked;
  if (s == "out_of_range") return Outcome::out_of_range;
  throw SceneError("unknown outcome '" + std::string(s) + "'");
}

bool fluent_equals(const FluentValue& a, const FluentValue& b) {
  if (a.index() != b.index()) return false;
  if (auto* sa = std::get_if<ScalarFluent>(&a)) return sa->value == std::get<ScalarFluent>(b).value;
  return a == b;
}

bool Entity::is_closed_door() const {
  if (kind != EntityKind::door) return false;
  auto it = fluents.find("open");
  if (it == fluents.end()) return true;
  auto* open = std::get_if<bool>(&it->second);
  return !open || !*open;
}

bool Entity::blocks_motion() const {
  return kind == EntityKind::wall || kind == EntityKind::agent || is_closed_door();
}

const Entity& SceneGraph::at(const std::string& id) const {
  auto it = entities.find(id);
  if (it == entities.end()) throw SceneError("unknown entity '" + id + "'");
  return it->second;
}

Entity& SceneGraph::at(const std::string& id) {
  auto it = entities.find(id);
  if (it == entities.end()) throw SceneError("unknown entity '" + id + "'");
  return it->second;
}

const Entity* SceneGraph::find(const std::string& id) const {
  auto it = entities.find(id);
  return it == entities.end() ? nullptr : &it->second;
}

std::optional<std::string> SceneGraph::held_by(const std::string& agent_id) const {
  for (const auto& [id, e] : entities)
    if (e.attached_to && *e.attached_to == agent_id) return id;
  return std::nullopt;
}

std::vector<std::string> SceneGraph::agent_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, e] : entities)
    if (e.kind == EntityKind::agent) out.push_back(id);
  return out;
}

std::pair<int, int> OccupancyGrid::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor((x - origin_x) / resolution)),
          static_cast<int>(std::floor((y - origin_y) / resolution))};
}

std::size_t OccupancyGrid::count_free() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), Cell::free));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json bound_to_json(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

double bound_from_json(const json& j, double inf) {
  if (j.is_null()) return inf;
  return j.get<double>();
}

json pose_to_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}}; }

Pose pose_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.value("yaw", 0.0)};
}

json fluents_to_json(const std::map<std::string, FluentValue>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = to_json(v);
  return out;
}

std::map<std::string, FluentValue> fluents_from_json(const json& j, const std::string& path) {
  std::map<std::string, FluentValue> out;
  if (!j.is_object()) throw SceneError(path + ": expected object");
  for (const auto& [k, v] : j.items()) out[k] = fluent_from_json(v, path + "." + k);
  return out;
}

json rule_to_json(const TransitionRule& r) {
  json j = {{"verb", r.verb}, {"pre", fluents_to_json(r.pre)}, {"post", fluents_to_json(r.post)}};
  if (r.target_kind) j["target_kind"] = std::string(to_string(*r.target_kind));
  if (r.owner) j["owner"] = *r.owner;
  return j;
}

TransitionRule rule_from_json(const json& j) {
  TransitionRule r;
  r.verb = j.at("verb").get<std::string>();
  if (j.contains("target_kind")) r.target_kind = entity_kind_from_string(j["target_kind"].get<std::string>());
  if (j.contains("owner")) r.owner = j["owner"].get<std::string>();
  r.pre = fluents_from_json(j.value("pre", json::object()), "pre");
  r.post = fluents_from_json(j.value("post", json::object()), "post");
  return r;
}

}  // namespace

json to_json(const FluentValue& value) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ScalarFluent>) {
          if (std::isinf(v.lo) && std::isinf(v.hi)) return v.value;
          return {{"value", v.value}, {"range", {bound_to_json(v.lo), bound_to_json(v.hi)}}};
        } else {
          return v;
        }
      },
      value);
}

FluentValue fluent_from_json(const json& j, const std::string& path) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return ScalarFluent{j.get<double>(), -inf, inf};
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("value")) {
    ScalarFluent s{j["value"].get<double>(), -inf, inf};
    if (j.contains("range")) {
      const auto& r = j["range"];
      if (!r.is_array() || r.size() != 2) throw SceneError(path + ".range: expected [lo, hi]");
      s.lo = bound_from_json(r[0], -inf);
      s.hi = bound_from_json(r[1], inf);
      if (s.lo > s.hi) throw SceneError(path + ".range: lo > hi");
      if (s.value < s.lo || s.value > s.hi) throw SceneError(path + ": value outside range");
    }
    return s;
  }
  throw SceneError(path + ": unsupported fluent value");
}

json to_json(const SceneGraph& scene) {
  json ents = json::array();
  for (const auto& [id, e] : scene.entities) {
    json je = {{"id", e.id},
               {"kind", std::string(to_string(e.kind))},
               {"pose", pose_to_json(e.pose)},
               {"half_extents", {e.half_extents.x, e.half_extents.y}},
               {"fluents", fluents_to_json(e.fluents)}};
    if (e.attached_to) je["attached_to"] = *e.attached_to;
    if (e.attach_offset) je["attach_offset"] = pose_to_json(*e.attach_offset);
    ents.push_back(std::move(je));
  }
  json rules = json::array();
  for (const auto& r : scene.rules) rules.push_back(rule_to_json(r));
  return {{"tick", scene.tick},
          {"time", scene.time()},
          {"rng_seed", scene.rng_seed},
          {"cell_size", scene.cell_size},
          {"limits",
           {{"v_max", scene.limits.v_max},
            {"omega_max", scene.limits.omega_max},
            {"reach", scene.limits.reach}}},
          {"entities", std::move(ents)},
          {"rules", std::move(rules)}};
}

SceneGraph scene_from_json(const json& j) {
  try {
    SceneGraph s;
    s.tick = j.at("tick").get<std::int64_t>();
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    s.cell_size = j.value("cell_size", 1.0);
    if (j.contains("limits")) {
      const auto& l = j["limits"];
      s.limits = {l.at("v_max").get<double>(), l.at("omega_max").get<double>(),
                  l.at("reach").get<double>()};
    }
    for (const auto& je : j.at("entities")) {
      Entity e;
      e.id = je.at("id").get<std::string>();
      e.kind = entity_kind_from_string(je.at("kind").get<std::string>());
      e.pose = pose_from_json(je.at("pose"));
      e.half_extents = {je.at("half_extents")[0].get<double>(), je.at("half_extents")[1].get<double>()};
      e.fluents = fluents_from_json(je.value("fluents", json::object()), "fluents");
      if (je.contains("attached_to")) e.attached_to = je["attached_to"].get<std::string>();
      if (je.contains("attach_offset")) e.attach_offset = pose_from_json(je["attach_offset"]);
      s.entities.emplace(e.id, std::move(e));
    }
    for (const auto& jr : j.value("rules", json::array())) s.rules.push_back(rule_from_json(jr));
    return s;
  } catch (const json::exception& e) {
    throw SceneError(std::string("invalid scene snapshot: ") + e.what());
  }
}

json to_json(const ActionEvent& ev) {
  json j = {{"t", ev.tick},
            {"kind", "action"},
            {"agent", ev.agent_id},
            {"verb", std::string(to_string(ev.verb))},
            {"outcome", std::string(to_string(ev.outcome))}};
  if (ev.target_id) j["target"] = *ev.target_id;
  if (ev.contact) j["patch"] = {ev.contact->face, ev.contact->u, ev.contact->v};
  return j;
}

json to_json(const CollisionEvent& ev) {
  return {{"t", ev.tick}, {"kind", "collision"}, {"agent", ev.agent_id}, {"obstacle", ev.obstacle_id}};
}

json to_json(const SceneEvent& event) {
  return std::visit([](const auto& e) { return to_json(e); }, event);
}

}  // namespace vrgym

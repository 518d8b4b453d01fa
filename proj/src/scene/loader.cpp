#include <cmath>
#include <cstdio>

#include "vrgym/scene.hpp"

namespace vrgym {

using nlohmann::json;

namespace {

std::string cell_id(const char* prefix, int row, int col) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%03d_%03d", prefix, row, col);
  return buf;
}

std::string unique_id(const SceneGraph& scene, const std::string& base) {
  if (!scene.find(base)) return base;
  for (int n = 2;; ++n) {
    std::string id = base + "_" + std::to_string(n);
    if (!scene.find(id)) return id;
  }
}

std::map<std::string, FluentValue> door_fluents(bool open) {
  return {{"angle", ScalarFluent{open ? kPi / 2 : 0.0, 0.0, kPi / 2}}, {"open", open}};
}

void add_default_rules(SceneGraph& scene) {
  auto rule = [](std::string verb, EntityKind kind, std::map<std::string, FluentValue> pre,
                 std::map<std::string, FluentValue> post) {
    return TransitionRule{std::move(verb), kind, std::move(pre), std::move(post), std::nullopt};
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const char* verb : {"push_door", "twist_door"})
    scene.rules.push_back(rule(verb, EntityKind::door, {{"open", false}},
                               {{"open", true}, {"angle", ScalarFluent{kPi / 2, -inf, inf}}}));
  scene.rules.push_back(rule("press_button", EntityKind::object, {{"on", false}}, {{"on", true}}));
  scene.rules.push_back(rule("press_button", EntityKind::object, {{"on", true}}, {{"on", false}}));
  scene.rules.push_back(rule("pour", EntityKind::object, {{"held.filled", true}}, {{"filled", true}}));
}

// Tracks the JSON path of the value being read so errors can name the field.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& value() const { return j_; }
  const std::string& path() const { return path_; }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected object");
    auto it = j_.find(key);
    if (it == j_.end()) throw SceneError(path_ + "." + key + ": missing field");
    return {*it, path_ + "." + key};
  }
  Reader at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  double number() const {
    if (!j_.is_number()) fail("expected number");
    double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected finite number");
    return v;
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected string");
    return j_.get<std::string>();
  }
  void require_array() const {
    if (!j_.is_array()) fail("expected array");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw SceneError(path_ + ": " + msg); }

 private:
  const json& j_;
  std::string path_;
};

TransitionRule read_rule(const Reader& r) {
  TransitionRule rule;
  rule.verb = r.at("verb").string();
  verb_from_string(rule.verb);
  if (r.has("target_kind")) rule.target_kind = entity_kind_from_string(r.at("target_kind").string());
  if (r.has("pre")) {
    for (const auto& [k, v] : r.at("pre").value().items())
      rule.pre[k] = fluent_from_json(v, r.path() + ".pre." + k);
  }
  if (r.has("post")) {
    for (const auto& [k, v] : r.at("post").value().items())
      rule.post[k] = fluent_from_json(v, r.path() + ".post." + k);
  }
  return rule;
}

Entity read_entity(const Reader& r) {
  Entity e;
  e.id = r.at("id").string();
  if (e.id.empty()) r.at("id").fail("empty id");
  try {
    e.kind = entity_kind_from_string(r.at("kind").string());
  } catch (const SceneError& err) {
    r.at("kind").fail(err.what());
  }
  if (r.has("pose")) {
    Reader p = r.at("pose");
    e.pose.x = p.at("x").number();
    e.pose.y = p.at("y").number();
    e.pose.yaw = p.has("yaw") ? normalize_yaw(p.at("yaw").number()) : 0.0;
  }
  Reader he = r.at("half_extents");
  he.require_array();
  if (he.value().size() != 2) he.fail("expected [hx, hy]");
  e.half_extents = {he.at(std::size_t{0}).number(), he.at(std::size_t{1}).number()};
  if (e.half_extents.x <= 0 || e.half_extents.y <= 0) he.fail("half extents must be positive");
  if (r.has("fluents")) {
    Reader f = r.at("fluents");
    if (!f.value().is_object()) f.fail("expected object");
    for (const auto& [k, v] : f.value().items()) e.fluents[k] = fluent_from_json(v, f.path() + "." + k);
  }
  if (e.kind == EntityKind::door) {
    auto it = e.fluents.find("open");
    bool open = it != e.fluents.end() && std::holds_alternative<bool>(it->second) &&
                std::get<bool>(it->second);
    auto defaults = door_fluents(open);
    for (auto& [k, v] : defaults) e.fluents.try_emplace(k, v);
  }
  if (r.has("attached_to")) {
    if (e.kind != EntityKind::object) r.at("attached_to").fail("only objects can be attached");
    e.attached_to = r.at("attached_to").string();
  }
  return e;
}

void add_entity(SceneGraph& scene, Entity e) {
  std::string id = e.id;
  if (!scene.entities.emplace(id, std::move(e)).second)
    throw SceneError("duplicate entity id '" + id + "'");
}

void validate(SceneGraph& scene) {
  std::vector<const Entity*> solid;
  for (const auto& [id, e] : scene.entities) {
    if (e.kind == EntityKind::wall || e.kind == EntityKind::door || e.kind == EntityKind::agent)
      solid.push_back(&e);
  }
  for (std::size_t i = 0; i < solid.size(); ++i) {
    for (std::size_t j = i + 1; j < solid.size(); ++j) {
      const Entity& a = *solid[i];
      const Entity& b = *solid[j];
      if (!boxes_overlap(a.box(), b.box())) continue;
      bool a_static = a.kind != EntityKind::agent;
      bool b_static = b.kind != EntityKind::agent;
      if (a_static && b_static)
        throw SceneError("static overlap between '" + a.id + "' and '" + b.id + "'");
      throw SceneError("agent overlap between '" + a.id + "' and '" + b.id + "'");
    }
  }
  for (auto& [id, e] : scene.entities) {
    if (!e.attached_to) continue;
    const Entity* holder = scene.find(*e.attached_to);
    if (!holder || holder->kind != EntityKind::agent)
      throw SceneError("entity '" + id + "' attached to unknown agent '" + *e.attached_to + "'");
    double c = std::cos(-holder->pose.yaw), s = std::sin(-holder->pose.yaw);
    double dx = e.pose.x - holder->pose.x, dy = e.pose.y - holder->pose.y;
    e.attach_offset = Pose{c * dx - s * dy, s * dx + c * dy, normalize_yaw(e.pose.yaw - holder->pose.yaw)};
  }
  for (const auto& [id, e] : scene.entities) {
    if (!e.attached_to) continue;
    for (const auto& [id2, e2] : scene.entities)
      if (id2 < id && e2.attached_to == e.attached_to)
        throw SceneError("agent '" + *e.attached_to + "' holds more than one object");
  }
}

std::string describe_parse_error(std::string_view doc, const json::parse_error& err) {
  std::size_t byte = err.byte == 0 ? 0 : err.byte - 1;
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
         err.what();
}

}  // namespace

SceneGraph scene_from_ascii(const std::vector<std::string>& rows, double cell_size) {
  if (!(cell_size > 0)) throw SceneError("cell_size must be positive");
  SceneGraph scene;
  scene.cell_size = cell_size;
  const int n_rows = static_cast<int>(rows.size());
  const double half = cell_size / 2;
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < static_cast<int>(rows[r].size()); ++c) {
      char ch = rows[r][c];
      Pose center{(c + 0.5) * cell_size, (n_rows - 1 - r + 0.5) * cell_size, 0.0};
      Entity e;
      e.pose = center;
      switch (ch) {
        case '.':
        case ' ':
          continue;
        case '#':
          e.id = cell_id("wall", r, c);
          e.kind = EntityKind::wall;
          e.half_extents = {half, half};
          break;
        case 'D':
          e.id = cell_id("door", r, c);
          e.kind = EntityKind::door;
          e.half_extents = {half, half};
          e.fluents = door_fluents(false);
          break;
        case 'A':
          e.id = unique_id(scene, "agent");
          e.kind = EntityKind::agent;
          e.half_extents = {0.25 * cell_size, 0.25 * cell_size};
          break;
        case 'G':
          e.id = unique_id(scene, "goal");
          e.kind = EntityKind::object;
          e.half_extents = {half, half};
          e.fluents["marker"] = std::string("goal");
          break;
        default:
          if (ch >= 'a' && ch <= 'z') {
            e.id = unique_id(scene, std::string(1, ch));
            e.kind = EntityKind::object;
            e.half_extents = {0.15 * cell_size, 0.15 * cell_size};
            break;
          }
          throw SceneError("ascii[" + std::to_string(r) + "][" + std::to_string(c) +
                           "]: unknown map character '" + std::string(1, ch) + "'");
      }
      add_entity(scene, std::move(e));
    }
  }
  add_default_rules(scene);
  validate(scene);
  return scene;
}

SceneGraph load_scene(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& err) {
    throw SceneError(describe_parse_error(document, err));
  }
  Reader root(doc, "$");
  if (!doc.is_object()) root.fail("expected object");
  double cell_size = root.has("cell_size") ? root.at("cell_size").number() : 1.0;
  if (!(cell_size > 0)) root.at("cell_size").fail("must be positive");

  SceneGraph scene;
  scene.cell_size = cell_size;
  if (root.has("ascii")) {
    Reader a = root.at("ascii");
    a.require_array();
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < a.value().size(); ++i) rows.push_back(a.at(i).string());
    scene = scene_from_ascii(rows, cell_size);
  }
  std::vector<TransitionRule> doc_rules;
  if (root.has("seed")) scene.rng_seed = root.at("seed").value().get<std::uint64_t>();
  if (root.has("limits")) {
    Reader l = root.at("limits");
    if (l.has("v_max")) scene.limits.v_max = l.at("v_max").number();
    if (l.has("omega_max")) scene.limits.omega_max = l.at("omega_max").number();
    if (l.has("reach")) scene.limits.reach = l.at("reach").number();
  }
  if (root.has("entities")) {
    Reader ents = root.at("entities");
    ents.require_array();
    for (std::size_t i = 0; i < ents.value().size(); ++i) {
      Reader er = ents.at(i);
      Entity e = read_entity(er);
      if (er.has("transitions")) {
        Reader tr = er.at("transitions");
        tr.require_array();
        for (std::size_t k = 0; k < tr.value().size(); ++k) {
          TransitionRule rule = read_rule(tr.at(k));
          rule.owner = e.id;
          doc_rules.push_back(std::move(rule));
        }
      }
      add_entity(scene, std::move(e));
    }
  }
  if (root.has("transitions")) {
    Reader tr = root.at("transitions");
    tr.require_array();
    for (std::size_t k = 0; k < tr.value().size(); ++k) doc_rules.push_back(read_rule(tr.at(k)));
  }
  if (!root.has("ascii")) add_default_rules(scene);
  // Document rules take precedence over the defaults.
  doc_rules.insert(doc_rules.end(), scene.rules.begin(), scene.rules.end());
  scene.rules = std::move(doc_rules);
  validate(scene);
  scene.tick = 0;
  return scene;
}

}  // namespace vrgym

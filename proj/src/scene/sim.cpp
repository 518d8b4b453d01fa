#include <algorithm>
#include <cmath>
#include <set>

#include "vrgym/scene.hpp"

namespace vrgym {

namespace {

constexpr double kContactEps = 1e-9;

Pose compose(const Pose& frame, const Pose& local) {
  double c = std::cos(frame.yaw), s = std::sin(frame.yaw);
  return {frame.x + c * local.x - s * local.y, frame.y + s * local.x + c * local.y,
          normalize_yaw(frame.yaw + local.yaw)};
}

Pose relative(const Pose& frame, const Pose& world) {
  double c = std::cos(-frame.yaw), s = std::sin(-frame.yaw);
  double dx = world.x - frame.x, dy = world.y - frame.y;
  return {c * dx - s * dy, s * dx + c * dy, normalize_yaw(world.yaw - frame.yaw)};
}

double distance_to_box(const Box& b, double x, double y) {
  double dx = std::max({b.min_x - x, 0.0, x - b.max_x});
  double dy = std::max({b.min_y - y, 0.0, y - b.max_y});
  return std::hypot(dx, dy);
}

struct Blocker {
  double limit;
  const Entity* obstacle;
};

// Sweeps `agent` along one axis by `delta`, stopping at the first obstacle
// face. Returns the travelled distance and the blocking obstacle, if any.
Blocker sweep_axis(const SceneGraph& scene, const Entity& agent, bool along_x, double delta) {
  Blocker best{std::abs(delta), nullptr};
  if (delta == 0.0) return best;
  const Box a = agent.box();
  for (const auto& [id, e] : scene.entities) {
    if (&e == &agent || !e.blocks_motion()) continue;
    const Box b = e.box();
    double gap;
    if (along_x) {
      if (!(a.min_y < b.max_y - kContactEps && b.min_y < a.max_y - kContactEps)) continue;
      if (delta > 0) {
        if (b.min_x < a.max_x - kContactEps) continue;
        gap = b.min_x - a.max_x;
      } else {
        if (b.max_x > a.min_x + kContactEps) continue;
        gap = a.min_x - b.max_x;
      }
    } else {
      if (!(a.min_x < b.max_x - kContactEps && b.min_x < a.max_x - kContactEps)) continue;
      if (delta > 0) {
        if (b.min_y < a.max_y - kContactEps) continue;
        gap = b.min_y - a.max_y;
      } else {
        if (b.max_y > a.min_y + kContactEps) continue;
        gap = a.min_y - b.max_y;
      }
    }
    gap = std::max(gap, 0.0);
    if (gap < best.limit) best = {gap, &e};
  }
  return best;
}

void move_axis(SceneGraph& scene, Entity& agent, bool along_x, double delta,
               std::vector<std::string>& hits) {
  Blocker b = sweep_axis(scene, agent, along_x, delta);
  if (!b.obstacle) {
    (along_x ? agent.pose.x : agent.pose.y) += delta;
    return;
  }
  // Place the agent exactly in contact with the blocking face.
  const Box ob = b.obstacle->box();
  if (along_x)
    agent.pose.x = delta > 0 ? ob.min_x - agent.half_extents.x : ob.max_x + agent.half_extents.x;
  else
    agent.pose.y = delta > 0 ? ob.min_y - agent.half_extents.y : ob.max_y + agent.half_extents.y;
  if (std::find(hits.begin(), hits.end(), b.obstacle->id) == hits.end()) hits.push_back(b.obstacle->id);
}

void follow_holder(SceneGraph& scene, const Entity& agent) {
  for (auto& [id, e] : scene.entities) {
    if (e.attached_to && *e.attached_to == agent.id && e.attach_offset)
      e.pose = compose(agent.pose, *e.attach_offset);
  }
}

Entity& require_agent(SceneGraph& scene, const std::string& agent_id) {
  auto it = scene.entities.find(agent_id);
  if (it == scene.entities.end() || it->second.kind != EntityKind::agent)
    throw SceneError("unknown agent '" + agent_id + "'");
  return it->second;
}

bool verb_needs_target(Verb v) { return v != Verb::wave && v != Verb::stretch; }

bool rule_applies(const TransitionRule& rule, Verb verb, const Entity& target) {
  if (rule.verb != to_string(verb)) return false;
  if (rule.owner) return *rule.owner == target.id;
  return !rule.target_kind || *rule.target_kind == target.kind;
}

const FluentValue* lookup(const SceneGraph& scene, const Entity& target, const Entity* held,
                          const std::string& key) {
  const Entity* owner = &target;
  std::string name = key;
  if (key.rfind("held.", 0) == 0) {
    if (!held) return nullptr;
    owner = held;
    name = key.substr(5);
  }
  (void)scene;
  auto it = owner->fluents.find(name);
  return it == owner->fluents.end() ? nullptr : &it->second;
}

void assign(Entity& owner, const std::string& name, const FluentValue& value) {
  auto it = owner.fluents.find(name);
  if (it != owner.fluents.end()) {
    auto* cur = std::get_if<ScalarFluent>(&it->second);
    auto* next = std::get_if<ScalarFluent>(&value);
    if (cur && next) {
      cur->value = std::clamp(next->value, cur->lo, cur->hi);
      return;
    }
    it->second = value;
    return;
  }
  owner.fluents[name] = value;
}

ContactPatch contact_patch(const Entity& agent, const Entity& object, double grip_height) {
  double dx = agent.pose.x - object.pose.x;
  double dy = agent.pose.y - object.pose.y;
  const double hx = object.half_extents.x, hy = object.half_extents.y;
  auto bin = [](double t) {
    t = std::clamp(t, 0.0, 1.0);
    return std::min(kPatchGrid - 1, static_cast<int>(std::floor(t * kPatchGrid)));
  };
  ContactPatch p;
  if (std::abs(dx) * hy >= std::abs(dy) * hx) {
    p.face = dx >= 0 ? 0 : 2;
    p.u = bin((dy / hy + 1.0) / 2.0);
  } else {
    p.face = dy >= 0 ? 1 : 3;
    p.u = bin((dx / hx + 1.0) / 2.0);
  }
  p.v = bin(grip_height);
  return p;
}

void do_attach(SceneGraph&, Entity& agent, Entity& object) {
  object.attached_to = agent.id;
  object.attach_offset = relative(agent.pose, object.pose);
}

}  // namespace

std::vector<SceneEvent> advance(SceneGraph& scene, const std::vector<VelocityCommand>& commands,
                                const std::vector<ActionRequest>& actions) {
  std::map<std::string, VelocityCommand> by_agent;
  for (const auto& cmd : commands) {
    require_agent(scene, cmd.agent_id);
    if (!std::isfinite(cmd.v) || !std::isfinite(cmd.omega))
      throw SceneError("non-finite command for agent '" + cmd.agent_id + "'");
    auto [it, inserted] = by_agent.emplace(cmd.agent_id, cmd);
    if (!inserted && !(it->second == cmd))
      throw SceneError("conflicting commands for agent '" + cmd.agent_id + "'");
  }

  std::vector<SceneEvent> events;
  const std::int64_t tick = scene.tick + 1;
  for (const auto& [agent_id, cmd] : by_agent) {
    Entity& agent = scene.at(agent_id);
    const double v = std::clamp(cmd.v, -scene.limits.v_max, scene.limits.v_max);
    const double omega = std::clamp(cmd.omega, -scene.limits.omega_max, scene.limits.omega_max);
    std::vector<std::string> hits;
    move_axis(scene, agent, true, v * std::cos(agent.pose.yaw) * kDt, hits);
    move_axis(scene, agent, false, v * std::sin(agent.pose.yaw) * kDt, hits);
    agent.pose.yaw = normalize_yaw(agent.pose.yaw + omega * kDt);
    follow_holder(scene, agent);
    for (auto& obstacle : hits) events.emplace_back(CollisionEvent{tick, agent_id, std::move(obstacle)});
  }
  scene.tick = tick;
  for (const auto& req : actions) events.emplace_back(interact_in_place(scene, req));
  return events;
}

StepOutput step(const SceneGraph& scene, const std::vector<VelocityCommand>& commands,
                const std::vector<ActionRequest>& actions) {
  StepOutput out{scene, {}};
  out.events = advance(out.scene, commands, actions);
  return out;
}

ActionEvent interact_in_place(SceneGraph& scene, const ActionRequest& request) {
  Entity& agent = require_agent(scene, request.agent_id);
  ActionEvent ev{scene.tick, request.agent_id, request.verb, request.target_id, Outcome::ok, {}};
  if (!verb_needs_target(request.verb)) return ev;
  if (!request.target_id)
    throw SceneError(std::string(to_string(request.verb)) + " requires a target");
  Entity& target = scene.at(*request.target_id);
  if (&target == &agent) throw SceneError("agent cannot target itself");

  if (distance_to_box(target.box(), agent.pose.x, agent.pose.y) > scene.limits.reach &&
      !(target.attached_to && *target.attached_to == agent.id)) {
    ev.outcome = Outcome::out_of_range;
    return ev;
  }

  const auto held_id = scene.held_by(agent.id);
  Entity* held = held_id ? &scene.at(*held_id) : nullptr;

  if (request.verb == Verb::grasp) {
    if (target.kind != EntityKind::object)
      throw SceneError("grasp is inapplicable to " + std::string(to_string(target.kind)));
    if (held || target.attached_to) {
      ev.outcome = Outcome::blocked;
      return ev;
    }
    ev.contact = contact_patch(agent, target, request.grip_height);
    do_attach(scene, agent, target);
    return ev;
  }
  if (request.verb == Verb::release) {
    if (held != &target) {
      ev.outcome = Outcome::blocked;
      return ev;
    }
    target.attached_to.reset();
    target.attach_offset.reset();
    return ev;
  }

  bool any_rule = false;
  for (const auto& rule : scene.rules) {
    if (!rule_applies(rule, request.verb, target)) continue;
    any_rule = true;
    bool ok = std::all_of(rule.pre.begin(), rule.pre.end(), [&](const auto& kv) {
      const FluentValue* cur = lookup(scene, target, held, kv.first);
      return cur && fluent_equals(*cur, kv.second);
    });
    if (!ok) continue;
    for (const auto& [key, value] : rule.post) {
      if (key.rfind("held.", 0) == 0) {
        if (held) assign(*held, key.substr(5), value);
      } else {
        assign(target, key, value);
      }
    }
    return ev;
  }
  if (!any_rule)
    throw SceneError(std::string(to_string(request.verb)) + " is inapplicable to '" + target.id + "'");
  ev.outcome = Outcome::blocked;
  return ev;
}

InteractOutput interact(const SceneGraph& scene, const ActionRequest& request) {
  InteractOutput out{scene, {}};
  out.event = interact_in_place(out.scene, request);
  return out;
}

SceneGraph grasp_attach(const SceneGraph& scene, const std::string& agent_id,
                        const std::string& object_id) {
  SceneGraph out = scene;
  Entity& agent = require_agent(out, agent_id);
  Entity& object = out.at(object_id);
  if (object.kind != EntityKind::object) throw SceneError("'" + object_id + "' is not an object");
  if (out.held_by(agent_id)) throw SceneError("hands full");
  if (object.attached_to) throw SceneError("'" + object_id + "' already attached to '" + *object.attached_to + "'");
  if (distance_to_box(object.box(), agent.pose.x, agent.pose.y) > out.limits.reach)
    throw SceneError("'" + object_id + "' out of reach");
  do_attach(out, agent, object);
  return out;
}

SceneGraph release(const SceneGraph& scene, const std::string& agent_id) {
  SceneGraph out = scene;
  require_agent(out, agent_id);
  auto held = out.held_by(agent_id);
  if (!held) throw SceneError("agent '" + agent_id + "' holds nothing");
  Entity& object = out.at(*held);
  object.attached_to.reset();
  object.attach_offset.reset();
  return out;
}

}  // namespace vrgym

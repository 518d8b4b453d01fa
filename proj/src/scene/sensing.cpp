#include <algorithm>
#include <cmath>

#include "vrgym/scene.hpp"

namespace vrgym {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SlabHit {
  double t_enter;
  double t_exit;
  bool enter_on_x;
};

SlabHit slab(const Box& b, double ox, double oy, double dx, double dy) {
  double tx0 = -kInf, tx1 = kInf, ty0 = -kInf, ty1 = kInf;
  if (dx != 0.0) {
    double a = (b.min_x - ox) / dx, c = (b.max_x - ox) / dx;
    tx0 = std::min(a, c);
    tx1 = std::max(a, c);
  } else if (ox < b.min_x || ox > b.max_x) {
    return {kInf, -kInf, true};
  }
  if (dy != 0.0) {
    double a = (b.min_y - oy) / dy, c = (b.max_y - oy) / dy;
    ty0 = std::min(a, c);
    ty1 = std::max(a, c);
  } else if (oy < b.min_y || oy > b.max_y) {
    return {kInf, -kInf, true};
  }
  return {std::max(tx0, ty0), std::min(tx1, ty1), tx0 >= ty0};
}

}  // namespace

DepthScan render_first_person(const SceneGraph& scene, const std::string& agent_id, int n_rays,
                              double fov) {
  const Entity* agent = scene.find(agent_id);
  if (!agent || agent->kind != EntityKind::agent) throw SceneError("unknown agent '" + agent_id + "'");
  if (n_rays < 1) throw SceneError("n_rays must be at least 1");
  if (!(fov > 0.0 && fov <= 2.0 * kPi) && !(n_rays == 1 && fov == 0.0))
    throw SceneError("fov must lie in (0, 2*pi]");

  DepthScan scan;
  scan.n_rays = n_rays;
  scan.fov = fov;
  scan.depth.assign(n_rays, kInf);
  scan.label.assign(n_rays, std::nullopt);
  scan.normal.assign(n_rays, Vec2{});

  const double ox = agent->pose.x, oy = agent->pose.y;
  const Box self = agent->box();
  std::vector<const Entity*> targets;
  for (const auto& [id, e] : scene.entities) {
    if (&e == agent) continue;
    if (e.attached_to && *e.attached_to == agent_id) continue;
    if (e.kind == EntityKind::door && !e.is_closed_door()) continue;
    if (e.box().contains(ox, oy)) continue;
    targets.push_back(&e);
  }

  for (int i = 0; i < n_rays; ++i) {
    double angle = n_rays == 1 ? agent->pose.yaw
                               : agent->pose.yaw - fov / 2 + i * fov / (n_rays - 1);
    double dx = std::cos(angle), dy = std::sin(angle);
    // Depth is measured from where the ray leaves the agent's own box.
    double self_exit = slab(self, ox, oy, dx, dy).t_exit;
    double best = kInf;
    for (const Entity* e : targets) {
      SlabHit h = slab(e->box(), ox, oy, dx, dy);
      if (h.t_enter > h.t_exit || h.t_enter < 0.0) continue;
      if (h.t_enter < best) {
        best = h.t_enter;
        scan.label[i] = e->id;
        scan.normal[i] = h.enter_on_x ? Vec2{dx > 0 ? -1.0 : 1.0, 0.0} : Vec2{0.0, dy > 0 ? -1.0 : 1.0};
      }
    }
    if (scan.label[i]) scan.depth[i] = std::max(0.0, best - self_exit);
  }
  return scan;
}

std::optional<Box> static_bounds(const SceneGraph& scene) {
  std::optional<Box> out;
  for (const auto& [id, e] : scene.entities) {
    if (e.kind != EntityKind::wall && e.kind != EntityKind::door) continue;
    Box b = e.box();
    if (!out) {
      out = b;
    } else {
      out->min_x = std::min(out->min_x, b.min_x);
      out->min_y = std::min(out->min_y, b.min_y);
      out->max_x = std::max(out->max_x, b.max_x);
      out->max_y = std::max(out->max_y, b.max_y);
    }
  }
  return out;
}

OccupancyGrid occupancy_grid(const SceneGraph& scene, double resolution, std::optional<Box> bounds) {
  if (!(resolution > 0.0)) throw SceneError("resolution must be positive");
  OccupancyGrid grid;
  grid.resolution = resolution;
  if (!bounds) bounds = static_bounds(scene);
  if (!bounds) return grid;
  grid.origin_x = bounds->min_x;
  grid.origin_y = bounds->min_y;
  grid.width = static_cast<int>(std::ceil((bounds->max_x - bounds->min_x) / resolution - 1e-9));
  grid.height = static_cast<int>(std::ceil((bounds->max_y - bounds->min_y) / resolution - 1e-9));
  grid.width = std::max(grid.width, 0);
  grid.height = std::max(grid.height, 0);
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, Cell::free);

  for (const auto& [id, e] : scene.entities) {
    if (e.kind != EntityKind::wall && !e.is_closed_door()) continue;
    const Box b = e.box();
    int c0 = std::max(0, static_cast<int>(std::floor((b.min_x - grid.origin_x) / resolution)));
    int c1 = std::min(grid.width - 1, static_cast<int>(std::floor((b.max_x - grid.origin_x) / resolution)));
    int r0 = std::max(0, static_cast<int>(std::floor((b.min_y - grid.origin_y) / resolution)));
    int r1 = std::min(grid.height - 1, static_cast<int>(std::floor((b.max_y - grid.origin_y) / resolution)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        Box cell{grid.origin_x + c * resolution, grid.origin_y + r * resolution,
                 grid.origin_x + (c + 1) * resolution, grid.origin_y + (r + 1) * resolution};
        if (boxes_overlap(cell, b)) grid.cells[grid.index(c, r)] = Cell::blocked;
      }
    }
  }
  return grid;
}

}  // namespace vrgym

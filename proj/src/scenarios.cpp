#include "hyloc/scenarios.hpp"

#include <cmath>

#include "hyloc/errors.hpp"

namespace hyloc {

Rect standard_bounds() { return {0.0, 0.0, 20.0, 14.0}; }

std::vector<Anchor> standard_anchors() {
  return {{1, {0.5, 0.5}}, {2, {19.5, 0.5}}, {3, {19.5, 13.5}}, {4, {0.5, 13.5}}, {5, {10.0, 12.0}}};
}

namespace {

std::vector<Rect> mixed_occluders() {
  return {
      {4.0, 5.0, 5.0, 9.0},     // pillar, west
      {15.0, 4.0, 16.0, 8.0},   // pillar, east
      {8.0, 3.0, 12.0, 3.4},    // low partition
      {9.0, 8.5, 11.0, 9.0},    // partition below anchor 5
      {13.0, 10.5, 13.4, 13.5}, // stub wall, north
      {1.5, 2.5, 3.5, 2.9},     // stub wall, south-west
  };
}

bool inside_any(Position2D p, const std::vector<Rect>& rects, double pad) {
  for (const auto& r : rects)
    if (p.x >= r.x0 - pad && p.x <= r.x1 + pad && p.y >= r.y0 - pad && p.y <= r.y1 + pad) return true;
  return false;
}

bool segment_clear(Position2D a, Position2D b, const std::vector<Rect>& rects, double pad) {
  const int n = static_cast<int>(std::ceil(distance(a, b) / 0.05)) + 1;
  for (int i = 0; i <= n; ++i)
    if (inside_any(a + (static_cast<double>(i) / n) * (b - a), rects, pad)) return false;
  return true;
}

}  // namespace

WaypointsShape clear_waypoints(const Rect& bounds, const std::vector<Rect>& occluders, int count, double margin,
                               std::uint64_t seed) {
  constexpr double kPad = 0.3;
  auto rng = RngStream::named(seed, "scenario/waypoints");
  const double wx = bounds.x1 - bounds.x0 - 2.0 * margin;
  const double wy = bounds.y1 - bounds.y0 - 2.0 * margin;
  auto draw = [&] { return Position2D{bounds.x0 + margin + wx * rng.next_uniform(), bounds.y0 + margin + wy * rng.next_uniform()}; };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    WaypointsShape w;
    w.closed = true;
    int tries = 0;
    while (static_cast<int>(w.points.size()) < count && tries++ < 10000) {
      const Position2D p = draw();
      if (inside_any(p, occluders, kPad)) continue;
      if (!w.points.empty() && !segment_clear(w.points.back(), p, occluders, kPad)) continue;
      w.points.push_back(p);
    }
    if (static_cast<int>(w.points.size()) == count && segment_clear(w.points.back(), w.points.front(), occluders, kPad))
      return w;
  }
  throw ValidationError("could not place a clear waypoint loop");
}

namespace {

ScenarioConfig base(const std::string& name, std::uint64_t seed, double duration) {
  ScenarioConfig c;
  c.name = name;
  c.seed = seed;
  c.environment.bounds = standard_bounds();
  c.anchors = standard_anchors();
  c.speed = 1.0;
  c.duration = duration;
  return c;
}

ScenarioConfig finish(ScenarioConfig c, double margin = 1.0) {
  c.shape = clear_waypoints(c.environment.bounds, c.environment.occluders, 12, margin, c.seed);
  return c;
}

}  // namespace

ScenarioConfig preset_scenario(const std::string& name, std::uint64_t seed, double duration) {
  if (name == "calibration_los") return finish(base(name, seed, duration));
  if (name == "calibration_nlos") {
    auto c = base(name, seed, duration);
    for (const auto& a : c.anchors)
      c.environment.occluders.push_back({a.position.x - 0.5, a.position.y - 0.5, a.position.x + 0.5, a.position.y + 0.5});
    return finish(c);
  }
  if (name == "mixed") {
    auto c = base(name, seed, duration);
    c.environment.occluders = mixed_occluders();
    return finish(c);
  }
  if (name == "practical") {
    auto c = base(name, seed, duration);
    c.environment.occluders = mixed_occluders();
    // Enclosed NLoS zone in the north-east.
    c.environment.occluders.push_back({13.0, 12.6, 18.5, 13.0});
    c.environment.occluders.push_back({18.6, 9.0, 19.0, 13.0});
    c.environment.dim_zones.push_back({{2.0, 1.0, 9.0, 6.0}, kDimKeypointScale});
    return finish(c);
  }
  if (name == "drift") {
    auto c = base(name, seed, duration);
    c.noise.vo_theta_sigma0 = 0.02;
    return finish(c);
  }
  if (name == "family_b") {
    auto c = base(name, seed, duration);
    c.anchors = {{1, {0.5, 7.0}}, {2, {10.0, 0.5}}, {3, {19.5, 3.0}}, {4, {19.5, 13.5}}, {5, {6.0, 13.5}}};
    c.environment.occluders = {
        {6.0, 2.0, 7.0, 6.0},
        {12.0, 9.0, 16.0, 9.4},
        {13.0, 3.0, 14.0, 6.0},
        {3.0, 9.0, 4.0, 11.0},
    };
    c.environment.dim_zones.push_back({{11.0, 8.0, 18.0, 13.0}, kDimKeypointScale});
    return finish(c);
  }
  throw ArgumentError("unknown scenario preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"calibration_los", "calibration_nlos", "mixed", "practical", "drift", "family_b"};
}

}  // namespace hyloc

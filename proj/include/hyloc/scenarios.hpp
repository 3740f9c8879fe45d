#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyloc/world_sim.hpp"

namespace hyloc {

/// 20 x 14 m room with anchors 1-4 in the corners (0.5 m inset) and anchor 5
/// at (10, 12).
Rect standard_bounds();
std::vector<Anchor> standard_anchors();

/// Keypoint scale of a dim-lit zone (252 of 568 matches).
inline constexpr double kDimKeypointScale = 252.0 / 568.0;

/// Built-in scenarios:
///  - calibration_los: open room, every anchor in LoS.
///  - calibration_nlos: a 1 x 1 m box around every anchor, all NLoS.
///  - mixed: partitions and pillars so that usually one or two anchors are NLoS.
///  - practical: mixed plus a dim-lit zone and an enclosed NLoS zone.
///  - drift: open room with strong VO heading noise on a long loop.
///  - family_b: same room size, different anchor layout, occluders and dim zone.
/// Random-waypoint paths are drawn from the "scenario/waypoints" stream of
/// `seed`, which is also the simulation seed. Throws ArgumentError for an
/// unknown name.
ScenarioConfig preset_scenario(const std::string& name, std::uint64_t seed, double duration = 120.0);

std::vector<std::string> preset_names();

/// Closed random-waypoint loop of `count` points inside `bounds` (minus
/// `margin`) whose legs keep 0.3 m clear of every occluder. Draws from the
/// "scenario/waypoints" stream of `seed`.
WaypointsShape clear_waypoints(const Rect& bounds, const std::vector<Rect>& occluders, int count, double margin,
                               std::uint64_t seed);

}  // namespace hyloc

#pragma once

#include <array>
#include <span>
#include <vector>

#include "hyloc/core.hpp"

namespace hyloc {

/// Per-step translation r (>= 0) and heading change theta in (-pi, pi],
/// expressed in the body frame of the previous step.
struct PolarStep {
  double r = 0.0;
  double theta = 0.0;

  friend bool operator==(const PolarStep&, const PolarStep&) = default;
};

struct DeadReckonState {
  Position2D position;
  double heading = 0.0;  // accumulated, not wrapped
};

/// [r, theta, min(M, m_ref) / m_ref]
using VoFeature = std::array<double, 3>;

/// r = |cur - prev|, theta = wrap(atan2(d) - prev_heading); theta = 0 when r = 0.
PolarStep polar_step(Position2D prev, Position2D cur, double prev_heading);

/// Dead-reckoning: heading_k = heading_{k-1} + theta_k, then advance r_k along
/// heading_k. `times` gives one timestamp per output sample (origin first), so
/// it must hold steps.size() + 1 entries; when empty, times 0, 1, 2, ... are used.
Trajectory integrate_steps(const DeadReckonState& origin, std::span<const PolarStep> steps,
                           std::span<const double> times = {});

/// Applies one dead-reckoning step.
DeadReckonState advance(const DeadReckonState& s, const PolarStep& step);

/// Throws ArgumentError when m_ref <= 0.
VoFeature compose_vo_features(const PolarStep& step, int keypoints, int m_ref);

}  // namespace hyloc

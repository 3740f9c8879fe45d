#include "hyloc/vo_track.hpp"

#include <algorithm>
#include <cmath>

#include "hyloc/errors.hpp"

namespace hyloc {

PolarStep polar_step(Position2D prev, Position2D cur, double prev_heading) {
  const Position2D d = cur - prev;
  const double r = d.norm();
  if (r == 0.0) return {0.0, 0.0};
  return {r, wrap_angle(std::atan2(d.y, d.x) - prev_heading)};
}

DeadReckonState advance(const DeadReckonState& s, const PolarStep& step) {
  DeadReckonState next;
  next.heading = s.heading + step.theta;
  next.position = {s.position.x + step.r * std::cos(next.heading), s.position.y + step.r * std::sin(next.heading)};
  return next;
}

Trajectory integrate_steps(const DeadReckonState& origin, std::span<const PolarStep> steps,
                           std::span<const double> times) {
  if (!times.empty() && times.size() != steps.size() + 1)
    throw ArgumentError("integrate_steps: need one timestamp per output sample");
  auto time_at = [&](std::size_t i) { return times.empty() ? static_cast<double>(i) : times[i]; };

  std::vector<Trajectory::Sample> out;
  out.reserve(steps.size() + 1);
  out.push_back({time_at(0), origin.position});
  DeadReckonState s = origin;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    s = advance(s, steps[k]);
    out.push_back({time_at(k + 1), s.position});
  }
  return Trajectory(std::move(out));
}

VoFeature compose_vo_features(const PolarStep& step, int keypoints, int m_ref) {
  if (m_ref <= 0) throw ArgumentError("compose_vo_features: m_ref must be > 0");
  const double m = static_cast<double>(std::clamp(keypoints, 0, m_ref)) / m_ref;
  return {step.r, step.theta, m};
}

}  // namespace hyloc

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace hyloc {

struct Position2D {
  double x = 0.0;
  double y = 0.0;

  friend Position2D operator+(Position2D a, Position2D b) { return {a.x + b.x, a.y + b.y}; }
  friend Position2D operator-(Position2D a, Position2D b) { return {a.x - b.x, a.y - b.y}; }
  friend Position2D operator*(double s, Position2D a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Position2D&, const Position2D&) = default;

  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(Position2D a, Position2D b) { return (a - b).norm(); }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

template <class T>
struct TimedSample {
  double t = 0.0;
  T value{};

  friend bool operator==(const TimedSample&, const TimedSample&) = default;
};

/// Timestamped 2D path. Timestamps are finite, non-negative and strictly
/// increasing; a trajectory always holds at least one sample.
class Trajectory {
 public:
  using Sample = TimedSample<Position2D>;

  explicit Trajectory(std::vector<Sample> samples);

  std::span<const Sample> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const Sample& front() const { return samples_.front(); }
  const Sample& back() const { return samples_.back(); }
  double start_time() const { return samples_.front().t; }
  double end_time() const { return samples_.back().t; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Sample> samples_;
};

struct Anchor {
  int id = 0;
  Position2D position;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Fixed RF anchors: at least three, unique ids, not all collinear.
/// Anchors are kept sorted by id.
class AnchorLayout {
 public:
  explicit AnchorLayout(std::vector<Anchor> anchors);

  std::span<const Anchor> anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }
  const Anchor& operator[](std::size_t i) const { return anchors_[i]; }
  const Anchor& by_id(int id) const;
  std::size_t index_of(int id) const;

  friend bool operator==(const AnchorLayout&, const AnchorLayout&) = default;

 private:
  std::vector<Anchor> anchors_;
};

/// True when the points span less than a line (relative tolerance on the
/// smallest singular value of the centered coordinates).
bool collinear(std::span<const Position2D> points);

/// Linear interpolation at time t; throws RangeError outside [first.t, last.t].
Position2D interpolate_position(const Trajectory& traj, double t);

using PositionPair = std::pair<Position2D, Position2D>;

/// Pairs every sample of `a` lying inside b's time span with b interpolated at
/// that time. `tol` is reserved for a nearest-sample mode and currently unused.
std::vector<PositionPair> align_pairs(const Trajectory& a, const Trajectory& b, double tol = 0.0);

/// Same as align_pairs but also reports the timestamp of each pair.
std::vector<std::pair<double, PositionPair>> align_pairs_timed(const Trajectory& a,
                                                               const Trajectory& b);

}  // namespace hyloc

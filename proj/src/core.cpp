#include "hyloc/core.hpp"

#include <algorithm>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "hyloc/errors.hpp"

namespace hyloc {

Trajectory::Trajectory(std::vector<Sample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw ArgumentError("trajectory needs at least one sample");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.t) || s.t < 0.0) throw ArgumentError("trajectory timestamp must be finite and >= 0");
    if (!s.value.finite()) throw ArgumentError("trajectory position must be finite");
    if (i > 0 && !(s.t > samples_[i - 1].t))
      throw ArgumentError("trajectory timestamps must be strictly increasing (index " + std::to_string(i) + ")");
  }
}

bool collinear(std::span<const Position2D> points) {
  if (points.size() < 3) return true;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) mean += Eigen::Vector2d(p.x, p.y);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(1);
  return hi <= 0.0 || lo <= 1e-12 * hi;
}

AnchorLayout::AnchorLayout(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
  if (anchors_.size() < 3) throw GeometryError("anchor layout needs at least 3 anchors");
  std::sort(anchors_.begin(), anchors_.end(), [](const Anchor& a, const Anchor& b) { return a.id < b.id; });
  std::vector<Position2D> pts;
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    if (i > 0 && anchors_[i].id == anchors_[i - 1].id)
      throw ValidationError("duplicate anchor id " + std::to_string(anchors_[i].id));
    if (!anchors_[i].position.finite()) throw ValidationError("anchor position must be finite");
    pts.push_back(anchors_[i].position);
  }
  if (collinear(pts)) throw GeometryError("anchor layout is collinear");
}

const Anchor& AnchorLayout::by_id(int id) const { return anchors_[index_of(id)]; }

std::size_t AnchorLayout::index_of(int id) const {
  auto it = std::lower_bound(anchors_.begin(), anchors_.end(), id,
                             [](const Anchor& a, int v) { return a.id < v; });
  if (it == anchors_.end() || it->id != id) throw ArgumentError("unknown anchor id " + std::to_string(id));
  return static_cast<std::size_t>(it - anchors_.begin());
}

Position2D interpolate_position(const Trajectory& traj, double t) {
  if (!(t >= traj.start_time() && t <= traj.end_time()))
    throw RangeError("time " + std::to_string(t) + " outside trajectory span [" +
                     std::to_string(traj.start_time()) + ", " + std::to_string(traj.end_time()) + "]");
  const auto s = traj.samples();
  auto it = std::lower_bound(s.begin(), s.end(), t, [](const auto& smp, double v) { return smp.t < v; });
  if (it->t == t) return it->value;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.t) / (hi.t - lo.t);
  return {lo.value.x + w * (hi.value.x - lo.value.x), lo.value.y + w * (hi.value.y - lo.value.y)};
}

std::vector<std::pair<double, PositionPair>> align_pairs_timed(const Trajectory& a, const Trajectory& b) {
  std::vector<std::pair<double, PositionPair>> out;
  for (const auto& s : a.samples()) {
    if (s.t < b.start_time() || s.t > b.end_time()) continue;
    out.push_back({s.t, {s.value, interpolate_position(b, s.t)}});
  }
  return out;
}

std::vector<PositionPair> align_pairs(const Trajectory& a, const Trajectory& b, double /*tol*/) {
  std::vector<PositionPair> out;
  for (auto& [t, pair] : align_pairs_timed(a, b)) out.push_back(pair);
  return out;
}

}  // namespace hyloc

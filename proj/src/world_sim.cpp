#include "hyloc/world_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>

#include "hyloc/errors.hpp"
#include "hyloc/vo_track.hpp"

namespace hyloc {

void Environment::validate() const {
  if (!bounds.valid()) throw ValidationError("environment bounds must have positive area");
  for (const auto& o : occluders) {
    if (!o.valid()) throw ValidationError("occluder must have positive area");
    if (!bounds.contains(o)) throw ValidationError("occluder lies outside the environment bounds");
  }
  for (const auto& z : dim_zones) {
    if (!z.area.valid()) throw ValidationError("dim zone must have positive area");
    if (!bounds.contains(z.area)) throw ValidationError("dim zone lies outside the environment bounds");
    if (!(z.keypoint_scale > 0.0 && z.keypoint_scale <= 1.0))
      throw ValidationError("dim zone keypoint_scale must lie in (0, 1]");
  }
}

double Environment::zone_scale(Position2D p) const {
  double s = 1.0;
  for (const auto& z : dim_zones)
    if (z.area.contains(p)) s = std::min(s, z.keypoint_scale);
  return s;
}

void NoiseModel::validate() const {
  for (double v : {sigma_los, nlos_bias_mean, sigma_nlos, shadow_sigma, vo_r_sigma0, vo_theta_sigma0, wall_penalty,
                   m_speed_penalty})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("noise sigmas and penalties must be finite and >= 0");
  if (!(d0 > 0.0)) throw ValidationError("noise d0 must be > 0");
  if (!(gamma_nlos > gamma_los)) throw ValidationError("noise gamma_nlos must exceed gamma_los");
  if (m_well_lit <= 0) throw ValidationError("noise m_well_lit must be > 0");
}

NoiseModel NoiseModel::noise_free() {
  NoiseModel nm;
  nm.sigma_los = 0.0;
  nm.nlos_bias_mean = 0.0;
  nm.sigma_nlos = 0.0;
  nm.shadow_sigma = 0.0;
  nm.vo_r_sigma0 = 0.0;
  nm.vo_theta_sigma0 = 0.0;
  return nm;
}

// --- trajectories -----------------------------------------------------------

namespace {

/// Polyline traversed at per-segment speeds. Loops when closed, otherwise
/// bounces between the ends.
class TimedPolyline {
 public:
  TimedPolyline(std::vector<Position2D> pts, bool closed, const std::vector<double>& speeds, double default_speed)
      : pts_(std::move(pts)), closed_(closed) {
    if (closed_) pts_.push_back(pts_.front());
    const std::size_t segs = pts_.size() - 1;
    if (!speeds.empty() && speeds.size() != segs)
      throw ArgumentError("segment_speeds needs one entry per segment");
    times_.push_back(0.0);
    for (std::size_t i = 0; i < segs; ++i) {
      const double v = speeds.empty() ? default_speed : speeds[i];
      if (!(v > 0.0)) throw ArgumentError("segment speed must be > 0");
      times_.push_back(times_.back() + distance(pts_[i], pts_[i + 1]) / v);
    }
    if (!(times_.back() > 0.0)) throw ArgumentError("trajectory path has zero length");
  }

  Position2D at(double t) const {
    const double total = times_.back();
    if (closed_) {
      t = std::fmod(t, total);
    } else {
      t = std::fmod(t, 2.0 * total);
      if (t > total) t = 2.0 * total - t;
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    if (i >= pts_.size() - 1) return pts_.back();
    const double span = times_[i + 1] - times_[i];
    const double w = span > 0.0 ? (t - times_[i]) / span : 0.0;
    return pts_[i] + w * (pts_[i + 1] - pts_[i]);
  }

 private:
  std::vector<Position2D> pts_;
  bool closed_;
  std::vector<double> times_;
};

}  // namespace

Trajectory generate_trajectory(const TrajectoryShape& shape, double speed, double duration, double rate,
                               RngStream& rng) {
  if (!(speed > 0.0)) throw ArgumentError("trajectory speed must be > 0");
  if (!(duration > 0.0)) throw ArgumentError("trajectory duration must be > 0");
  if (!(rate > 0.0)) throw ArgumentError("trajectory rate must be > 0");

  std::function<Position2D(double)> at;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LineShape>) {
          const Position2D dir{std::cos(s.heading), std::sin(s.heading)};
          at = [=](double t) { return s.start + (speed * t) * dir; };
        } else if constexpr (std::is_same_v<S, RectangleShape>) {
          if (!(s.width > 0.0 && s.height > 0.0)) throw ArgumentError("rectangle trajectory needs positive area");
          const Position2D o = s.origin;
          auto poly = std::make_shared<TimedPolyline>(
              std::vector<Position2D>{o, {o.x + s.width, o.y}, {o.x + s.width, o.y + s.height}, {o.x, o.y + s.height}},
              true, std::vector<double>{}, speed);
          at = [poly](double t) { return poly->at(t); };
        } else if constexpr (std::is_same_v<S, SCurveShape>) {
          if (!(s.length > 0.0 && s.wavelength > 0.0)) throw ArgumentError("s_curve needs positive length and wavelength");
          const double phase = 2.0 * std::numbers::pi * rng.next_uniform();
          const int n = std::max(16, static_cast<int>(std::ceil(s.length / 0.01)));
          std::vector<Position2D> pts;
          pts.reserve(n + 1);
          const double k = 2.0 * std::numbers::pi / s.wavelength;
          for (int i = 0; i <= n; ++i) {
            const double x = s.length * i / n;
            pts.push_back({s.origin.x + x, s.origin.y + s.amplitude * (std::sin(k * x + phase) - std::sin(phase))});
          }
          auto poly = std::make_shared<TimedPolyline>(std::move(pts), false, std::vector<double>{}, speed);
          at = [poly](double t) { return poly->at(t); };
        } else {
          if (s.points.size() < 2) throw ArgumentError("waypoint trajectory needs at least 2 waypoints");
          auto poly = std::make_shared<TimedPolyline>(s.points, s.closed, s.segment_speeds, speed);
          at = [poly](double t) { return poly->at(t); };
        }
      },
      shape);

  const auto n = static_cast<std::size_t>(std::floor(duration * rate + 1e-9));
  std::vector<Trajectory::Sample> samples;
  samples.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / rate;
    samples.push_back({t, at(t)});
  }
  return Trajectory(std::move(samples));
}

WaypointsShape random_waypoints(const Rect& area, int count, double margin, RngStream& rng) {
  if (count < 2) throw ArgumentError("random_waypoints needs count >= 2");
  WaypointsShape w;
  w.closed = true;
  const double wx = area.x1 - area.x0 - 2.0 * margin;
  const double wy = area.y1 - area.y0 - 2.0 * margin;
  if (!(wx > 0.0 && wy > 0.0)) throw ArgumentError("random_waypoints margin leaves no room");
  for (int i = 0; i < count; ++i)
    w.points.push_back({area.x0 + margin + wx * rng.next_uniform(), area.y0 + margin + wy * rng.next_uniform()});
  return w;
}

// --- sensors ----------------------------------------------------------------

LosResult los_test(Position2D a, Position2D b, const Environment& env) {
  LosResult res;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  for (const auto& r : env.occluders) {
    // Liang-Barsky clip of the segment against the closed rectangle.
    double lo = 0.0, hi = 1.0;
    bool hit = true;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
    for (int i = 0; i < 4 && hit; ++i) {
      if (p[i] == 0.0) {
        if (q[i] < 0.0) hit = false;
      } else {
        const double u = q[i] / p[i];
        if (p[i] < 0.0)
          lo = std::max(lo, u);
        else
          hi = std::min(hi, u);
      }
    }
    if (!hit || lo > hi) continue;
    if (hi == 0.0 || lo == 1.0) continue;  // touches only at an endpoint
    ++res.crossings;
  }
  res.los = res.crossings == 0;
  return res;
}

double expected_power(double distance, int crossings, const NoiseModel& nm) {
  if (!(distance > 0.0)) throw ArgumentError("power model needs distance > 0");
  const double gamma = crossings == 0 ? nm.gamma_los : nm.gamma_nlos;
  return nm.p0 - 10.0 * gamma * std::log10(distance / nm.d0) - crossings * nm.wall_penalty;
}

double simulate_power(double distance, int crossings, const NoiseModel& nm, RngStream& rng) {
  const double mean = expected_power(distance, crossings, nm);
  return rng.next_gauss(mean, nm.shadow_sigma);
}

RfSample simulate_rf_epoch(double t, Position2D gt_pos, const AnchorLayout& layout, const Environment& env,
                           const NoiseModel& nm, RngStream& range_rng, RngStream& power_rng) {
  constexpr double kMinRange = 0.01;
  RfSample s;
  s.t = t;
  s.entries.reserve(layout.size());
  for (const auto& a : layout.anchors()) {
    const double d = distance(gt_pos, a.position);
    const auto los = los_test(gt_pos, a.position, env);
    const double bias = range_rng.next_exponential(nm.nlos_bias_mean);
    const double noise = range_rng.next_gauss(0.0, los.los ? nm.sigma_los : nm.sigma_nlos);
    double range = los.los ? d + noise : d + bias + noise;
    // Exact-range configurations keep the true distance even when the tag sits on an anchor.
    if (range != d) range = std::max(range, kMinRange);
    const double power = simulate_power(std::max(d, kMinRange), los.crossings, nm, power_rng);
    s.entries.push_back({a.id, range, power, los.los});
  }
  return s;
}

int simulate_keypoints(Position2D pos, double speed, const Environment& env, const NoiseModel& nm, RngStream& rng) {
  const double over = std::max(0.0, speed - kWalkingSpeed);
  const double speed_factor = std::clamp(1.0 - nm.m_speed_penalty * over, 0.05, 1.0);
  const double mean = nm.m_well_lit * env.zone_scale(pos) * speed_factor;
  const double noise = std::round(rng.next_gauss(0.0, std::sqrt(mean)));
  return static_cast<int>(std::max(0.0, std::round(mean) + noise));
}

double vo_noise_scale(int m) {
  if (m >= 500) return 1.0;
  if (m >= 300) return 1.0 + 0.5 * (500.0 - m) / 200.0;
  if (m >= 100) return 1.5 + 4.5 * (300.0 - m) / 200.0;
  return 6.0;
}

VoSample VoSimulator::step(double t, Position2D prev_gt, Position2D cur_gt, int keypoints, RngStream& rng) {
  const PolarStep truth = polar_step(prev_gt, cur_gt, true_heading_);
  if (truth.r > 0.0) true_heading_ += truth.theta;

  const double s = vo_noise_scale(keypoints);
  const double r = std::max(0.0, rng.next_gauss(truth.r, nm_.vo_r_sigma0 * s));
  const double theta = wrap_angle(rng.next_gauss(truth.theta, nm_.vo_theta_sigma0 * s));

  low_run_ = keypoints < 100 ? low_run_ + 1 : 0;
  VoSample out{t, r, theta, keypoints, low_run_ >= kLostAfterEpochs};
  if (out.tracking_lost) {
    out.r = last_r_;
    out.theta = last_theta_;
  } else {
    last_r_ = r;
    last_theta_ = theta;
  }
  return out;
}

// --- scenarios ----------------------------------------------------------------

void ScenarioConfig::validate() const {
  environment.validate();
  noise.validate();
  const AnchorLayout layout(anchors);
  for (const auto& a : layout.anchors())
    if (!environment.bounds.contains(a.position))
      throw ValidationError("anchor " + std::to_string(a.id) + " lies outside the environment bounds");
  if (!(rates.rf_hz > 0.0 && rates.vo_hz > 0.0)) throw ValidationError("rates must be > 0");
  if (rates.rf_hz != rates.vo_hz) throw ValidationError("rf_hz and vo_hz must match (shared epoch clock)");
  if (!(speed > 0.0)) throw ValidationError("trajectory speed must be > 0");
  if (!(duration > 0.0)) throw ValidationError("trajectory duration must be > 0");
}

Trace run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const AnchorLayout layout(cfg.anchors);

  auto traj_rng = RngStream::named(cfg.seed, "world-sim/trajectory");
  auto range_rng = RngStream::named(cfg.seed, "world-sim/range");
  auto power_rng = RngStream::named(cfg.seed, "world-sim/power");
  auto kp_rng = RngStream::named(cfg.seed, "world-sim/keypoints");
  auto vo_rng = RngStream::named(cfg.seed, "world-sim/vo");

  Trajectory gt = generate_trajectory(cfg.shape, cfg.speed, cfg.duration, cfg.rates.rf_hz, traj_rng);
  for (const auto& s : gt.samples())
    if (!cfg.environment.bounds.contains(s.value))
      throw ValidationError("ground truth leaves the environment bounds at t=" + std::to_string(s.t));

  std::vector<RfSample> rf;
  std::vector<VoSample> vo;
  rf.reserve(gt.size());
  vo.reserve(gt.size());
  VoSimulator vo_sim(cfg.noise);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const auto& cur = gt[k];
    const Position2D prev = k == 0 ? cur.value : gt[k - 1].value;
    double speed = 0.0;
    if (k > 0)
      speed = distance(prev, cur.value) / (cur.t - gt[k - 1].t);
    else if (gt.size() > 1)
      speed = distance(gt[1].value, cur.value) / (gt[1].t - cur.t);

    rf.push_back(simulate_rf_epoch(cur.t, cur.value, layout, cfg.environment, cfg.noise, range_rng, power_rng));
    const int m = simulate_keypoints(cur.value, speed, cfg.environment, cfg.noise, kp_rng);
    vo.push_back(vo_sim.step(cur.t, prev, cur.value, m, vo_rng));
  }

  return Trace{cfg.name, cfg.seed, layout, cfg.environment, cfg.noise, std::move(gt), std::move(rf), std::move(vo),
               cfg.rates};
}

}  // namespace hyloc

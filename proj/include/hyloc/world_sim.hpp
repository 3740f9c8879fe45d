#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "hyloc/core.hpp"
#include "hyloc/rng.hpp"

namespace hyloc {

/// Axis-aligned rectangle, min corner (x0, y0), max corner (x1, y1).
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(Position2D p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool contains(const Rect& r) const { return r.x0 >= x0 && r.x1 <= x1 && r.y0 >= y0 && r.y1 <= y1; }
  bool valid() const { return x1 > x0 && y1 > y0; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct DimZone {
  Rect area;
  double keypoint_scale = 1.0;  // (0, 1]

  friend bool operator==(const DimZone&, const DimZone&) = default;
};

struct Environment {
  Rect bounds;
  std::vector<Rect> occluders;   // RF blockers
  std::vector<DimZone> dim_zones;

  /// Throws ValidationError when a zone leaves the bounds or a scale is out of (0, 1].
  void validate() const;
  /// Smallest keypoint_scale of the dim zones containing p, 1 outside all zones.
  double zone_scale(Position2D p) const;

  friend bool operator==(const Environment&, const Environment&) = default;
};

/// Sensor noise. Defaults are calibrated so that multilateration over the
/// standard 5-anchor room gives ~0.2 m median error with all anchors in LoS
/// and ~1 m with all anchors in NLoS, and so that LoS power stays above
/// -90 dBm at 30 m while NLoS power falls below -95 dBm by 15 m.
struct NoiseModel {
  double sigma_los = 0.26;          // m
  double nlos_bias_mean = 1.0;      // m, exponential
  double sigma_nlos = 0.4;          // m
  double p0 = -58.0;                // dBm at d0
  double d0 = 1.0;                  // m
  double gamma_los = 2.0;
  double gamma_nlos = 2.5;
  double wall_penalty = 10.0;       // dB per occluder crossed
  double shadow_sigma = 2.0;        // dB
  double vo_r_sigma0 = 0.004;       // m per step
  double vo_theta_sigma0 = 0.006;   // rad per step
  int m_well_lit = 568;
  double m_speed_penalty = 0.35;    // fraction lost per m/s above walking speed

  void validate() const;
  /// All-zero noise: sensors reproduce ground truth exactly.
  static NoiseModel noise_free();

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

/// Walking speed above which keypoint matching degrades.
inline constexpr double kWalkingSpeed = 1.5;

struct RfEntry {
  int anchor_id = 0;
  double range = 0.0;  // m, > 0
  double power = 0.0;  // dBm
  bool los = true;     // simulator truth

  friend bool operator==(const RfEntry&, const RfEntry&) = default;
};

struct RfSample {
  double t = 0.0;
  std::vector<RfEntry> entries;  // one per anchor, ascending id

  friend bool operator==(const RfSample&, const RfSample&) = default;
};

struct VoSample {
  double t = 0.0;
  double r = 0.0;
  double theta = 0.0;
  int keypoints = 0;
  bool tracking_lost = false;

  friend bool operator==(const VoSample&, const VoSample&) = default;
};

struct Rates {
  double rf_hz = 15.0;
  double vo_hz = 15.0;

  friend bool operator==(const Rates&, const Rates&) = default;
};

struct Trace {
  std::string scenario;
  std::uint64_t seed = 0;
  AnchorLayout layout;
  Environment environment;
  NoiseModel noise;
  Trajectory gt;
  std::vector<RfSample> rf;
  std::vector<VoSample> vo;
  Rates rates;

  std::size_t epochs() const { return rf.size(); }

  friend bool operator==(const Trace&, const Trace&) = default;
};

// --- trajectories -----------------------------------------------------------

struct LineShape {
  Position2D start;
  double heading = 0.0;  // rad
};

struct RectangleShape {
  Position2D origin;
  double width = 0.0;
  double height = 0.0;
};

/// Sinusoid along +x starting at `origin`, traversed back and forth. The
/// phase is drawn from the trajectory stream.
struct SCurveShape {
  Position2D origin;
  double length = 10.0;
  double amplitude = 1.0;
  double wavelength = 5.0;
};

/// Polyline through the points. Closed paths loop; open paths go back and
/// forth. `segment_speeds` (optional, one per segment) overrides the speed.
struct WaypointsShape {
  std::vector<Position2D> points;
  bool closed = false;
  std::vector<double> segment_speeds;
};

using TrajectoryShape = std::variant<LineShape, RectangleShape, SCurveShape, WaypointsShape>;

/// Samples at 1/rate spacing for t in [0, duration], moving at constant speed.
Trajectory generate_trajectory(const TrajectoryShape& shape, double speed, double duration, double rate,
                               RngStream& rng);

/// Random closed waypoint loop inside `area`, keeping `margin` from its edges.
WaypointsShape random_waypoints(const Rect& area, int count, double margin, RngStream& rng);

// --- sensors ----------------------------------------------------------------

struct LosResult {
  bool los = true;
  int crossings = 0;
};

/// Counts occluders touched by segment a-b. Boundary contact counts as a
/// crossing (closed rectangles); contact only at an endpoint does not.
LosResult los_test(Position2D a, Position2D b, const Environment& env);

/// Log-distance path loss with per-wall penalty and Gaussian shadowing.
double simulate_power(double distance, int crossings, const NoiseModel& nm, RngStream& rng);

/// Noise-free expectation of simulate_power.
double expected_power(double distance, int crossings, const NoiseModel& nm);

/// One ranging epoch against every anchor. Ranges use `range_rng`, powers use
/// `power_rng`; draw counts do not depend on LoS state.
RfSample simulate_rf_epoch(double t, Position2D gt_pos, const AnchorLayout& layout, const Environment& env,
                           const NoiseModel& nm, RngStream& range_rng, RngStream& power_rng);

/// Matching keypoints at `pos` moving at `speed`.
int simulate_keypoints(Position2D pos, double speed, const Environment& env, const NoiseModel& nm,
                       RngStream& rng);

/// VO noise multiplier: 1 for M >= 500, linear to 1.5 at M = 300, linear to
/// 6 at M = 100, 6 below.
double vo_noise_scale(int keypoints);

/// Consecutive M < 100 epochs after which tracking is reported lost.
inline constexpr int kLostAfterEpochs = 3;

/// Stateful VO emulator: tracks the true heading and the low-keypoint run.
class VoSimulator {
 public:
  explicit VoSimulator(const NoiseModel& nm) : nm_(nm) {}

  VoSample step(double t, Position2D prev_gt, Position2D cur_gt, int keypoints, RngStream& rng);

 private:
  NoiseModel nm_;
  double true_heading_ = 0.0;
  int low_run_ = 0;
  double last_r_ = 0.0;
  double last_theta_ = 0.0;
};

// --- scenarios ----------------------------------------------------------------

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  Environment environment;
  std::vector<Anchor> anchors;
  TrajectoryShape shape = LineShape{};
  double speed = 1.0;
  double duration = 10.0;
  NoiseModel noise;
  Rates rates;

  /// Throws ValidationError (or GeometryError for the layout).
  void validate() const;
};

/// Runs the whole simulation. Throws ValidationError when the ground truth
/// leaves the environment bounds.
Trace run_scenario(const ScenarioConfig& config);

/// Parses an INI scenario file with sections [scenario], [environment],
/// [anchors], [trajectory], [noise], [rates].
ScenarioConfig load_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_config(const std::string& text);
/// INI text that parses back to the same config (round-trip precision).
std::string scenario_config_to_ini(const ScenarioConfig& config);

/// JSON-lines trace: a meta header followed by one record per epoch.
void write_trace(const Trace& trace, const std::filesystem::path& path);
std::string trace_to_jsonl(const Trace& trace);
Trace read_trace(const std::filesystem::path& path);
Trace parse_trace(const std::string& text);

}  // namespace hyloc

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hyloc/errors.hpp"
#include "hyloc/scenarios.hpp"
#include "hyloc/vo_track.hpp"
#include "hyloc/world_sim.hpp"

using namespace hyloc;

namespace {

Environment room_with_wall() {
  Environment env;
  env.bounds = {0, 0, 10, 10};
  env.occluders = {{4, 0, 5, 6}};
  env.dim_zones = {{{0, 8, 2, 10}, 0.5}};
  return env;
}

ScenarioConfig small_config(std::uint64_t seed) {
  ScenarioConfig c;
  c.name = "small";
  c.seed = seed;
  c.environment = room_with_wall();
  c.anchors = {{1, {0.5, 0.5}}, {2, {9.5, 0.5}}, {3, {9.5, 9.5}}, {4, {0.5, 9.5}}};
  c.shape = RectangleShape{{1.0, 7.0}, 7.0, 2.0};
  c.speed = 1.0;
  c.duration = 20.0;
  return c;
}

}  // namespace

TEST(LosTest, CountsCrossedOccluders) {
  const auto env = room_with_wall();
  EXPECT_TRUE(los_test({1, 1}, {1, 9}, env).los);
  const auto blocked = los_test({1, 3}, {9, 3}, env);
  EXPECT_FALSE(blocked.los);
  EXPECT_EQ(blocked.crossings, 1);
  // Passing above the wall.
  EXPECT_TRUE(los_test({1, 7}, {9, 7}, env).los);
  // Grazing the top edge counts as a crossing.
  EXPECT_EQ(los_test({1, 6}, {9, 6}, env).crossings, 1);
  // Ending exactly on the wall surface does not.
  EXPECT_TRUE(los_test({1, 3}, {4, 3}, env).los);

  Environment two = env;
  two.occluders.push_back({6, 0, 7, 6});
  EXPECT_EQ(los_test({1, 3}, {9, 3}, two).crossings, 2);
}

TEST(PowerModel, LogDistanceWithWallPenalty) {
  NoiseModel nm;
  EXPECT_DOUBLE_EQ(expected_power(1.0, 0, nm), -58.0);
  EXPECT_NEAR(expected_power(10.0, 0, nm), -58.0 - 20.0, 1e-12);
  EXPECT_NEAR(expected_power(10.0, 2, nm), -58.0 - 25.0 - 20.0, 1e-12);
  EXPECT_THROW(expected_power(0.0, 0, nm), ArgumentError);
  nm.shadow_sigma = 0.0;
  RngStream rng(1, 1);
  EXPECT_DOUBLE_EQ(simulate_power(10.0, 1, nm, rng), expected_power(10.0, 1, nm));
}

TEST(VoNoiseScale, PiecewiseLinear) {
  EXPECT_DOUBLE_EQ(vo_noise_scale(568), 1.0);
  EXPECT_DOUBLE_EQ(vo_noise_scale(500), 1.0);
  EXPECT_DOUBLE_EQ(vo_noise_scale(400), 1.25);
  EXPECT_DOUBLE_EQ(vo_noise_scale(300), 1.5);
  EXPECT_DOUBLE_EQ(vo_noise_scale(200), 3.75);
  EXPECT_DOUBLE_EQ(vo_noise_scale(100), 6.0);
  EXPECT_DOUBLE_EQ(vo_noise_scale(0), 6.0);
}

TEST(Keypoints, DimZonesAndSpeedReduceMatches) {
  const auto env = room_with_wall();
  NoiseModel nm;
  double lit = 0, dim = 0, fast = 0;
  RngStream rng(2, 2);
  for (int i = 0; i < 2000; ++i) {
    lit += simulate_keypoints({5, 8}, 1.0, env, nm, rng);
    dim += simulate_keypoints({1, 9}, 1.0, env, nm, rng);
    fast += simulate_keypoints({5, 8}, 3.5, env, nm, rng);
  }
  EXPECT_NEAR(lit / 2000, 568.0, 2.0);
  EXPECT_NEAR(dim / 2000, 284.0, 2.0);
  EXPECT_NEAR(fast / 2000, 568.0 * 0.3, 2.0);
}

TEST(Trajectories, ConstantSpeedSampling) {
  RngStream rng(0, 0);
  const auto tr = generate_trajectory(RectangleShape{{0, 0}, 4, 2}, 2.0, 6.0, 10.0, rng);
  ASSERT_EQ(tr.size(), 61u);
  for (std::size_t i = 1; i < tr.size(); ++i) {
    EXPECT_NEAR(tr[i].t - tr[i - 1].t, 0.1, 1e-12);
    EXPECT_LE(distance(tr[i].value, tr[i - 1].value), 0.2 + 1e-12);
  }
  // Perimeter 12 m at 2 m/s: back at the origin after 6 s.
  EXPECT_NEAR(tr.back().value.x, 0.0, 1e-9);
  EXPECT_NEAR(tr.back().value.y, 0.0, 1e-9);
  EXPECT_THROW(generate_trajectory(LineShape{}, 0.0, 1.0, 10.0, rng), ArgumentError);
}

TEST(RunScenario, NoiseFreeSensorsMatchGroundTruth) {
  auto cfg = small_config(3);
  cfg.noise = NoiseModel::noise_free();
  const Trace tr = run_scenario(cfg);
  ASSERT_EQ(tr.rf.size(), tr.gt.size());
  ASSERT_EQ(tr.vo.size(), tr.gt.size());
  for (std::size_t k = 0; k < tr.epochs(); ++k) {
    for (const auto& e : tr.rf[k].entries)
      EXPECT_NEAR(e.range, distance(tr.gt[k].value, tr.layout.by_id(e.anchor_id).position), 1e-12);
  }
  std::vector<PolarStep> steps;
  for (std::size_t k = 1; k < tr.vo.size(); ++k) steps.push_back({tr.vo[k].r, tr.vo[k].theta});
  const auto dr = integrate_steps({tr.gt[0].value, 0.0}, steps);
  for (std::size_t k = 0; k < dr.size(); ++k) EXPECT_LT(distance(dr[k].value, tr.gt[k].value), 1e-9);
}

TEST(RunScenario, DeterministicPerSeed) {
  const Trace a = run_scenario(small_config(5));
  const Trace b = run_scenario(small_config(5));
  const Trace c = run_scenario(small_config(6));
  EXPECT_EQ(a, b);
  EXPECT_NE(a.rf, c.rf);
  EXPECT_EQ(trace_to_jsonl(a), trace_to_jsonl(b));
}

TEST(RunScenario, NlosRangesAreBiased) {
  const Trace tr = run_scenario(small_config(7));
  double los_err = 0, nlos_err = 0;
  int nl = 0, nn = 0;
  for (std::size_t k = 0; k < tr.epochs(); ++k)
    for (const auto& e : tr.rf[k].entries) {
      const double err = e.range - distance(tr.gt[k].value, tr.layout.by_id(e.anchor_id).position);
      (e.los ? los_err : nlos_err) += err;
      (e.los ? nl : nn) += 1;
    }
  ASSERT_GT(nl, 100);
  ASSERT_GT(nn, 100);
  EXPECT_NEAR(los_err / nl, 0.0, 0.05);
  EXPECT_NEAR(nlos_err / nn, 1.0, 0.15);
}

TEST(RunScenario, ValidatesConfig) {
  auto cfg = small_config(1);
  cfg.anchors.push_back({9, {20, 20}});
  EXPECT_THROW(run_scenario(cfg), ValidationError);
  cfg = small_config(1);
  cfg.rates.vo_hz = 30.0;
  EXPECT_THROW(run_scenario(cfg), ValidationError);
  cfg = small_config(1);
  cfg.shape = LineShape{{1, 1}, 0.0};
  EXPECT_THROW(run_scenario(cfg), ValidationError);  // walks through the east wall
  cfg = small_config(1);
  cfg.environment.dim_zones[0].keypoint_scale = 0.0;
  EXPECT_THROW(run_scenario(cfg), ValidationError);
}

TEST(VoSimulator, ReportsLostTrackingAfterLowKeypointRun) {
  VoSimulator sim(NoiseModel::noise_free());
  RngStream rng(0, 0);
  const auto a = sim.step(0.1, {0, 0}, {1, 0}, 500, rng);
  EXPECT_FALSE(a.tracking_lost);
  EXPECT_FALSE(sim.step(0.2, {1, 0}, {2, 0}, 50, rng).tracking_lost);
  EXPECT_FALSE(sim.step(0.3, {2, 0}, {3, 0}, 50, rng).tracking_lost);
  const auto lost = sim.step(0.4, {3, 0}, {3, 2}, 50, rng);
  EXPECT_TRUE(lost.tracking_lost);
  // While lost the last good step is repeated.
  EXPECT_DOUBLE_EQ(lost.r, 1.0);
  EXPECT_DOUBLE_EQ(lost.theta, 0.0);
  EXPECT_FALSE(sim.step(0.5, {3, 2}, {3, 3}, 500, rng).tracking_lost);
}

TEST(ScenarioConfigIni, ParsesAndRoundTrips) {
  const std::string ini = R"([scenario]
name = demo
seed = 12

[environment]
bounds = 0,0,10,10
occluders = 4,0,5,6
dim_zones = 0,8,2,10,0.5

[anchors]
1 = 0.5,0.5
2 = 9.5,0.5
3 = 9.5,9.5

[trajectory]
shape = waypoints
points = 1,7; 8,7; 8,9
closed = true
speed = 1.2
duration = 15

[noise]
sigma_los = 0.1
)";
  const auto cfg = parse_scenario_config(ini);
  EXPECT_EQ(cfg.name, "demo");
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.anchors.size(), 3u);
  EXPECT_DOUBLE_EQ(cfg.noise.sigma_los, 0.1);
  EXPECT_DOUBLE_EQ(cfg.noise.sigma_nlos, NoiseModel{}.sigma_nlos);
  const auto again = parse_scenario_config(scenario_config_to_ini(cfg));
  EXPECT_EQ(scenario_config_to_ini(again), scenario_config_to_ini(cfg));
  EXPECT_EQ(run_scenario(again), run_scenario(cfg));
}

TEST(ScenarioConfigIni, ReportsBadInput) {
  EXPECT_THROW(parse_scenario_config("[environment]\nbounds = 0,0,10\n"), ValidationError);
  EXPECT_THROW(parse_scenario_config("[environment]\nbounds = 0,0,10,10\n"), ValidationError);
  EXPECT_THROW(parse_scenario_config("[environment\nbounds = 0,0,10,10\n"), ParseError);
  const std::string bad_anchor = "[environment]\nbounds=0,0,10,10\n[anchors]\nA = 1,1\n";
  EXPECT_THROW(parse_scenario_config(bad_anchor), ValidationError);
  EXPECT_THROW(load_scenario_config("/nonexistent/x.ini"), IoError);
}

TEST(PresetScenarios, RoundTripThroughIni) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset_scenario(name, 4, 10.0);
    const auto again = parse_scenario_config(scenario_config_to_ini(cfg));
    EXPECT_EQ(run_scenario(again), run_scenario(cfg)) << name;
  }
  EXPECT_THROW(preset_scenario("nope", 1), ArgumentError);
}

TEST(TraceFile, JsonLinesRoundTrip) {
  const Trace tr = run_scenario(small_config(9));
  EXPECT_EQ(parse_trace(trace_to_jsonl(tr)), tr);
  const auto path = std::filesystem::temp_directory_path() / "hyloc_trace_roundtrip.jsonl";
  write_trace(tr, path);
  EXPECT_EQ(read_trace(path), tr);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_trace("{\"kind\":\"meta\"}\n"), ParseError);
  EXPECT_THROW(read_trace("/nonexistent/t.jsonl"), IoError);
}

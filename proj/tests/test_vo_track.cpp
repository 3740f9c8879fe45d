#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hyloc/errors.hpp"
#include "hyloc/vo_track.hpp"

using namespace hyloc;

constexpr double kPi = std::numbers::pi;

TEST(PolarStep, RelativeToPreviousHeading) {
  const auto s = polar_step({1.0, 1.0}, {1.0, 3.0}, 0.0);
  EXPECT_DOUBLE_EQ(s.r, 2.0);
  EXPECT_DOUBLE_EQ(s.theta, kPi / 2);

  const auto back = polar_step({0.0, 0.0}, {-1.0, 0.0}, kPi / 2);
  EXPECT_DOUBLE_EQ(back.r, 1.0);
  EXPECT_NEAR(back.theta, kPi / 2, 1e-15);

  const auto still = polar_step({2.0, 2.0}, {2.0, 2.0}, 1.0);
  EXPECT_EQ(still, (PolarStep{0.0, 0.0}));
}

TEST(PolarStep, ThetaIsWrapped) {
  // Previous heading just below +pi, new direction just above -pi: a small left turn.
  const auto s = polar_step({0.0, 0.0}, {std::cos(-kPi + 0.1), std::sin(-kPi + 0.1)}, kPi - 0.1);
  EXPECT_NEAR(s.theta, 0.2, 1e-12);
}

TEST(IntegrateSteps, ReconstructsThePath) {
  const std::vector<Position2D> path{{0, 0}, {1, 0}, {1, 1}, {0, 2}, {-1, 2}, {-1, 2}, {-3, 0}};
  std::vector<PolarStep> steps;
  double heading = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto s = polar_step(path[i - 1], path[i], heading);
    if (s.r > 0.0) heading += s.theta;
    steps.push_back(s);
  }
  const auto tr = integrate_steps({path[0], 0.0}, steps);
  ASSERT_EQ(tr.size(), path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    EXPECT_DOUBLE_EQ(tr[i].t, static_cast<double>(i));
    EXPECT_NEAR(tr[i].value.x, path[i].x, 1e-12);
    EXPECT_NEAR(tr[i].value.y, path[i].y, 1e-12);
  }
}

TEST(IntegrateSteps, UsesGivenTimestamps) {
  const std::vector<PolarStep> steps{{1.0, 0.0}, {1.0, kPi / 2}};
  const std::vector<double> times{0.5, 0.6, 0.7};
  const auto tr = integrate_steps({{0.0, 0.0}, 0.0}, steps, times);
  EXPECT_DOUBLE_EQ(tr.back().t, 0.7);
  EXPECT_NEAR(tr.back().value.x, 1.0, 1e-12);
  EXPECT_NEAR(tr.back().value.y, 1.0, 1e-12);
  const std::vector<double> wrong{0.0, 1.0};
  EXPECT_THROW(integrate_steps({}, steps, wrong), ArgumentError);
}

TEST(Advance, HeadingAccumulatesWithoutWrapping) {
  DeadReckonState s{{0.0, 0.0}, 0.0};
  for (int i = 0; i < 8; ++i) s = advance(s, {0.0, kPi / 2});
  EXPECT_NEAR(s.heading, 4 * kPi, 1e-12);
}

TEST(VoFeatures, KeypointRatioIsClamped) {
  const auto f = compose_vo_features({0.3, -0.1}, 252, 568);
  EXPECT_DOUBLE_EQ(f[0], 0.3);
  EXPECT_DOUBLE_EQ(f[1], -0.1);
  EXPECT_DOUBLE_EQ(f[2], 252.0 / 568.0);
  EXPECT_DOUBLE_EQ(compose_vo_features({}, 900, 568)[2], 1.0);
  EXPECT_DOUBLE_EQ(compose_vo_features({}, 0, 568)[2], 0.0);
  EXPECT_THROW(compose_vo_features({}, 10, 0), ArgumentError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hyloc/core.hpp"
#include "hyloc/errors.hpp"

using namespace hyloc;

namespace {

Trajectory line_traj() { return Trajectory({{0.0, {0.0, 0.0}}, {1.0, {1.0, 0.0}}, {3.0, {1.0, 2.0}}}); }

}  // namespace

TEST(Position2D, ArithmeticAndNorm) {
  const Position2D a{3.0, 4.0};
  EXPECT_DOUBLE_EQ(a.norm(), 5.0);
  EXPECT_EQ(a + Position2D(1.0, 1.0), (Position2D{4.0, 5.0}));
  EXPECT_EQ(a - Position2D(1.0, 1.0), (Position2D{2.0, 3.0}));
  EXPECT_EQ(2.0 * a, (Position2D{6.0, 8.0}));
  EXPECT_DOUBLE_EQ(distance(a, {0.0, 0.0}), 5.0);
  EXPECT_FALSE((Position2D{NAN, 0.0}).finite());
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  constexpr double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
  EXPECT_NEAR(wrap_angle(3 * pi), pi, 1e-12);
  EXPECT_NEAR(wrap_angle(2 * pi + 0.5), 0.5, 1e-12);
  EXPECT_NEAR(wrap_angle(-2 * pi - 0.5), -0.5, 1e-12);
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    EXPECT_GT(w, -pi);
    EXPECT_LE(w, pi);
    EXPECT_NEAR(std::cos(w), std::cos(a), 1e-12);
    EXPECT_NEAR(std::sin(w), std::sin(a), 1e-12);
  }
}

TEST(Trajectory, RejectsInvalidTimestamps) {
  using S = std::vector<Trajectory::Sample>;
  EXPECT_THROW(Trajectory(S{}), ArgumentError);
  EXPECT_THROW(Trajectory(S{{1.0, {}}, {1.0, {}}}), ArgumentError);
  EXPECT_THROW(Trajectory(S{{1.0, {}}, {0.5, {}}}), ArgumentError);
  EXPECT_THROW(Trajectory(S{{-1.0, {}}}), ArgumentError);
  EXPECT_THROW(Trajectory(S{{NAN, {}}}), ArgumentError);
  EXPECT_NO_THROW(Trajectory(S{{0.0, {}}}));
}

TEST(Trajectory, InterpolatesLinearly) {
  const auto tr = line_traj();
  EXPECT_EQ(interpolate_position(tr, 0.0), (Position2D{0.0, 0.0}));
  EXPECT_EQ(interpolate_position(tr, 0.5), (Position2D{0.5, 0.0}));
  EXPECT_EQ(interpolate_position(tr, 2.0), (Position2D{1.0, 1.0}));
  EXPECT_EQ(interpolate_position(tr, 3.0), (Position2D{1.0, 2.0}));
  EXPECT_THROW(interpolate_position(tr, -0.1), RangeError);
  EXPECT_THROW(interpolate_position(tr, 3.1), RangeError);
}

TEST(AlignPairs, UsesSamplesInsideOtherSpan) {
  const Trajectory est({{0.5, {9.0, 9.0}}, {2.0, {1.0, 1.0}}, {5.0, {0.0, 0.0}}});
  const auto pairs = align_pairs_timed(est, line_traj());
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_DOUBLE_EQ(pairs[0].first, 0.5);
  EXPECT_EQ(pairs[0].second.second, (Position2D{0.5, 0.0}));
  EXPECT_EQ(pairs[1].second.first, (Position2D{1.0, 1.0}));
  EXPECT_EQ(align_pairs(est, line_traj()).size(), 2u);
}

TEST(AnchorLayout, ValidatesAndSortsById) {
  const AnchorLayout l({{3, {0.0, 5.0}}, {1, {0.0, 0.0}}, {2, {5.0, 0.0}}});
  EXPECT_EQ(l[0].id, 1);
  EXPECT_EQ(l[2].id, 3);
  EXPECT_EQ(l.index_of(2), 1u);
  EXPECT_EQ(l.by_id(3).position, (Position2D{0.0, 5.0}));
  EXPECT_THROW(l.by_id(7), ArgumentError);
  EXPECT_THROW(AnchorLayout({{1, {0, 0}}, {2, {1, 0}}}), GeometryError);
  EXPECT_THROW(AnchorLayout({{1, {0, 0}}, {1, {1, 0}}, {2, {0, 1}}}), ValidationError);
  EXPECT_THROW(AnchorLayout({{1, {0, 0}}, {2, {1, 1}}, {3, {2, 2}}}), GeometryError);
}

TEST(Collinear, DetectsDegenerateSets) {
  const std::vector<Position2D> line{{0, 0}, {1, 1}, {2, 2}, {-4, -4}};
  const std::vector<Position2D> tri{{0, 0}, {1, 0}, {0, 1}};
  const std::vector<Position2D> same{{2, 2}, {2, 2}, {2, 2}};
  EXPECT_TRUE(collinear(line));
  EXPECT_FALSE(collinear(tri));
  EXPECT_TRUE(collinear(same));
}

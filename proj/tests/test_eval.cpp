#include <gtest/gtest.h>

#include <cmath>

#include "hyloc/errors.hpp"
#include "hyloc/eval.hpp"

using namespace hyloc;

namespace {

using S = std::vector<Trajectory::Sample>;

Trajectory line(double x0, double y0, double vx, double vy, int n, double dt = 0.1) {
  S s;
  for (int k = 0; k < n; ++k) s.push_back({k * dt, {x0 + vx * k * dt, y0 + vy * k * dt}});
  return Trajectory(std::move(s));
}

Trajectory shifted(const Trajectory& t, double dx, double dy) {
  S s;
  for (const auto& p : t.samples()) s.push_back({p.t, {p.value.x + dx, p.value.y + dy}});
  return Trajectory(std::move(s));
}

}  // namespace

TEST(Ate, IdentityAndConstantOffset) {
  const auto gt = line(0, 0, 1, 0.5, 50);
  const auto same = ate(gt, gt);
  EXPECT_EQ(same.max, 0.0);
  EXPECT_EQ(same.count, 50u);
  const auto off = ate(shifted(gt, 0.3, 0.4), gt);
  EXPECT_NEAR(off.mean, 0.5, 1e-12);
  EXPECT_NEAR(off.median, 0.5, 1e-12);
  EXPECT_NEAR(off.std, 0.0, 1e-12);
}

TEST(Ate, InterpolatesGroundTruth) {
  const auto gt = line(0, 0, 1, 0, 11);  // x = t on [0, 1]
  const Trajectory est(S{{0.05, {0.05, 0.0}}, {0.55, {0.65, 0.0}}, {2.0, {9.0, 9.0}}});
  const auto s = ate(est, gt);
  ASSERT_EQ(s.count, 2u);  // t = 2 lies outside the ground truth
  EXPECT_NEAR(s.errors[0], 0.0, 1e-12);
  EXPECT_NEAR(s.errors[1], 0.1, 1e-12);
  EXPECT_EQ(s.times[1], 0.55);
}

TEST(Ate, DisjointSpansRaise) {
  const Trajectory a(S{{0.0, {0, 0}}, {1.0, {1, 0}}});
  const Trajectory b(S{{2.0, {0, 0}}, {3.0, {1, 0}}});
  EXPECT_THROW(ate(a, b), ArgumentError);
}

TEST(Stats, MedianOddEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({7.0}), 7.0);
  EXPECT_THROW(median({}), ArgumentError);
}

TEST(Stats, SummaryValues) {
  const auto s = summarize_errors({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_EQ(s.count, 4u);
  EXPECT_THROW(summarize_errors({}), ArgumentError);
}

TEST(Cdf, MonotoneAndEndsAtOne) {
  const auto c = cdf({0.3, 0.1, 0.2, 0.2});
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0], (CdfPoint{0.1, 0.25}));
  EXPECT_EQ(c[3], (CdfPoint{0.3, 1.0}));
  for (std::size_t i = 1; i < c.size(); ++i) {
    EXPECT_LE(c[i - 1].value, c[i].value);
    EXPECT_LT(c[i - 1].fraction, c[i].fraction);
  }
  EXPECT_THROW(cdf({}), ArgumentError);
}

TEST(Relative, ExactEstimatesGiveZero) {
  const auto a = line(0, 0, 1, 0, 30);
  const auto b = line(0, 3, 0, 1, 30);
  const auto r = relative_errors(a, b, a, b);
  EXPECT_NEAR(r.mean_distance, 0.0, 1e-12);
  EXPECT_NEAR(r.mean_angle, 0.0, 1e-9);
}

TEST(Relative, TranslationInvariant) {
  const auto ga = line(0, 0, 1, 0, 30);
  const auto gb = line(0, 3, 0, 1, 30);
  const auto ea = shifted(ga, 0.2, -0.1);
  const auto eb = shifted(gb, 0.1, 0.3);
  const auto r1 = relative_errors(ea, eb, ga, gb);
  const auto r2 = relative_errors(shifted(ea, 5, -7), shifted(eb, 5, -7), ga, gb);
  ASSERT_EQ(r1.distance_errors.size(), r2.distance_errors.size());
  for (std::size_t i = 0; i < r1.distance_errors.size(); ++i) {
    EXPECT_NEAR(r1.distance_errors[i], r2.distance_errors[i], 1e-9);
    EXPECT_NEAR(r1.angle_errors[i], r2.angle_errors[i], 1e-7);
  }
}

TEST(Relative, HandComputedEpoch) {
  // True separation (3, 0); estimated separation (0, 4): distance error 1,
  // bearing error 90 degrees.
  const Trajectory ga(S{{0.0, {0, 0}}, {1.0, {0, 0}}});
  const Trajectory gb(S{{0.0, {3, 0}}, {1.0, {3, 0}}});
  const Trajectory ea(S{{0.0, {1, 1}}, {1.0, {1, 1}}});
  const Trajectory eb(S{{0.0, {1, 5}}, {1.0, {1, 5}}});
  const auto r = relative_errors(ea, eb, ga, gb);
  EXPECT_NEAR(r.median_distance, 1.0, 1e-12);
  EXPECT_NEAR(r.median_angle, 90.0, 1e-9);
}

TEST(Relative, CoincidentAgentsRaise) {
  const auto a = line(0, 0, 1, 0, 10);
  EXPECT_THROW(relative_errors(a, a, a, a), ArgumentError);
}

TEST(MultiUser, AveragesPairMeans) {
  const auto g0 = line(0, 0, 1, 0, 20);
  const auto g1 = line(0, 2, 1, 0, 20);
  const auto g2 = line(0, 5, 1, 0, 20);
  // Agent 2 is 0.5 m too far in y; agents 0 and 1 are exact.
  const auto m = multi_user_errors({g0, g1, shifted(g2, 0, 0.5)}, {g0, g1, g2});
  ASSERT_EQ(m.pairs.size(), 3u);
  EXPECT_EQ(m.pairs[2], (std::pair<std::size_t, std::size_t>{1, 2}));
  EXPECT_NEAR(m.per_pair[0].mean_distance, 0.0, 1e-12);
  EXPECT_NEAR(m.per_pair[1].mean_distance, 0.5, 1e-12);
  EXPECT_NEAR(m.per_pair[2].mean_distance, 0.5, 1e-12);
  EXPECT_NEAR(m.mean_distance, 1.0 / 3.0, 1e-12);
  EXPECT_THROW(multi_user_errors({g0}, {g0}), ArgumentError);
}

TEST(Compare, SortedByMedian) {
  std::vector<MethodResult> results{{"vo", summarize_errors({1.0, 3.0})},
                                    {"rf", summarize_errors({0.5, 0.7, 0.9})},
                                    {"ekf", summarize_errors({0.6, 0.7, 0.8})}};
  const auto rows = compare_report(results);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "ekf");  // ties on median break by name
  EXPECT_EQ(rows[1].method, "rf");
  EXPECT_EQ(rows[2].method, "vo");
  EXPECT_EQ(rows[2].median, 2.0);
}

TEST(Compare, CsvRoundTrip) {
  const std::vector<CompareRow> rows{{"fusion", 0.1 / 3.0, 0.2, 1e-17, 4.5, 12}, {"rf", 1.0, 2.0, 3.0, 4.0, 5}};
  const auto text = compare_to_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,mean,median,std,max,count");
  EXPECT_EQ(compare_from_csv(text), rows);
  EXPECT_NE(compare_to_text(rows).find("fusion"), std::string::npos);
}

TEST(Compare, MalformedCsvRaises) {
  EXPECT_THROW(compare_from_csv(""), ParseError);
  EXPECT_THROW(compare_from_csv("a,b\n"), ParseError);
  EXPECT_THROW(compare_from_csv("method,mean,median,std,max,count\nrf,1,2,3\n"), ParseError);
  EXPECT_THROW(compare_from_csv("method,mean,median,std,max,count\nrf,1,x,3,4,5\n"), ParseError);
}

TEST(Export, CsvLines) {
  const auto s = summarize_errors({0.5, 0.25}, {1.0, 2.0});
  EXPECT_EQ(errors_to_csv(s), "t,error_m\n1,0.5\n2,0.25\n");
  EXPECT_EQ(cdf_to_csv(cdf({0.5, 0.25})), "error_m,fraction\n0.25,0.5\n0.5,1\n");
}

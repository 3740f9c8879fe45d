#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hyloc/errors.hpp"
#include "hyloc/rf_loc.hpp"
#include "hyloc/rng.hpp"

using namespace hyloc;

namespace {

std::vector<RangeObservation> exact_obs(const std::vector<Position2D>& anchors, Position2D p) {
  std::vector<RangeObservation> obs;
  for (const auto& a : anchors) obs.push_back({a, distance(a, p)});
  return obs;
}

AnchorLayout five_anchors() {
  return AnchorLayout({{1, {0.5, 0.5}}, {2, {19.5, 0.5}}, {3, {19.5, 13.5}}, {4, {0.5, 13.5}}, {5, {10, 12}}});
}

RfSample sample_at(const AnchorLayout& layout, Position2D p, const std::vector<double>& bias,
                   const std::vector<double>& power) {
  RfSample s;
  for (std::size_t i = 0; i < layout.size(); ++i)
    s.entries.push_back({layout[i].id, distance(layout[i].position, p) + bias[i], power[i], bias[i] == 0.0});
  return s;
}

}  // namespace

TEST(ReceivedPower, HandComputed) {
  // C * 2^17 / N^2 = 2^10 * 2^17 / 2^20 = 128.
  EXPECT_NEAR(received_power(1024.0, 1024.0, 121.74), 10.0 * std::log10(128.0) - 121.74, 1e-12);
  EXPECT_THROW(received_power(0.0, 1024.0, 121.74), ArgumentError);
  EXPECT_THROW(received_power(1.0, 0.0, 121.74), ArgumentError);
}

TEST(Multilaterate, ExactRangesRecoverPosition) {
  RngStream rng(17, 0);
  double worst = 0.0;
  int solved = 0;
  while (solved < 300) {
    const int n = 3 + static_cast<int>(rng.next_below(5));
    std::vector<Position2D> anchors;
    for (int i = 0; i < n; ++i) anchors.push_back({20.0 * rng.next_uniform(), 20.0 * rng.next_uniform()});
    if (collinear(anchors)) continue;
    const Position2D p{20.0 * rng.next_uniform(), 20.0 * rng.next_uniform()};
    const auto res = multilaterate(exact_obs(anchors, p));
    worst = std::max(worst, distance(res.position, p));
    ++solved;
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Multilaterate, MatchesGridSearchOnNoisyRanges) {
  const std::vector<Position2D> anchors{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  RngStream rng(3, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Position2D p{2.0 + 6.0 * rng.next_uniform(), 2.0 + 6.0 * rng.next_uniform()};
    auto obs = exact_obs(anchors, p);
    for (auto& o : obs) o.range += rng.next_gauss(0.0, 0.3);

    // Exhaustive oracle on a 201 x 201 grid over the room.
    double best = std::numeric_limits<double>::infinity();
    Position2D best_p;
    for (int i = 0; i <= 200; ++i)
      for (int j = 0; j <= 200; ++j) {
        const Position2D q{0.05 * i, 0.05 * j};
        const double f = multilateration_objective(obs, q);
        if (f < best) best = f, best_p = q;
      }
    const auto res = multilaterate(obs);
    EXPECT_LE(multilateration_objective(obs, res.position), best + 1e-12);
    EXPECT_LT(distance(res.position, best_p), 0.05);
  }
}

TEST(Multilaterate, RejectsDegenerateGeometry) {
  EXPECT_THROW(multilaterate(exact_obs({{0, 0}, {1, 0}}, {3, 3})), GeometryError);
  EXPECT_THROW(multilaterate(exact_obs({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {3, 1})), GeometryError);
}

TEST(Combinations, LexicographicSubsets) {
  const auto c = combinations(5, 3);
  ASSERT_EQ(c.size(), 10u);
  EXPECT_EQ(c.front(), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(c[1], (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(c.back(), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(combinations(7, 3).size(), 35u);
}

TEST(LabelBestAnchors, AvoidsBiasedAnchor) {
  const auto layout = five_anchors();
  const Position2D p{7, 6};
  const auto s = sample_at(layout, p, {0, 2.0, 0, 0, 0}, {-70, -90, -70, -70, -70});
  // Every subset without index 1 is exact; the lexicographically first wins.
  EXPECT_EQ(label_best_anchors(s, layout, p, 3), (std::vector<int>{1, 0, 1, 1, 0}));
  EXPECT_THROW(label_best_anchors(s, layout, p, 2), ArgumentError);
}

TEST(LabelBestAnchors, AgreesWithIndependentBruteForce) {
  const auto layout = five_anchors();
  RngStream rng(8, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const Position2D p{1 + 18 * rng.next_uniform(), 1 + 12 * rng.next_uniform()};
    std::vector<double> bias;
    for (int i = 0; i < 5; ++i) bias.push_back(rng.next_uniform() < 0.4 ? rng.next_exponential(1.0) : 0.0);
    for (auto& b : bias) b += rng.next_gauss(0.0, 0.2);
    const auto s = sample_at(layout, p, bias, std::vector<double>(5, -70.0));

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> expect(5, 0);
    for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b)
        for (int c = b + 1; c < 5; ++c) {
          std::vector<RangeObservation> obs;
          for (int i : {a, b, c}) obs.push_back({layout[i].position, s.entries[i].range});
          const double e = distance(multilaterate(obs).position, p);
          if (e < best - 1e-9) {
            best = e;
            expect.assign(5, 0);
            expect[a] = expect[b] = expect[c] = 1;
          }
        }
    EXPECT_EQ(label_best_anchors(s, layout, p, 3), expect) << "trial " << trial;
  }
}

TEST(RankByPower, DescendingWithLowerIdOnTies) {
  const auto layout = five_anchors();
  const auto s = sample_at(layout, {5, 5}, std::vector<double>(5, 0.0), {-80, -60, -70, -60, -90});
  EXPECT_EQ(rank_by_power(s), (std::vector<std::size_t>{1, 3, 2, 0, 4}));
}

TEST(LocalizeRanked, RepairsCollinearPicks) {
  const AnchorLayout layout({{1, {0, 0}}, {2, {5, 0}}, {3, {10, 0}}, {4, {5, 8}}});
  const Position2D p{4, 3};
  RfSample s;
  for (const auto& a : layout.anchors()) s.entries.push_back({a.id, distance(a.position, p), -60.0, true});
  const std::vector<std::size_t> ranking{0, 1, 2, 3};
  const auto est = localize_ranked(s, layout, ranking, 3);
  ASSERT_EQ(est.used.size(), 3u);
  EXPECT_EQ(est.used.back().anchor_id, 4);
  EXPECT_LT(distance(est.mlr.position, p), 1e-6);
  EXPECT_THROW(localize_ranked(s, layout, ranking, 5), ArgumentError);
}

TEST(LocalizeEpoch, AllAnchorsWithoutSelector) {
  const auto layout = five_anchors();
  const Position2D p{12, 4};
  const auto s = sample_at(layout, p, std::vector<double>(5, 0.0), std::vector<double>(5, -70.0));
  const auto est = localize_epoch(s, layout, nullptr);
  EXPECT_EQ(est.used.size(), 5u);
  EXPECT_LT(distance(est.mlr.position, p), 1e-6);
}

TEST(RfFeatures, LayoutAndSizeCheck) {
  MultilaterationResult m;
  m.position = {1.5, 2.5};
  const std::vector<RfEntry> sel{{1, 3.0, -60, true}, {4, 5.0, -70, true}, {5, 7.0, -80, false}};
  EXPECT_EQ(compose_rf_features(m, sel, 3), (RfFeature{1.5, 2.5, 3.0, 5.0, 7.0, -60, -70, -80}));
  EXPECT_THROW(compose_rf_features(m, sel, 4), ArgumentError);
}

namespace {

/// Anchor i is "good" exactly when its power exceeds -75 dBm.
std::vector<SelectorExample> power_threshold_task(std::uint64_t seed, int n) {
  RngStream rng(seed, 0);
  std::vector<SelectorExample> out;
  for (int r = 0; r < n; ++r) {
    SelectorExample ex;
    for (int i = 0; i < 4; ++i) {
      ex.ranges.push_back(1.0 + 10.0 * rng.next_uniform());
      double p = -90.0 + 30.0 * rng.next_uniform();
      if (std::abs(p + 75.0) < 1.0) p += 2.0;
      ex.powers.push_back(p);
      ex.labels.push_back(p > -75.0 ? 1 : 0);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

double accuracy(const AnchorSelectorModel& m, const std::vector<SelectorExample>& data) {
  int ok = 0, total = 0;
  for (const auto& ex : data) {
    const auto pred = m.predict(ex.ranges, ex.powers);
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ex.labels[i], ++total;
  }
  return static_cast<double>(ok) / total;
}

}  // namespace

TEST(AnchorSelector, LearnsSeparableLabels) {
  const auto train = power_threshold_task(1, 600);
  const auto test = power_threshold_task(2, 300);
  const std::vector<int> ids{1, 2, 3, 4};
  RngStream rng(4, 0);
  const auto model = train_anchor_selector(train, ids, 3, {}, rng);
  EXPECT_GE(accuracy(model, test), 0.95);
  EXPECT_EQ(std::vector<int>(model.chain_order().begin(), model.chain_order().end()), ids);
}

TEST(AnchorSelector, ChainOrderAndJsonRoundTrip) {
  const auto train = power_threshold_task(3, 200);
  const std::vector<int> ids{1, 2, 3, 4};
  RngStream rng(4, 0);
  SelectorTrainOptions opt;
  opt.epochs = 50;
  const auto model = train_anchor_selector(train, ids, 3, {3, 1, 4, 2}, rng, opt);
  EXPECT_EQ(std::vector<int>(model.chain_order().begin(), model.chain_order().end()),
            (std::vector<int>{3, 1, 4, 2}));
  EXPECT_EQ(model.links()[1].weights.size(), 8u + 1u);
  const auto back = AnchorSelectorModel::from_json(model.to_json());
  EXPECT_EQ(back, model);
  EXPECT_EQ(back.to_json(), model.to_json());
  EXPECT_THROW(AnchorSelectorModel::from_json("{}"), ValidationError);
  EXPECT_THROW(train_anchor_selector(train, ids, 3, {1, 2, 2, 4}, rng, opt), ArgumentError);
}

TEST(AnchorSelector, SingleClassLinkBecomesConstant) {
  auto data = power_threshold_task(5, 100);
  for (auto& ex : data) ex.labels[0] = 1;
  RngStream rng(1, 0);
  std::vector<std::string> warnings;
  const auto model = train_anchor_selector(data, std::vector<int>{1, 2, 3, 4}, 3, {}, rng, {}, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  ASSERT_TRUE(model.links()[0].constant.has_value());
  EXPECT_EQ(*model.links()[0].constant, 1.0);
  EXPECT_EQ(model.predict(data[0].ranges, data[0].powers)[0], 1);
}

TEST(AnchorSelector, SelectsTopKIdsAscending) {
  const auto train = power_threshold_task(6, 400);
  RngStream rng(2, 0);
  const auto model = train_anchor_selector(train, std::vector<int>{1, 2, 3, 4}, 3, {}, rng);
  RfSample s;
  s.entries = {{1, 5.0, -88, true}, {2, 5.0, -62, true}, {3, 5.0, -61, true}, {4, 5.0, -70, true}};
  EXPECT_EQ(select_anchors(model, s), (std::vector<int>{2, 3, 4}));
}

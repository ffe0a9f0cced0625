#include <gtest/gtest.h>

#include <random>

#include "ptalign/diag.hpp"
#include "ptalign/error.hpp"

namespace ptalign {
namespace {

TEST(DiagTest, WeightedCenter) {
  EXPECT_EQ(weighted_center({{{2.0, -1.0}}, {0.3}}), (Point2{2.0, -1.0}));
  const auto mid = weighted_center({{{0, 0}, {2, 4}}, {1.0, 1.0}});
  EXPECT_DOUBLE_EQ(mid.x, 1.0);
  EXPECT_DOUBLE_EQ(mid.y, 2.0);
  const auto c = weighted_center({{{0, 0}, {4, 0}}, {1.0, 3.0}});
  EXPECT_DOUBLE_EQ(c.x, 3.0);
  EXPECT_DOUBLE_EQ(c.y, 0.0);
}

TEST(DiagTest, Compactness) {
  EXPECT_EQ(compactness({{{5, 5}}, {1.0}}), 0.0);
  EXPECT_DOUBLE_EQ(compactness({{{0, 0}, {4, 0}}, {1.0, 3.0}}), 1.5);
}

TEST(DiagTest, CenterDistance) {
  const EmbeddedToken a{{{0, 0}}, {1.0}};
  const EmbeddedToken b{{{3, 4}}, {2.0}};
  EXPECT_EQ(center_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(center_distance(a, b), 5.0);
  // Centers (3,0) and (1,1): sqrt(4 + 1).
  const EmbeddedToken c{{{0, 0}, {4, 0}}, {1.0, 3.0}};
  const EmbeddedToken d{{{0, 2}, {2, 0}}, {0.5, 0.5}};
  EXPECT_DOUBLE_EQ(center_distance(c, d), std::sqrt(5.0));
}

TEST(DiagTest, Errors) {
  EXPECT_THROW(weighted_center({{{0, 0}}, {0.0}}), Error);
  EXPECT_THROW(compactness({{{0, 0}, {1, 1}}, {1.0}}), Error);
  EXPECT_THROW(center_distance({{{0, 0}}, {1.0}}, {{}, {}}), Error);
  EXPECT_THROW(parse_embedding(R"({"x": [0, 1]})"), Error);
  EXPECT_THROW(parse_embedding(R"({"1": [0]})"), Error);
}

EmbeddedToken random_token(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  std::uniform_real_distribution<double> weight(0.01, 1.0);
  std::uniform_int_distribution<int> n(1, 8);
  EmbeddedToken t;
  for (int i = n(rng); i > 0; --i) {
    t.points.push_back({coord(rng), coord(rng)});
    t.weights.push_back(weight(rng));
  }
  return t;
}

TEST(DiagTest, Properties) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = random_token(rng);
    const double comp = compactness(t);
    ASSERT_GE(comp, 0.0);

    auto moved = t;
    const Point2 d{shift(rng), shift(rng)};
    for (auto& p : moved.points) p = {p.x + d.x, p.y + d.y};
    ASSERT_NEAR(compactness(moved), comp, 1e-9);

    auto scaled = t;
    const double s = scale(rng);
    for (auto& w : scaled.weights) w *= s;
    ASSERT_NEAR(compactness(scaled), comp, 1e-9);
    ASSERT_NEAR(distance(weighted_center(scaled), weighted_center(t)), 0.0, 1e-9);

    const auto u = random_token(rng);
    const auto v = random_token(rng);
    ASSERT_DOUBLE_EQ(center_distance(t, u), center_distance(u, t));
    ASSERT_LE(center_distance(t, v), center_distance(t, u) + center_distance(u, v) + 1e-12);
  }
  // Coincident positive-weight points have zero compactness.
  EXPECT_EQ(compactness({{{1, 2}, {1, 2}, {9, 9}}, {0.4, 0.6, 0.0}}), 0.0);
}

TEST(DiagTest, ToyEmbeddingIsSeededAndSerialisable) {
  const auto a = toy_embedding(26, 7);
  const auto b = toy_embedding(26, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(toy_embedding(26, 8), a);
  EXPECT_EQ(parse_embedding(dump_embedding(a)), a);
}

TEST(DiagTest, DiagnoseUsesProbabilitiesAsWeights) {
  Embedding e{{0, {0, 0}}, {1, {4, 0}}, {2, {0, 3}}};
  const DistributionMatrix fused{"v", {1}, {{{0, 1}, {0.25, 0.75}, ValueKind::probabilities}}};
  const DistributionMatrix target{"v", {1}, {{{2}, {0.0}, ValueKind::logits}}};
  const auto d = diagnose(fused, target, e);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0].compactness_fused, 1.5);
  EXPECT_EQ(d[0].compactness_target, 0.0);
  EXPECT_DOUBLE_EQ(d[0].center_distance, std::hypot(3.0, 3.0));
}

}  // namespace
}  // namespace ptalign

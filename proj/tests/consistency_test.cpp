#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace nlvr;
using namespace nlvr::testing;

namespace {

std::vector<std::vector<double>> rows(std::initializer_list<std::vector<double>> r) { return r; }

}  // namespace

TEST(Relevance, AttentionMassOnTheSpan) {
  const auto att = rows({{0.1, 0.2, 0.5, 0.2}});
  const std::vector<ActionId> acts{7};
  EXPECT_EQ(relevant_actions(att, acts, {2, 3}), (ActionSet{7}));   // 0.7
  EXPECT_EQ(relevant_actions(att, acts, {1, 2}), (ActionSet{7}));   // 0.7
  EXPECT_EQ(relevant_actions(att, acts, {0, 1}), ActionSet{});      // 0.3
  EXPECT_EQ(relevant_actions(att, acts, {2, 2}, 0.5), (ActionSet{7}));
  EXPECT_EQ(relevant_actions(att, acts, {0, 3}, 1.0), (ActionSet{7}));
}

TEST(Relevance, FullSpanIncludesEveryAction) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::vector<double>> att;
  std::vector<ActionId> acts;
  for (ActionId a = 0; a < 6; ++a) {
    std::vector<double> r(5);
    double s = 0.0;
    for (auto& x : r) s += (x = u(rng));
    for (auto& x : r) x /= s;
    att.push_back(r);
    acts.push_back(a);
  }
  EXPECT_EQ(relevant_actions(att, acts, {0, 4}).size(), 6u);
}

TEST(Relevance, UniformAttentionOverTenTokensExcludesShortSpans) {
  std::vector<std::vector<double>> att(4, std::vector<double>(10, 0.1));
  const std::vector<ActionId> acts{1, 2, 3, 1};
  EXPECT_TRUE(relevant_actions(att, acts, {3, 5}).empty());
  // repeated action ids collapse
  EXPECT_EQ(relevant_actions(att, acts, {0, 5}), (ActionSet{1, 2, 3}));
}

TEST(Relevance, BadArguments) {
  const auto att = rows({{0.5, 0.5}});
  const std::vector<ActionId> acts{1};
  EXPECT_THROW(relevant_actions(att, acts, {1, 2}), std::out_of_range);
  EXPECT_THROW(relevant_actions(att, acts, {1, 0}), std::out_of_range);
  EXPECT_THROW(relevant_actions(att, std::vector<ActionId>{1, 2}, {0, 0}), std::invalid_argument);
  EXPECT_THROW(relevant_actions(att, acts, {0, 0}, 0.0), std::invalid_argument);
}

TEST(PairConsistency, F1Values) {
  EXPECT_DOUBLE_EQ(pair_consistency({1, 2}, {1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(pair_consistency({1, 2}, {1, 2, 3}), 0.8);
  EXPECT_DOUBLE_EQ(pair_consistency({1, 2}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(pair_consistency({}, {}), 0.0);
  EXPECT_DOUBLE_EQ(pair_consistency({1}, {}), 0.0);
}

TEST(ConsistencyReward, WeightedByNeighborProbabilities) {
  const std::vector<double> w{0.6, 0.4}, s{1.0, 0.5};
  EXPECT_DOUBLE_EQ(consistency_reward(w, s), 0.8);
  EXPECT_DOUBLE_EQ(consistency_reward(std::vector<double>{}, std::vector<double>{}), 0.0);
  EXPECT_THROW(consistency_reward(std::vector<double>{0.6, 0.3}, s), std::invalid_argument);
  EXPECT_THROW(consistency_reward(std::vector<double>{1.0}, s), std::invalid_argument);

  const NeighborSet n{{{1, 2}, {1, 2, 3}}, {0.6, 0.4}};
  EXPECT_DOUBLE_EQ(consistency_reward(ActionSet{1, 2}, n), 0.6 + 0.4 * 0.8);
}

TEST(ConsistencyReward, MultiplePhrasesAndNeighbors) {
  const std::vector<std::pair<double, double>> two{{1.0, 1.0}, {0.0, 1.0}};
  EXPECT_DOUBLE_EQ(multi_phrase_reward(two), 0.5);
  const std::vector<std::pair<double, double>> one{{0.7, 2.0}};
  EXPECT_DOUBLE_EQ(multi_phrase_reward(one), 0.7);
  const std::vector<std::pair<double, double>> skewed{{1.0, 1.0}, {0.0, 0.0}};
  EXPECT_DOUBLE_EQ(multi_phrase_reward(skewed), 1.0);
  EXPECT_THROW(multi_phrase_reward(std::vector<std::pair<double, double>>{}), std::invalid_argument);
  EXPECT_DOUBLE_EQ(multi_neighbor_reward(std::vector<double>{0.4, 0.8}), 0.6);
  EXPECT_THROW(multi_neighbor_reward(std::vector<double>{}), std::invalid_argument);
}

namespace {

struct Draw {
  std::vector<std::vector<double>> att;
  std::vector<ActionId> acts;
};

Draw random_draw(Rng& rng, std::size_t tokens, std::size_t steps) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<ActionId> a(0, 12);
  Draw d;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> r(tokens);
    double s = 0.0;
    for (auto& x : r) s += (x = std::pow(u(rng), 3.0) + 1e-9);
    for (auto& x : r) x /= s;
    d.att.push_back(r);
    d.acts.push_back(a(rng));
  }
  return d;
}

std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = u(rng));
  for (auto& x : w) x /= s;
  return w;
}

}  // namespace

TEST(Property, RewardStaysInUnitInterval) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto x = random_draw(rng, 8, 6);
    const PhraseSpan sx{2, 4};
    const auto cand = relevant_actions(x.att, x.acts, sx);
    NeighborSet n;
    const std::size_t k = 1 + i % 4;
    for (std::size_t j = 0; j < k; ++j) {
      const auto y = random_draw(rng, 9, 7);
      n.relevant.push_back(relevant_actions(y.att, y.acts, {1, 3}));
    }
    n.weights = random_weights(rng, k);
    const double c = consistency_reward(cand, n);
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, 1.0);
  }
}

TEST(Property, RaisingTheThresholdShrinksRelevantSets) {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const auto d = random_draw(rng, 7, 8);
    const PhraseSpan s{static_cast<std::size_t>(i % 4), static_cast<std::size_t>(i % 4 + 2)};
    const auto lo = relevant_actions(d.att, d.acts, s, 0.4);
    const auto mid = relevant_actions(d.att, d.acts, s, 0.6);
    const auto hi = relevant_actions(d.att, d.acts, s, 0.8);
    ASSERT_TRUE(std::ranges::includes(lo, mid));
    ASSERT_TRUE(std::ranges::includes(mid, hi));
  }
}

TEST(Property, PairConsistencyIsSymmetric) {
  Rng rng(13);
  std::uniform_int_distribution<ActionId> a(0, 9);
  for (int i = 0; i < 500; ++i) {
    ActionSet x, y;
    for (int k = i % 6; k > 0; --k) x.insert(a(rng));
    for (int k = i % 5; k > 0; --k) y.insert(a(rng));
    ASSERT_EQ(pair_consistency(x, y), pair_consistency(y, x));
  }
}

TEST(Property, NeighborOrderDoesNotMatter) {
  Rng rng(14);
  std::uniform_int_distribution<ActionId> a(0, 9);
  for (int i = 0; i < 200; ++i) {
    ActionSet cand;
    for (int k = 0; k < 3; ++k) cand.insert(a(rng));
    NeighborSet n;
    for (int j = 0; j < 5; ++j) {
      ActionSet r;
      for (int k = 0; k < 1 + j % 3; ++k) r.insert(a(rng));
      n.relevant.push_back(r);
    }
    n.weights = random_weights(rng, 5);
    NeighborSet shuffled = n;
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t j = 0; j < 5; ++j) {
      shuffled.relevant[j] = n.relevant[perm[j]];
      shuffled.weights[j] = n.weights[perm[j]];
    }
    ASSERT_NEAR(consistency_reward(cand, n), consistency_reward(cand, shuffled), 1e-12);
  }
}

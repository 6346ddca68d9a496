#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace nlvr;
using namespace nlvr::testing;

namespace {

Example utterance(std::string id, const std::string& text) {
  Example e;
  e.id = std::move(id);
  e.text = text;
  e.tokens = tokenize(text);
  return e;
}

std::size_t grounded_count(int set_id) {
  std::size_t n = 0;
  for (const auto& g : ground_templates(builtin_templates())) n += g.set_id == set_id;
  return n;
}

}  // namespace

TEST(Templates, ElevenBuiltinSets) {
  const auto sets = builtin_templates();
  ASSERT_EQ(sets.size(), 11u);
  for (std::size_t i = 0; i < sets.size(); ++i) EXPECT_EQ(sets[i].id, static_cast<int>(i + 1));
  EXPECT_EQ(sets[2].patterns, (std::vector<std::string>{"COLOR1 object above a COLOR2 object"}));
  EXPECT_EQ(sets[6].patterns,
            (std::vector<std::string>{"there are exactly NUMBER towers", "there are exactly NUMBER boxes"}));
  EXPECT_EQ(sets[5].patterns.size(), 4u);
  EXPECT_EQ(sets[10].patterns.size(), 4u);
}

TEST(Templates, GroundingCounts) {
  EXPECT_EQ(grounded_count(5), 3u);
  EXPECT_EQ(grounded_count(3), 9u);
  EXPECT_EQ(grounded_count(6), 4u);
  EXPECT_EQ(grounded_count(7), 18u);
  EXPECT_EQ(grounded_count(11), 4u * 9 * 3 * 6);
  std::set<std::string> texts;
  for (const auto& g : ground_templates(builtin_templates()))
    if (g.set_id == 3) texts.insert(g.text());
  EXPECT_TRUE(texts.contains("yellow object above a blue object"));
  EXPECT_TRUE(texts.contains("black object above a black object"));
}

TEST(Templates, EquivalentPatternsShareAGroup) {
  std::map<std::string, std::string> group_of;
  for (const auto& g : ground_templates(builtin_templates())) group_of[g.text()] = g.group;
  EXPECT_EQ(group_of.at("there are exactly 2 towers"), group_of.at("there are exactly 2 boxes"));
  EXPECT_NE(group_of.at("there are exactly 2 towers"), group_of.at("there are exactly 3 towers"));
  EXPECT_EQ(group_of.at("with 2 blue squares"), group_of.at("are only 2 blue square"));
  EXPECT_NE(group_of.at("yellow object above a blue object"), group_of.at("blue object above a yellow object"));
}

TEST(FindPhrase, FirstContiguousOccurrence) {
  const auto toks = tokenize("there is a yellow object above a blue object and a yellow object above a blue object");
  const auto span = find_phrase(toks, tokenize("yellow object above a blue object"));
  ASSERT_TRUE(span);
  EXPECT_EQ(*span, (PhraseSpan{3, 8}));
  EXPECT_FALSE(find_phrase(toks, tokenize("blue object above")));
  EXPECT_FALSE(find_phrase(toks, {}));
}

TEST(BuildPairs, SharedPhraseGivesOnePairPerUtterance) {
  const Corpus corpus{utterance("a", "there is a yellow tower"), utterance("b", "a yellow tower is here"),
                      utterance("c", "i see a yellow tower"), utterance("d", "nothing to see")};
  PairingStats stats;
  const auto pairs = build_pairs(corpus, builtin_templates(), 1, &stats);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(stats.matched_utterances, 3u);
  std::set<std::string> xs;
  for (const auto& p : pairs) {
    xs.insert(p.x);
    EXPECT_NE(p.x, p.x_prime);
    EXPECT_NE(p.x, "d");
    EXPECT_NE(p.x_prime, "d");
    EXPECT_EQ(p.set_id, 5);
    EXPECT_EQ(p.phrase, "a yellow tower");
  }
  EXPECT_EQ(xs, (std::set<std::string>{"a", "b", "c"}));
}

TEST(BuildPairs, SingletonsAndMismatchedBindingsDoNotPair) {
  const Corpus corpus{utterance("a", "a yellow tower"), utterance("b", "a blue tower"),
                      utterance("c", "there are exactly 2 boxes")};
  PairingStats stats;
  EXPECT_TRUE(build_pairs(corpus, builtin_templates(), 1, &stats).empty());
  EXPECT_EQ(stats.singleton_groups.size(), 3u);
}

TEST(BuildPairs, SpansSliceToEquivalentPhrases) {
  const auto gen = generate_corpus(7, 200, builtin_utterance_templates());
  const auto pairs = build_pairs(gen.examples, builtin_templates(), 7);
  ASSERT_FALSE(pairs.empty());
  std::map<std::string, const Example*> by_id;
  for (const auto& e : gen.examples) by_id[e.id] = &e;
  std::map<std::string, std::string> group_of;
  for (const auto& g : ground_templates(builtin_templates())) group_of[g.text()] = g.group;
  auto slice = [](const Example& e, PhraseSpan s) {
    std::string out;
    for (std::size_t i = s.start; i <= s.end; ++i) out += (out.empty() ? "" : " ") + e.tokens[i];
    return out;
  };
  for (const auto& p : pairs) {
    ASSERT_NE(p.x, p.x_prime);
    const auto a = slice(*by_id.at(p.x), p.span_x);
    const auto b = slice(*by_id.at(p.x_prime), p.span_x_prime);
    EXPECT_EQ(a, p.phrase);
    ASSERT_TRUE(group_of.contains(a)) << a;
    ASSERT_TRUE(group_of.contains(b)) << b;
    EXPECT_EQ(group_of.at(a), group_of.at(b)) << a << " / " << b;
  }
}

TEST(BuildPairs, DeterministicPerSeed) {
  const auto gen = generate_corpus(7, 200, builtin_utterance_templates());
  const auto a = build_pairs(gen.examples, builtin_templates(), 7);
  EXPECT_EQ(a, build_pairs(gen.examples, builtin_templates(), 7));
  EXPECT_NE(a, build_pairs(gen.examples, builtin_templates(), 8));
}

TEST(PairsFile, JsonRoundTripAndErrors) {
  const auto gen = generate_corpus(7, 100, builtin_utterance_templates());
  const auto pairs = build_pairs(gen.examples, builtin_templates(), 3);
  EXPECT_EQ(pairs_from_json(nlohmann::json::parse(pairs_to_json(pairs).dump())), pairs);
  EXPECT_THROW(pairs_from_json(nlohmann::json::object()), DataError);
  EXPECT_THROW(pairs_from_json(nlohmann::json::parse(R"([{"x":"a"}])")), DataError);
  EXPECT_THROW(pairs_from_json(nlohmann::json::parse(R"([{"x":"a","x_prime":"b","span_x":[3,1],"span_x_prime":[0,0]}])")),
               DataError);
}

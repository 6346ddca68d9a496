#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace nlvr;
using namespace nlvr::testing;

namespace {

UtteranceRecord record(std::string id, std::vector<bool> pred, std::vector<bool> gold) {
  UtteranceRecord r{std::move(id), "p", pred, gold, 0};
  for (std::size_t i = 0; i < gold.size(); ++i) r.correct += pred[i] == gold[i];
  return r;
}

}  // namespace

TEST(Metrics, PartialUtteranceCountsTowardAccuracyOnly) {
  EvalReport r;
  r.records.push_back(record("a", {true, true, false, false}, {true, true, false, true}));
  summarize(r);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.consistency, 0.0);
  EXPECT_EQ(r.scenes, 4u);
}

TEST(Metrics, PerfectPredictions) {
  EvalReport r;
  r.records.push_back(record("a", {true, false}, {true, false}));
  r.records.push_back(record("b", {false, false, true}, {false, false, true}));
  summarize(r);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.consistency, 1.0);
}

TEST(Metrics, MixedUtterances) {
  EvalReport r;
  r.records.push_back(record("a", {true, false}, {true, false}));
  r.records.push_back(record("b", {true, true}, {false, false}));
  summarize(r);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.consistency, 0.5);
  const auto j = to_json(r, true);
  EXPECT_EQ(j.at("records").size(), 2u);
  EXPECT_EQ(j.at("utterances"), 2);
  EXPECT_FALSE(to_json(r).contains("records"));
  EvalReport empty;
  summarize(empty);
  EXPECT_EQ(empty.accuracy, 0.0);
}

TEST(Evaluate, RecordsAgreeWithSummary) {
  const auto gen = generate_corpus(3, 20, builtin_utterance_templates());
  const Grammar g = build_grammar(LanguageVariant::New);
  auto rep = evaluate(ScorerParams::zeros(g), gen.examples, g, 3);
  ASSERT_EQ(rep.records.size(), 20u);
  const double acc = rep.accuracy, con = rep.consistency;
  summarize(rep);
  EXPECT_EQ(rep.accuracy, acc);
  EXPECT_EQ(rep.consistency, con);
  for (const auto& rec : rep.records) {
    EXPECT_FALSE(rec.program.empty());
    EXPECT_EQ(rec.predictions.size(), rec.denotations.size());
  }
  EXPECT_EQ(to_json(evaluate(ScorerParams::zeros(g), gen.examples, g, 3, 4)), to_json(rep));
}

TEST(Evaluate, GoldProgramsScorePerfectly) {
  // a model that only ever emits the gold program of each utterance
  const auto gen = generate_corpus(3, 30, builtin_utterance_templates());
  const Grammar g = build_grammar(LanguageVariant::New);
  EvalReport r;
  for (std::size_t i = 0; i < gen.examples.size(); ++i) {
    const Program p = parse_text(g, gen.gold_programs[i]);
    UtteranceRecord rec{gen.examples[i].id, gen.gold_programs[i], {}, {}, 0};
    for (const auto& s : gen.examples[i].scenes) {
      rec.predictions.push_back(execute(g, p, s.scene));
      rec.denotations.push_back(s.denotation);
      rec.correct += rec.predictions.back() == s.denotation;
    }
    r.records.push_back(rec);
  }
  summarize(r);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.consistency, 1.0);
}

TEST(Probe, BuiltinPairs) {
  const auto res = language_consistency_probe(builtin_probe_cases());
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].label, "x1/x2");
  EXPECT_DOUBLE_EQ(res[0].f1_old, 0.5);
  EXPECT_DOUBLE_EQ(res[0].f1_new, 1.0);
  EXPECT_EQ(res[1].label, "x3/x4");
  EXPECT_DOUBLE_EQ(res[1].f1_old, 0.0);
  EXPECT_DOUBLE_EQ(res[1].f1_new, 1.0);
  for (const auto& r : res) EXPECT_GT(r.f1_new, r.f1_old);
}

TEST(Probe, AnnotationsMustOccurInTheProgram) {
  const Grammar g = build_grammar(LanguageVariant::New);
  EXPECT_THROW(annotated_actions(g, {"objExists(allObjs)", {"boxExists"}}), DataError);
  EXPECT_THROW(annotated_actions(g, {"objExists(allObjs)", {"nope"}}), DataError);
  EXPECT_THROW(annotated_actions(g, {"objExists(", {}}), DataError);
  EXPECT_EQ(annotated_actions(g, {"objExists(allObjs)", {"allObjs"}}), ActionSet{*g.find_terminal("allObjs")});
  auto cases = builtin_probe_cases();
  cases[0].old_second.program = "boxExists(boxFilter(allBoxes, objColorCountGrtEq(2)))";
  EXPECT_THROW(language_consistency_probe(cases), DataError);
}

TEST(Ablation, SmallRunProducesEveryConfiguration) {
  AblationConfig cfg;
  cfg.train_utterances = 30;
  cfg.dev_utterances = 20;
  cfg.seeds = {0, 1};
  cfg.train.iterations = 1;
  cfg.train.mml_epochs = 1;
  cfg.train.rbm_epochs = 1;
  cfg.train.beam_size = 4;
  cfg.train.eval_each_epoch = false;
  std::size_t runs = 0;
  const auto rep = run_ablation(cfg, [&](const AblationRun&) { ++runs; });
  EXPECT_EQ(runs, 8u);
  ASSERT_EQ(rep.rows.size(), 4u);
  for (auto name : {"old", "old+reward", "new", "new+reward"}) {
    const auto* row = rep.find(name);
    ASSERT_NE(row, nullptr) << name;
    EXPECT_GE(row->accuracy_mean, 0.0);
    EXPECT_LE(row->accuracy_mean, 1.0);
    EXPECT_GE(row->consistency_sd, 0.0);
  }
  EXPECT_EQ(rep.find("nothing"), nullptr);
  EXPECT_EQ(to_json(rep).at("runs").size(), 8u);
  EXPECT_NE(format_ablation_table(rep).find("new+reward"), std::string::npos);

  cfg.include_old_with_reward = false;
  cfg.seeds = {0};
  EXPECT_EQ(run_ablation(cfg).rows.size(), 3u);
}

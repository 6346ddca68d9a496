#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "consistency.hpp"
#include "generator.hpp"
#include "grammar.hpp"
#include "pairing.hpp"
#include "program.hpp"
#include "training.hpp"

namespace nlvr {

// ---------------------------------------------------------------------------
// Language-design probe: gold programs with hand-marked phrase-relevant parts
// ---------------------------------------------------------------------------

/// A gold program and the terminals that realize the shared phrase in it.
struct ProbeSide {
  std::string program;
  std::vector<std::string> relevant;
};

/// Two utterances sharing a phrase, written in both languages.
struct ProbeCase {
  std::string label;
  std::string phrase;
  ProbeSide old_first, old_second;
  ProbeSide new_first, new_second;
};

struct ProbeResult {
  std::string label;
  double f1_old = 0.0;
  double f1_new = 0.0;
};

/// Action ids of the named terminals; each must occur in the parsed program.
inline ActionSet annotated_actions(const Grammar& g, const ProbeSide& side) {
  const Program p = parse_text(g, side.program);
  ActionSet out;
  for (const auto& name : side.relevant) {
    auto a = g.find_terminal(name);
    if (!a || std::ranges::find(p.actions, *a) == p.actions.end())
      throw DataError("probe: '" + name + "' does not occur in " + side.program);
    out.insert(*a);
  }
  return out;
}

inline std::vector<ProbeResult> language_consistency_probe(const std::vector<ProbeCase>& cases) {
  const Grammar old_g = build_grammar(LanguageVariant::Old);
  const Grammar new_g = build_grammar(LanguageVariant::New);
  std::vector<ProbeResult> out;
  for (const auto& c : cases) {
    ProbeResult r{c.label};
    r.f1_old = pair_consistency(annotated_actions(old_g, c.old_first), annotated_actions(old_g, c.old_second));
    r.f1_new = pair_consistency(annotated_actions(new_g, c.new_first), annotated_actions(new_g, c.new_second));
    out.push_back(std::move(r));
  }
  return out;
}

/// The two motivating pairs: a color-count phrase used at scene level and at
/// box level, and "there is a box/tower" with and without a box quantifier.
inline std::vector<ProbeCase> builtin_probe_cases() {
  return {
      {"x1/x2",
       "items of at least 2 different colors",
       {"objColorCountGrtEq(2, allObjs)", {"objColorCountGrtEq", "2"}},
       {"boxExists(memberColorCountGrtEq(2, allBoxes))", {"memberColorCountGrtEq", "2"}},
       {"objColorCountGrtEq(2, allObjs)", {"objColorCountGrtEq", "2"}},
       {"boxCountEq(1, boxFilter(allBoxes, objColorCountGrtEq(2)))", {"objColorCountGrtEq", "2"}}},
      {"x3/x4",
       "there is a box",
       {"boxExists(memberObjCountEq(1, allBoxes))", {"boxExists", "allBoxes"}},
       {"objExists(black(top(allObjs)))", {"objExists", "allObjs"}},
       {"boxExists(boxFilter(allBoxes, objectCountEq(1)))", {"boxExists", "boxFilter", "allBoxes"}},
       {"boxExists(boxFilter(allBoxes, black(top)))", {"boxExists", "boxFilter", "allBoxes"}}},
  };
}

inline nlohmann::json to_json(const std::vector<ProbeResult>& results) {
  auto arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back({{"pair", r.label}, {"f1_old", r.f1_old}, {"f1_new", r.f1_new}});
  return arr;
}

// ---------------------------------------------------------------------------
// Ablation over language variant and consistency reward
// ---------------------------------------------------------------------------

struct AblationConfig {
  std::uint64_t corpus_seed = 7;
  std::uint64_t dev_seed = 1007;
  std::size_t train_utterances = 200;
  std::size_t dev_utterances = 200;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  TrainConfig train;  // variant, use_consistency and seed are set per run
  bool include_old_with_reward = true;
  unsigned jobs = 1;
};

struct AblationRun {
  std::string config;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double consistency = 0.0;
  double seconds = 0.0;
};

struct AblationRow {
  std::string config;
  LanguageVariant variant = LanguageVariant::New;
  bool reward = false;
  double accuracy_mean = 0.0, accuracy_sd = 0.0;
  double consistency_mean = 0.0, consistency_sd = 0.0;
  double max_seconds = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationRun> runs;
  std::size_t paired_utterances = 0;
  std::size_t pairs = 0;

  const AblationRow* find(std::string_view name) const {
    for (const auto& r : rows)
      if (r.config == name) return &r;
    return nullptr;
  }
};

inline std::string ablation_name(LanguageVariant v, bool reward) {
  return std::string(to_string(v)) + (reward ? "+reward" : "");
}

/// Trains every (language, reward) configuration once per seed on one
/// generated corpus and scores each run on a separately generated dev corpus.
/// Seeds change the utterance order of every epoch.
inline AblationReport run_ablation(const AblationConfig& cfg,
                                   const std::function<void(const AblationRun&)>& on_run = {}) {
  const auto templates = builtin_utterance_templates();
  const auto train = generate_corpus(cfg.corpus_seed, cfg.train_utterances, templates);
  const auto dev = generate_corpus(cfg.dev_seed, cfg.dev_utterances, templates);
  PairingStats stats;
  const auto pairs = build_pairs(train.examples, builtin_templates(), cfg.corpus_seed, &stats);

  AblationReport report;
  report.paired_utterances = stats.matched_utterances;
  report.pairs = stats.pairs;

  std::vector<std::pair<LanguageVariant, bool>> configs{
      {LanguageVariant::Old, false}, {LanguageVariant::New, false}, {LanguageVariant::New, true}};
  if (cfg.include_old_with_reward) configs.insert(configs.begin() + 1, {LanguageVariant::Old, true});

  for (auto [variant, reward] : configs) {
    const Grammar g = build_grammar(variant);
    const auto z = search_program_sets(g, train.examples, {cfg.train.search_max_actions, cfg.train.search_max_programs},
                                       cfg.jobs);
    AblationRow row{ablation_name(variant, reward), variant, reward};
    std::vector<double> acc, con;
    for (auto seed : cfg.seeds) {
      TrainConfig tc = cfg.train;
      tc.variant = variant;
      tc.use_consistency = reward;
      tc.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const auto trained = iterative_train(tc, train.examples, pairs, &z);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto rep = evaluate(trained.params, dev.examples, g, tc.beam_size, cfg.jobs);
      AblationRun run{row.config, seed, rep.accuracy, rep.consistency, secs};
      acc.push_back(run.accuracy);
      con.push_back(run.consistency);
      row.max_seconds = std::max(row.max_seconds, secs);
      report.runs.push_back(run);
      if (on_run) on_run(run);
    }
    auto mean_sd = [](const std::vector<double>& xs) {
      double m = 0.0;
      for (double x : xs) m += x;
      m /= static_cast<double>(xs.size());
      double v = 0.0;
      for (double x : xs) v += (x - m) * (x - m);
      return std::pair{m, xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0};
    };
    std::tie(row.accuracy_mean, row.accuracy_sd) = mean_sd(acc);
    std::tie(row.consistency_mean, row.consistency_sd) = mean_sd(con);
    report.rows.push_back(row);
  }
  return report;
}

inline nlohmann::json to_json(const AblationReport& r) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"config", row.config},
                    {"accuracy_mean", row.accuracy_mean},
                    {"accuracy_sd", row.accuracy_sd},
                    {"consistency_mean", row.consistency_mean},
                    {"consistency_sd", row.consistency_sd},
                    {"max_seconds", row.max_seconds}});
  auto runs = nlohmann::json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"config", run.config},
                    {"seed", run.seed},
                    {"accuracy", run.accuracy},
                    {"consistency", run.consistency},
                    {"seconds", run.seconds}});
  return {{"rows", rows}, {"runs", runs}, {"paired_utterances", r.paired_utterances}, {"pairs", r.pairs}};
}

/// Fixed-width text table, one row per configuration.
inline std::string format_ablation_table(const AblationReport& r) {
  std::string out = "config          accuracy          consistency\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-14s  %5.1f +- %4.1f     %5.1f +- %4.1f\n", row.config.c_str(),
                  100 * row.accuracy_mean, 100 * row.accuracy_sd, 100 * row.consistency_mean,
                  100 * row.consistency_sd);
    out += buf;
  }
  return out;
}

}  // namespace nlvr

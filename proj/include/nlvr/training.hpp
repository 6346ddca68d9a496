#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "beam.hpp"
#include "consistency.hpp"
#include "grammar.hpp"
#include "model.hpp"
#include "pairing.hpp"
#include "scene.hpp"
#include "search.hpp"
#include "util.hpp"

namespace nlvr {

struct TrainConfig {
  LanguageVariant variant = LanguageVariant::New;
  std::size_t beam_size = 10;
  double tau = kDefaultRelevanceThreshold;
  double learning_rate = 0.1;
  int mml_epochs = 2;
  int rbm_epochs = 2;
  int iterations = 3;
  int search_max_actions = 14;
  std::size_t search_max_programs = 20;
  int max_actions = kDefaultMaxActions;
  bool use_consistency = false;  // needs pairs
  bool eval_each_epoch = true;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const char* what) { throw std::invalid_argument(std::string("train config: ") + what); };
    if (beam_size < 1) bad("beam_size must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) bad("tau must lie in (0, 1]");
    if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
    if (mml_epochs < 0 || rbm_epochs < 0 || mml_epochs + rbm_epochs == 0) bad("epochs must be >= 0 and not both 0");
    if (iterations < 1) bad("iterations must be positive");
    if (search_max_actions < 1 || search_max_programs < 1) bad("search budget must be positive");
    if (max_actions < 1) bad("max_actions must be positive");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"beam_size", c.beam_size},
          {"tau", c.tau},
          {"learning_rate", c.learning_rate},
          {"mml_epochs", c.mml_epochs},
          {"rbm_epochs", c.rbm_epochs},
          {"iterations", c.iterations},
          {"search_max_actions", c.search_max_actions},
          {"search_max_programs", c.search_max_programs},
          {"max_actions", c.max_actions},
          {"use_consistency", c.use_consistency},
          {"eval_each_epoch", c.eval_each_epoch},
          {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected so typos surface.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  if (!j.is_object()) throw DataError("train config: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "variant") {
        auto parsed = parse_variant(v.get<std::string>());
        if (!parsed) throw DataError("train config: variant must be 'old' or 'new'");
        c.variant = *parsed;
      }
      else if (key == "beam_size") c.beam_size = v.get<std::size_t>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "mml_epochs") c.mml_epochs = v.get<int>();
      else if (key == "rbm_epochs") c.rbm_epochs = v.get<int>();
      else if (key == "iterations") c.iterations = v.get<int>();
      else if (key == "search_max_actions") c.search_max_actions = v.get<int>();
      else if (key == "search_max_programs") c.search_max_programs = v.get<std::size_t>();
      else if (key == "max_actions") c.max_actions = v.get<int>();
      else if (key == "use_consistency") c.use_consistency = v.get<bool>();
      else if (key == "eval_each_epoch") c.eval_each_epoch = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw DataError("train config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

struct ObjectiveResult {
  double value = 0.0;             // MML: loss (minimize); the others: objective (maximize)
  ScorerParams grad;
  std::vector<double> weights;    // q over Z for MML, p~ over the beam otherwise
  std::vector<double> rewards;    // per candidate; empty for MML
  std::vector<double> consistency;  // per candidate C; consistency objective only
};

/// -log sum_z p(z|x) and its gradient -sum_z q(z) grad log p(z|x).
inline ObjectiveResult mml_loss_and_grad(const ScorerParams& params, const ActionSpace& space,
                                         std::span<const std::string> tokens, std::span<const Program> z_set,
                                         int max_actions = kDefaultMaxActions) {
  if (z_set.empty()) throw std::invalid_argument("mml_loss_and_grad: empty program set");
  std::vector<double> lps;
  lps.reserve(z_set.size());
  for (const auto& z : z_set) lps.push_back(program_log_prob(params, space, tokens, z, max_actions).log_prob);
  ObjectiveResult out;
  out.value = -detail::log_sum_exp(lps);
  out.weights = detail::softmax(lps);
  out.grad = zeros_like(params);
  for (std::size_t i = 0; i < z_set.size(); ++i)
    accumulate_log_prob_grad(params, space, tokens, z_set[i], -out.weights[i], out.grad, max_actions);
  return out;
}

/// sum_z p~(z) r(z) over a fixed candidate set, with the exact gradient
/// sum_z p~(z) (r(z) - J) grad log p(z).
inline ObjectiveResult expected_reward_and_grad(const ScorerParams& params, const ActionSpace& space,
                                                std::span<const std::string> tokens,
                                                std::span<const Program> candidates, std::span<const double> rewards,
                                                int max_actions = kDefaultMaxActions) {
  if (candidates.size() != rewards.size()) throw std::invalid_argument("expected_reward_and_grad: size mismatch");
  ObjectiveResult out;
  out.grad = zeros_like(params);
  out.rewards.assign(rewards.begin(), rewards.end());
  if (candidates.empty()) return out;
  std::vector<double> lps;
  lps.reserve(candidates.size());
  for (const auto& z : candidates) lps.push_back(program_log_prob(params, space, tokens, z, max_actions).log_prob);
  out.weights = detail::softmax(lps);
  for (std::size_t i = 0; i < candidates.size(); ++i) out.value += out.weights[i] * rewards[i];
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double coef = out.weights[i] * (rewards[i] - out.value);
    if (coef != 0.0) accumulate_log_prob_grad(params, space, tokens, candidates[i], coef, out.grad, max_actions);
  }
  return out;
}

inline std::vector<Program> beam_programs(const Beam& beam) {
  std::vector<Program> out;
  out.reserve(beam.size());
  for (const auto& c : beam) out.push_back(c.program);
  return out;
}

/// 1 when the program reproduces every denotation of the example, else 0.
inline std::vector<double> denotation_rewards(const Grammar& g, const Beam& beam, std::span<const LabeledScene> scenes) {
  auto index = index_scenes(scenes);
  std::vector<double> r;
  r.reserve(beam.size());
  for (const auto& c : beam) r.push_back(correct_on_all(g, c.program, index, scenes) ? 1.0 : 0.0);
  return r;
}

inline ObjectiveResult rbm_objective_and_grad(const ScorerParams& params, const ActionSpace& space, const Example& ex,
                                              const Beam& beam, int max_actions = kDefaultMaxActions) {
  const auto rewards = denotation_rewards(space.grammar(), beam, ex.scenes);
  const auto programs = beam_programs(beam);
  return expected_reward_and_grad(params, space, ex.tokens, programs, rewards, max_actions);
}

/// One related utterance as seen from x: the span of the shared phrase in x
/// and the relevant-action view of x''s correct, renormalized beam.
struct NeighborContext {
  PhraseSpan span_x;
  NeighborSet neighbor;
};

inline NeighborSet make_neighbor_set(const Grammar& g, const Beam& neighbor_beam,
                                     std::span<const LabeledScene> neighbor_scenes, PhraseSpan span_x_prime,
                                     double tau = kDefaultRelevanceThreshold) {
  NeighborSet out;
  const Beam correct = filter_correct(g, neighbor_beam, neighbor_scenes);
  if (correct.empty()) return out;
  out.weights = renormalize(correct);
  for (const auto& c : correct) out.relevant.push_back(relevant_actions(c.attention, c.program, span_x_prime, tau));
  return out;
}

/// C(x, z) for every candidate of x's beam, averaged over the neighbors.
inline std::vector<double> consistency_rewards(const Beam& beam_x, std::span<const NeighborContext> neighbors,
                                               std::size_t num_tokens, double tau = kDefaultRelevanceThreshold) {
  std::vector<double> out(beam_x.size(), 0.0);
  if (neighbors.empty()) return out;
  for (const auto& n : neighbors)
    if (n.span_x.start > n.span_x.end || n.span_x.end >= num_tokens)
      throw DataError("consistency objective: phrase span [" + std::to_string(n.span_x.start) + ", " +
                      std::to_string(n.span_x.end) + "] does not fit an utterance of " + std::to_string(num_tokens) +
                      " tokens");
  for (std::size_t i = 0; i < beam_x.size(); ++i) {
    std::vector<double> per_neighbor;
    per_neighbor.reserve(neighbors.size());
    for (const auto& n : neighbors) {
      const auto a = relevant_actions(beam_x[i].attention, beam_x[i].program, n.span_x, tau);
      per_neighbor.push_back(consistency_reward(a, n.neighbor));
    }
    out[i] = multi_neighbor_reward(per_neighbor);
  }
  return out;
}

/// Expected R + C over x's renormalized beam; C is a constant reward.
inline ObjectiveResult consistency_objective_and_grad(const ScorerParams& params, const ActionSpace& space,
                                                      const Example& ex, const Beam& beam,
                                                      std::span<const NeighborContext> neighbors,
                                                      double tau = kDefaultRelevanceThreshold,
                                                      int max_actions = kDefaultMaxActions) {
  if (neighbors.empty()) throw DataError("consistency objective: utterance " + ex.id + " has no paired phrase spans");
  auto rewards = denotation_rewards(space.grammar(), beam, ex.scenes);
  const auto c = consistency_rewards(beam, neighbors, ex.tokens.size(), tau);
  for (std::size_t i = 0; i < rewards.size(); ++i) rewards[i] += c[i];
  const auto programs = beam_programs(beam);
  auto out = expected_reward_and_grad(params, space, ex.tokens, programs, rewards, max_actions);
  out.consistency = c;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation metrics (used for per-epoch logging as well as by eval)
// ---------------------------------------------------------------------------

struct UtteranceRecord {
  std::string id;
  std::string program;              // empty when the beam came back empty
  std::vector<bool> predictions;    // per scene; false when no program
  std::vector<bool> denotations;
  std::size_t correct = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double consistency = 0.0;
  std::size_t scenes = 0;
  std::vector<UtteranceRecord> records;
};

/// Recomputes both metrics from the records alone.
inline void summarize(EvalReport& r) {
  std::size_t correct_scenes = 0, all_correct = 0;
  r.scenes = 0;
  for (const auto& u : r.records) {
    correct_scenes += u.correct;
    r.scenes += u.denotations.size();
    if (!u.denotations.empty() && u.correct == u.denotations.size()) ++all_correct;
  }
  r.accuracy = r.scenes ? static_cast<double>(correct_scenes) / static_cast<double>(r.scenes) : 0.0;
  r.consistency = r.records.empty() ? 0.0 : static_cast<double>(all_correct) / static_cast<double>(r.records.size());
}

/// Decodes the top-1 program per utterance and scores it on every scene. An
/// utterance whose beam is empty counts as wrong everywhere.
inline EvalReport evaluate(const ScorerParams& params, const Corpus& corpus, const Grammar& g,
                           std::size_t beam_size = 10, unsigned jobs = 1) {
  EvalReport report;
  report.records.resize(corpus.size());
  const ActionSpace space(g);
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const auto& ex = corpus[i];
    auto& rec = report.records[i];
    rec.id = ex.id;
    const Beam beam = beam_search(params, space, ex.tokens, {beam_size, kDefaultMaxActions});
    for (const auto& ls : ex.scenes) {
      rec.denotations.push_back(ls.denotation);
      bool pred = false;
      if (!beam.empty()) pred = execute(g, beam.front().program, SceneIndex(ls.scene));
      rec.predictions.push_back(pred);
      if (!beam.empty() && pred == ls.denotation) ++rec.correct;
    }
    if (!beam.empty()) rec.program = pretty_print(g, beam.front().program);
  });
  summarize(report);
  return report;
}

inline nlohmann::json to_json(const EvalReport& r, bool per_utterance = false) {
  nlohmann::json j{{"accuracy", r.accuracy},
                   {"consistency", r.consistency},
                   {"utterances", r.records.size()},
                   {"scenes", r.scenes}};
  if (per_utterance) {
    auto arr = nlohmann::json::array();
    for (const auto& u : r.records)
      arr.push_back({{"id", u.id},
                     {"program", u.program},
                     {"predictions", u.predictions},
                     {"denotations", u.denotations},
                     {"correct", u.correct}});
    j["records"] = std::move(arr);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Iterative MML / RBM training
// ---------------------------------------------------------------------------

struct EpochMetrics {
  std::string phase;  // "mml" or "rbm"
  int iteration = 0;
  int epoch = 0;
  double accuracy = 0.0;
  double consistency = 0.0;
  double mean_reward = 0.0;  // MML: mean log marginal likelihood; RBM: mean objective
  std::size_t trained = 0;   // utterances that contributed an update

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

inline nlohmann::json to_json(const EpochMetrics& m) {
  return {{"phase", m.phase},           {"iteration", m.iteration},     {"epoch", m.epoch},
          {"accuracy", m.accuracy},     {"consistency", m.consistency}, {"mean_reward", m.mean_reward},
          {"trained", m.trained}};
}

struct PhaseCheckpoint {
  std::string phase;
  int iteration = 0;
  ScorerParams params;
};

struct TrainResult {
  ScorerParams params;
  std::vector<PhaseCheckpoint> checkpoints;
  std::vector<EpochMetrics> metrics;
  std::size_t searchable = 0;  // utterances with a non-empty heuristic program set
};

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(const PhaseCheckpoint&)> on_checkpoint;
};

/// Heuristic program sets for every utterance; reusable across runs that
/// share a corpus and grammar.
inline std::vector<std::vector<Program>> search_program_sets(const Grammar& g, const Corpus& corpus,
                                                             const HeuristicSearchConfig& cfg, unsigned jobs = 1) {
  std::vector<std::vector<Program>> z(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) { z[i] = heuristic_search(g, corpus[i], cfg); });
  return z;
}

namespace detail {

struct PairIndex {
  // for each utterance index: (neighbor index, span in x, span in x')
  struct Link {
    std::size_t neighbor;
    PhraseSpan span_x;
    PhraseSpan span_x_prime;
  };
  std::vector<std::vector<Link>> links;
  std::vector<bool> is_neighbor;
};

inline PairIndex index_pairs(const Corpus& corpus, std::span<const UtterancePair> pairs) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_id[corpus[i].id] = i;
  PairIndex idx;
  idx.links.resize(corpus.size());
  idx.is_neighbor.assign(corpus.size(), false);
  auto find = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("pairs: utterance id '" + id + "' is not in the corpus");
    return it->second;
  };
  for (const auto& p : pairs) {
    const std::size_t x = find(p.x), xp = find(p.x_prime);
    if (p.span_x.end >= corpus[x].tokens.size() || p.span_x_prime.end >= corpus[xp].tokens.size())
      throw DataError("pairs: span out of range for pair (" + p.x + ", " + p.x_prime + ")");
    idx.links[x].push_back({xp, p.span_x, p.span_x_prime});
    idx.is_neighbor[xp] = true;
  }
  return idx;
}

}  // namespace detail

/// Alternates MML on program sets with (optionally consistency-augmented)
/// reward-based epochs. Parameters start at zero; the seed orders the
/// utterances of every epoch. `initial_sets` may carry precomputed heuristic
/// program sets for this corpus and grammar.
inline TrainResult iterative_train(const TrainConfig& cfg, const Corpus& corpus,
                                   std::span<const UtterancePair> pairs = {},
                                   const std::vector<std::vector<Program>>* initial_sets = nullptr,
                                   const TrainHooks& hooks = {}) {
  cfg.validate();
  if (corpus.empty()) throw DataError("training: empty corpus");
  if (cfg.use_consistency && pairs.empty()) throw DataError("training: consistency reward requested without pairs");
  const Grammar g = build_grammar(cfg.variant);
  const ActionSpace space(g);
  const BeamConfig beam_cfg{cfg.beam_size, cfg.max_actions};

  std::vector<std::vector<Program>> heuristic;
  if (initial_sets) {
    if (initial_sets->size() != corpus.size()) throw std::invalid_argument("training: program sets do not match corpus");
    heuristic = *initial_sets;
  } else {
    heuristic = search_program_sets(g, corpus, {cfg.search_max_actions, cfg.search_max_programs});
  }
  TrainResult result;
  result.searchable = static_cast<std::size_t>(std::ranges::count_if(heuristic, [](const auto& z) { return !z.empty(); }));
  if (result.searchable == 0)
    throw DataError("training: no utterance has a program that is correct on all of its scenes within " +
                    std::to_string(cfg.search_max_actions) + " actions in the " + std::string(to_string(cfg.variant)) +
                    " language; nothing to train on");

  const auto pair_index = detail::index_pairs(corpus, pairs);
  ScorerParams params = ScorerParams::zeros(g);

  std::vector<std::size_t> order(corpus.size());
  auto shuffled = [&](std::uint64_t tag) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, tag));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  };
  auto record = [&](EpochMetrics m) {
    if (cfg.eval_each_epoch) {
      auto report = evaluate(params, corpus, g, cfg.beam_size);
      m.accuracy = report.accuracy;
      m.consistency = report.consistency;
    }
    result.metrics.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
  };
  auto checkpoint = [&](const char* phase, int it) {
    result.checkpoints.push_back({phase, it, params});
    if (hooks.on_checkpoint) hooks.on_checkpoint(result.checkpoints.back());
  };

  std::uint64_t epoch_tag = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    // Phase A: program sets, then MML
    std::vector<std::vector<Program>> z_sets = heuristic;
    if (it > 1) {
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Beam beam = filter_correct(g, beam_search(params, space, corpus[i].tokens, beam_cfg), corpus[i].scenes);
        if (!beam.empty()) z_sets[i] = beam_programs(beam);
      }
    }
    for (int e = 1; e <= cfg.mml_epochs; ++e) {
      EpochMetrics m{"mml", it, e};
      double total = 0.0;
      for (std::size_t i : shuffled(++epoch_tag)) {
        if (z_sets[i].empty()) continue;
        auto r = mml_loss_and_grad(params, space, corpus[i].tokens, z_sets[i], cfg.max_actions);
        params.add_scaled(r.grad, -cfg.learning_rate);
        total += -r.value;
        ++m.trained;
      }
      m.mean_reward = m.trained ? total / static_cast<double>(m.trained) : 0.0;
      record(m);
    }
    if (cfg.mml_epochs > 0) checkpoint("mml", it);

    // Phase B: expected reward over the renormalized beam
    for (int e = 1; e <= cfg.rbm_epochs; ++e) {
      std::map<std::pair<std::size_t, std::pair<std::size_t, std::size_t>>, NeighborSet> by_span;
      std::vector<Beam> neighbor_beams(corpus.size());
      if (cfg.use_consistency)
        for (std::size_t i = 0; i < corpus.size(); ++i)
          if (pair_index.is_neighbor[i]) neighbor_beams[i] = beam_search(params, space, corpus[i].tokens, beam_cfg);

      EpochMetrics m{"rbm", it, e};
      double total = 0.0;
      for (std::size_t i : shuffled(++epoch_tag)) {
        const auto& ex = corpus[i];
        const Beam beam = beam_search(params, space, ex.tokens, beam_cfg);
        ObjectiveResult r;
        if (cfg.use_consistency && !pair_index.links[i].empty()) {
          std::vector<NeighborContext> ctx;
          for (const auto& link : pair_index.links[i]) {
            auto key = std::make_pair(link.neighbor, std::make_pair(link.span_x_prime.start, link.span_x_prime.end));
            auto found = by_span.find(key);
            if (found == by_span.end())
              found = by_span
                          .emplace(key, make_neighbor_set(g, neighbor_beams[link.neighbor],
                                                          corpus[link.neighbor].scenes, link.span_x_prime, cfg.tau))
                          .first;
            ctx.push_back({link.span_x, found->second});
          }
          r = consistency_objective_and_grad(params, space, ex, beam, ctx, cfg.tau, cfg.max_actions);
        } else {
          r = rbm_objective_and_grad(params, space, ex, beam, cfg.max_actions);
        }
        params.add_scaled(r.grad, cfg.learning_rate);
        total += r.value;
        ++m.trained;
      }
      m.mean_reward = m.trained ? total / static_cast<double>(m.trained) : 0.0;
      record(m);
    }
    if (cfg.rbm_epochs > 0) checkpoint("rbm", it);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace nlvr

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "executor.hpp"
#include "model.hpp"
#include "program.hpp"
#include "search.hpp"

namespace nlvr {

struct BeamCandidate {
  Program program;
  double log_prob = 0.0;
  std::vector<std::vector<double>> attention;  // T x N
};

/// Finished candidates, best first.
using Beam = std::vector<BeamCandidate>;

struct BeamConfig {
  std::size_t beam_size = 10;
  int max_actions = kDefaultMaxActions;
};

namespace detail {

struct Hypothesis {
  DecoderState state;
  double log_prob = 0.0;
  std::vector<std::vector<double>> attention;
};

// Higher log-prob first; ties go to the lexicographically smaller action sequence.
inline bool better(double lp_a, std::span<const ActionId> seq_a, double lp_b, std::span<const ActionId> seq_b) {
  if (lp_a != lp_b) return lp_a > lp_b;
  return std::ranges::lexicographical_compare(seq_a, seq_b);
}

}  // namespace detail

/// Grammar-constrained beam search. At every step all expansions of the live
/// hypotheses are ranked and the best `beam_size` kept; hypotheses that
/// complete a program leave the beam for the finished pool. Returns the best
/// `beam_size` finished programs.
inline Beam beam_search(const ScorerParams& params, const ActionSpace& space, std::span<const std::string> tokens,
                        const BeamConfig& cfg = {}) {
  if (cfg.beam_size < 1) throw std::invalid_argument("beam_search: beam size must be >= 1");
  Scorer scorer(params, tokens);
  std::vector<detail::Hypothesis> live;
  live.push_back({DecoderState::initial(space), 0.0, {}});
  std::vector<detail::Hypothesis> finished;

  struct Expansion {
    std::size_t parent;
    ActionId action;
    double log_prob;
    std::size_t step_index;
  };

  while (!live.empty()) {
    std::vector<StepDistribution> dists;
    std::vector<Expansion> expansions;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto& hyp = live[h];
      auto valid = hyp.state.valid_actions(space, cfg.max_actions);
      if (valid.empty()) {
        dists.emplace_back();
        continue;
      }
      const std::size_t prev = hyp.state.actions.empty() ? params.start_row() : hyp.state.actions.back();
      dists.push_back(scorer.step(valid, prev));
      const auto& d = dists.back();
      for (std::size_t k = 0; k < d.actions.size(); ++k)
        expansions.push_back({h, d.actions[k], hyp.log_prob + d.log_probs[k], k});
    }
    // live hypotheses share a prefix length, so comparing (parent sequence, action)
    // is comparing the extended sequences
    auto seq_less = [&](const Expansion& a, const Expansion& b) {
      const auto& sa = live[a.parent].state.actions;
      const auto& sb = live[b.parent].state.actions;
      if (sa != sb) return std::ranges::lexicographical_compare(sa, sb);
      return a.action < b.action;
    };
    const std::size_t keep = std::min(cfg.beam_size, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      [&](const Expansion& a, const Expansion& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        return seq_less(a, b);
                      });
    std::vector<detail::Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = expansions[i];
      detail::Hypothesis h = live[e.parent];
      h.state.apply(space, e.action);
      h.log_prob = e.log_prob;
      h.attention.push_back(dists[e.parent].attention[e.step_index]);
      (h.state.finished() ? finished : next).push_back(std::move(h));
    }
    live = std::move(next);
  }

  std::ranges::sort(finished, [](const detail::Hypothesis& a, const detail::Hypothesis& b) {
    return detail::better(a.log_prob, a.state.actions, b.log_prob, b.state.actions);
  });
  if (finished.size() > cfg.beam_size) finished.resize(cfg.beam_size);
  Beam beam;
  beam.reserve(finished.size());
  for (auto& h : finished) {
    BeamCandidate c;
    c.program = parse_actions(space.grammar(), h.state.actions);
    c.log_prob = h.log_prob;
    c.attention = std::move(h.attention);
    beam.push_back(std::move(c));
  }
  return beam;
}

inline Beam beam_search(const ScorerParams& params, const Grammar& g, std::span<const std::string> tokens,
                        const BeamConfig& cfg = {}) {
  return beam_search(params, ActionSpace(g), tokens, cfg);
}

/// Candidates whose program reproduces every stored denotation, order kept.
inline Beam filter_correct(const Grammar& g, const Beam& beam, std::span<const LabeledScene> scenes) {
  auto index = index_scenes(scenes);
  Beam out;
  for (const auto& c : beam)
    if (correct_on_all(g, c.program, index, scenes)) out.push_back(c);
  return out;
}

/// p~(z_i) = exp(lp_i) / sum_j exp(lp_j), stabilized by log-sum-exp.
inline std::vector<double> renormalize(std::span<const double> log_probs) {
  if (log_probs.empty()) throw std::invalid_argument("renormalize: empty support");
  return detail::softmax(log_probs);
}

inline std::vector<double> renormalize(const Beam& beam) {
  std::vector<double> lps;
  lps.reserve(beam.size());
  for (const auto& c : beam) lps.push_back(c.log_prob);
  return renormalize(lps);
}

}  // namespace nlvr

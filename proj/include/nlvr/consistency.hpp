#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "grammar.hpp"
#include "program.hpp"

namespace nlvr {

inline constexpr double kDefaultRelevanceThreshold = 0.6;

/// Inclusive token span [start, end] of a phrase.
struct PhraseSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start + 1; }
  friend bool operator==(const PhraseSpan&, const PhraseSpan&) = default;
};

using ActionSet = std::set<ActionId>;

/// Actions whose attention mass on the span reaches `threshold`. Time steps
/// collapse: the result is a set of action identities.
inline ActionSet relevant_actions(std::span<const std::vector<double>> attention, std::span<const ActionId> actions,
                                  PhraseSpan span, double threshold = kDefaultRelevanceThreshold) {
  if (attention.size() != actions.size())
    throw std::invalid_argument("relevant_actions: attention has " + std::to_string(attention.size()) +
                                " rows for " + std::to_string(actions.size()) + " actions");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("relevant_actions: threshold must lie in (0, 1]");
  ActionSet out;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const auto& row = attention[t];
    if (span.start > span.end || span.end >= row.size())
      throw std::out_of_range("relevant_actions: span [" + std::to_string(span.start) + ", " +
                              std::to_string(span.end) + "] outside " + std::to_string(row.size()) + " tokens");
    double mass = 0.0;
    for (std::size_t i = span.start; i <= span.end; ++i) mass += row[i];
    if (mass >= threshold) out.insert(actions[t]);
  }
  return out;
}

inline ActionSet relevant_actions(std::span<const std::vector<double>> attention, const Program& program,
                                  PhraseSpan span, double threshold = kDefaultRelevanceThreshold) {
  return relevant_actions(attention, program.actions, span, threshold);
}

/// F1 of `a` against `b`. Two empty sets score 0: an ungrounded phrase earns nothing.
inline double pair_consistency(const ActionSet& a, const ActionSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  for (ActionId x : a) common += b.count(x);
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

/// Weighted average of per-neighbor consistencies; weights are the
/// renormalized probabilities of the neighbor's correct programs. An empty
/// neighbor set yields 0.
inline double consistency_reward(std::span<const double> neighbor_weights, std::span<const double> neighbor_scores) {
  if (neighbor_weights.size() != neighbor_scores.size())
    throw std::invalid_argument("consistency_reward: weight/score size mismatch");
  if (neighbor_weights.empty()) return 0.0;
  double total = 0.0, value = 0.0;
  for (std::size_t i = 0; i < neighbor_weights.size(); ++i) {
    total += neighbor_weights[i];
    value += neighbor_weights[i] * neighbor_scores[i];
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("consistency_reward: neighbor weights sum to " + std::to_string(total));
  return std::clamp(value, 0.0, 1.0);
}

/// Relevant-action view of a correct neighbor program and its weight p~.
struct NeighborSet {
  std::vector<ActionSet> relevant;
  std::vector<double> weights;
};

inline double consistency_reward(const ActionSet& candidate, const NeighborSet& neighbors) {
  std::vector<double> scores;
  scores.reserve(neighbors.relevant.size());
  for (const auto& r : neighbors.relevant) scores.push_back(pair_consistency(candidate, r));
  return consistency_reward(neighbors.weights, scores);
}

/// Weighted mean of per-phrase rewards.
inline double multi_phrase_reward(std::span<const std::pair<double, double>> reward_and_weight) {
  double total = 0.0, value = 0.0;
  for (const auto& [r, w] : reward_and_weight) {
    if (w < 0.0) throw std::invalid_argument("multi_phrase_reward: negative weight");
    total += w;
    value += w * r;
  }
  if (total <= 0.0) throw std::invalid_argument("multi_phrase_reward: all weights are zero");
  return value / total;
}

/// Mean of per-neighbor rewards.
inline double multi_neighbor_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("multi_neighbor_reward: no neighbors");
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

}  // namespace nlvr

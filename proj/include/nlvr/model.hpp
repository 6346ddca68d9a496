#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grammar.hpp"
#include "program.hpp"
#include "scene.hpp"

namespace nlvr {

/// Longest program the decoder will emit; also bounds the valid-action sets
/// used when scoring a given program, so both agree on normalization.
inline constexpr int kDefaultMaxActions = 40;

/// Weights of the locally normalized log-linear decoder. Dense over the
/// actions of one grammar; alignment rows exist only for tokens that have
/// been touched. Missing entries read as zero.
struct ScorerParams {
  std::size_t num_actions = 0;
  std::vector<double> rule;                           // [action]
  std::vector<double> prev;                           // [(previous action or start) * A + action]
  std::map<std::string, std::vector<double>> align;   // token -> [action]

  static ScorerParams zeros(const Grammar& g) {
    ScorerParams p;
    p.num_actions = g.size();
    p.rule.assign(g.size(), 0.0);
    p.prev.assign((g.size() + 1) * g.size(), 0.0);
    return p;
  }

  std::size_t start_row() const { return num_actions; }
  double& prev_at(std::size_t previous, std::size_t a) { return prev[previous * num_actions + a]; }
  double prev_at(std::size_t previous, std::size_t a) const { return prev[previous * num_actions + a]; }

  std::vector<double>& align_row(const std::string& token) {
    auto [it, inserted] = align.try_emplace(token);
    if (inserted) it->second.assign(num_actions, 0.0);
    return it->second;
  }
  const std::vector<double>* find_align(const std::string& token) const {
    auto it = align.find(token);
    return it == align.end() ? nullptr : &it->second;
  }

  /// this += scale * other
  void add_scaled(const ScorerParams& other, double scale) {
    for (std::size_t i = 0; i < rule.size(); ++i) rule[i] += scale * other.rule[i];
    for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += scale * other.prev[i];
    for (const auto& [tok, row] : other.align) {
      auto& mine = align_row(tok);
      for (std::size_t i = 0; i < row.size(); ++i) mine[i] += scale * row[i];
    }
  }

  friend bool operator==(const ScorerParams&, const ScorerParams&) = default;
};

inline ScorerParams zeros_like(const ScorerParams& p) {
  ScorerParams z;
  z.num_actions = p.num_actions;
  z.rule.assign(p.rule.size(), 0.0);
  z.prev.assign(p.prev.size(), 0.0);
  return z;
}

/// Distribution over the valid next actions at one decoder state.
struct StepDistribution {
  std::vector<ActionId> actions;                 // valid actions, ascending id
  std::vector<double> scores;                    // unnormalized
  std::vector<double> log_probs;
  std::vector<std::vector<double>> attention;    // per action, a row over tokens
  std::vector<std::vector<double>> energies;     // per action, alignment weight per token
};

/// Incremental parser state: the actions emitted so far and the types still
/// to be derived (back() is expanded next).
struct DecoderState {
  std::vector<ActionId> actions;
  std::vector<TypeId> pending;
  int pending_min = 0;

  static DecoderState initial(const ActionSpace& space) {
    DecoderState s;
    s.pending.push_back(space.grammar().root());
    s.pending_min = space.min_length(space.grammar().root());
    return s;
  }

  bool finished() const { return pending.empty(); }

  /// Actions that keep the derivation completable within `max_actions`.
  std::vector<ActionId> valid_actions(const ActionSpace& space, int max_actions) const {
    std::vector<ActionId> out;
    if (pending.empty()) return out;
    const TypeId t = pending.back();
    const int rest = pending_min - space.min_length(t);
    const int used = static_cast<int>(actions.size());
    for (ActionId a : space.grammar().expansions(t))
      if (space.allowed(a) && used + space.min_completion(a) + rest <= max_actions) out.push_back(a);
    return out;
  }

  void apply(const ActionSpace& space, ActionId a) {
    const auto& act = space.grammar().action(a);
    if (pending.empty() || act.lhs != pending.back()) throw std::logic_error("DecoderState: action does not fit");
    pending_min -= space.min_length(pending.back());
    pending.pop_back();
    for (auto it = act.children.rbegin(); it != act.children.rend(); ++it) {
      pending.push_back(*it);
      pending_min += space.min_length(*it);
    }
    actions.push_back(a);
  }
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> xs) {
  const double lse = log_sum_exp(xs);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = std::exp(xs[i] - lse);
  return out;
}

}  // namespace detail

/// Log-linear action scorer over a fixed utterance. For a candidate action a
/// with token energies e_i = w_align[tok_i, a], attention is softmax(e) and
/// score(a) = w_rule[a] + w_prev[prev, a] + sum_i attention_i * e_i.
class Scorer {
public:
  Scorer(const ScorerParams& params, std::span<const std::string> tokens) : p_(params) {
    rows_.reserve(tokens.size());
    for (const auto& t : tokens) rows_.push_back(params.find_align(t));
  }

  std::size_t num_tokens() const { return rows_.size(); }

  StepDistribution step(std::span<const ActionId> valid, std::size_t previous) const {
    if (valid.empty()) throw std::logic_error("stuck state: no valid actions");
    StepDistribution d;
    d.actions.assign(valid.begin(), valid.end());
    d.scores.reserve(valid.size());
    for (ActionId a : valid) {
      std::vector<double> e(rows_.size(), 0.0);
      for (std::size_t i = 0; i < rows_.size(); ++i)
        if (rows_[i]) e[i] = (*rows_[i])[a];
      std::vector<double> att = detail::softmax(e);
      double s = p_.rule[a] + p_.prev_at(previous, a);
      for (std::size_t i = 0; i < e.size(); ++i) s += att[i] * e[i];
      d.scores.push_back(s);
      d.attention.push_back(std::move(att));
      d.energies.push_back(std::move(e));
    }
    const double lse = detail::log_sum_exp(d.scores);
    d.log_probs.reserve(valid.size());
    for (double s : d.scores) d.log_probs.push_back(s - lse);
    return d;
  }

  /// Adds weight * d log p(chosen | state) / d params into `grad`.
  void accumulate_step_grad(const StepDistribution& d, std::size_t chosen_index, std::size_t previous,
                            std::span<const std::string> tokens, double weight, ScorerParams& grad) const {
    for (std::size_t k = 0; k < d.actions.size(); ++k) {
      const double coef = weight * ((k == chosen_index ? 1.0 : 0.0) - std::exp(d.log_probs[k]));
      if (coef == 0.0) continue;
      const ActionId a = d.actions[k];
      grad.rule[a] += coef;
      grad.prev_at(previous, a) += coef;
      const auto& att = d.attention[k];
      const auto& e = d.energies[k];
      double mean_e = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) mean_e += att[i] * e[i];
      // d/de_j of sum_i softmax(e)_i e_i = att_j (1 + e_j - mean_e)
      for (std::size_t j = 0; j < e.size(); ++j)
        grad.align_row(tokens[j])[a] += coef * att[j] * (1.0 + e[j] - mean_e);
    }
  }

private:
  const ScorerParams& p_;
  std::vector<const std::vector<double>*> rows_;
};

struct ScoredProgram {
  double log_prob = 0.0;
  std::vector<std::vector<double>> attention;  // T x N, the chosen action's row per step
};

/// Forced-decodes `program` and returns log p(program | utterance) with the
/// attention rows of the chosen actions.
inline ScoredProgram program_log_prob(const ScorerParams& params, const ActionSpace& space,
                                      std::span<const std::string> tokens, const Program& program,
                                      int max_actions = kDefaultMaxActions) {
  Scorer scorer(params, tokens);
  DecoderState state = DecoderState::initial(space);
  ScoredProgram out;
  for (ActionId a : program.actions) {
    auto valid = state.valid_actions(space, max_actions);
    auto it = std::ranges::find(valid, a);
    if (it == valid.end()) throw std::invalid_argument("program_log_prob: action not valid at this step");
    const std::size_t prev = state.actions.empty() ? params.start_row() : state.actions.back();
    auto d = scorer.step(valid, prev);
    const auto k = static_cast<std::size_t>(it - valid.begin());
    out.log_prob += d.log_probs[k];
    out.attention.push_back(std::move(d.attention[k]));
    state.apply(space, a);
  }
  return out;
}

/// Adds weight * grad log p(program | utterance) into `grad`.
inline void accumulate_log_prob_grad(const ScorerParams& params, const ActionSpace& space,
                                     std::span<const std::string> tokens, const Program& program, double weight,
                                     ScorerParams& grad, int max_actions = kDefaultMaxActions) {
  Scorer scorer(params, tokens);
  DecoderState state = DecoderState::initial(space);
  for (ActionId a : program.actions) {
    auto valid = state.valid_actions(space, max_actions);
    auto it = std::ranges::find(valid, a);
    if (it == valid.end()) throw std::invalid_argument("grad_log_prob: action not valid at this step");
    const std::size_t prev = state.actions.empty() ? params.start_row() : state.actions.back();
    auto d = scorer.step(valid, prev);
    scorer.accumulate_step_grad(d, static_cast<std::size_t>(it - valid.begin()), prev, tokens, weight, grad);
    state.apply(space, a);
  }
}

inline ScorerParams grad_log_prob(const ScorerParams& params, const ActionSpace& space,
                                  std::span<const std::string> tokens, const Program& program) {
  ScorerParams grad = zeros_like(params);
  accumulate_log_prob_grad(params, space, tokens, program, 1.0, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr const char* kStartSymbol = "<start>";

inline nlohmann::json params_to_json(const ScorerParams& p, const Grammar& g) {
  nlohmann::json rule = nlohmann::json::object(), prev = nlohmann::json::object(), align = nlohmann::json::object();
  for (std::size_t a = 0; a < p.num_actions; ++a)
    if (p.rule[a] != 0.0) rule[g.action(static_cast<ActionId>(a)).id] = p.rule[a];
  for (std::size_t r = 0; r <= p.num_actions; ++r) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t a = 0; a < p.num_actions; ++a)
      if (p.prev_at(r, a) != 0.0) row[g.action(static_cast<ActionId>(a)).id] = p.prev_at(r, a);
    if (!row.empty()) prev[r == p.num_actions ? std::string(kStartSymbol) : g.action(static_cast<ActionId>(r)).id] = row;
  }
  for (const auto& [tok, weights] : p.align) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t a = 0; a < weights.size(); ++a)
      if (weights[a] != 0.0) row[g.action(static_cast<ActionId>(a)).id] = weights[a];
    if (!row.empty()) align[tok] = row;
  }
  return nlohmann::json{{"format", 1},
                        {"grammar", std::string(to_string(g.variant()))},
                        {"rule", rule},
                        {"prev", prev},
                        {"align", align}};
}

inline ScorerParams params_from_json(const nlohmann::json& j, const Grammar& g) {
  if (!j.is_object() || j.value("format", 0) != 1) throw DataError("checkpoint: unsupported or missing format (want 1)");
  if (j.contains("grammar") && j.at("grammar").get<std::string>() != to_string(g.variant()))
    throw DataError("checkpoint: trained for the '" + j.at("grammar").get<std::string>() + "' grammar");
  ScorerParams p = ScorerParams::zeros(g);
  auto action = [&](const std::string& id) -> ActionId {
    auto a = g.find_action(id);
    if (!a) throw DataError("checkpoint: unknown action '" + id + "'");
    return *a;
  };
  const auto section = [&](const char* key) {
    auto s = j.value(key, nlohmann::json::object());
    if (!s.is_object()) throw DataError(std::string("checkpoint: '") + key + "' must be an object");
    return s;
  };
  const auto rule = section("rule"), prev = section("prev"), align = section("align");
  for (const auto& [id, w] : rule.items()) p.rule[action(id)] = w.get<double>();
  for (const auto& [from, row] : prev.items()) {
    const std::size_t r = from == kStartSymbol ? p.start_row() : action(from);
    for (const auto& [id, w] : row.items()) p.prev_at(r, action(id)) = w.get<double>();
  }
  for (const auto& [tok, row] : align.items()) {
    auto& dst = p.align_row(tok);
    for (const auto& [id, w] : row.items()) dst[action(id)] = w.get<double>();
  }
  return p;
}

}  // namespace nlvr

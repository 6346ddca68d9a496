#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "executor.hpp"
#include "grammar.hpp"
#include "program.hpp"
#include "scene.hpp"

namespace nlvr {

// ---------------------------------------------------------------------------
// Exhaustive typed enumeration
// ---------------------------------------------------------------------------

/// Calls `visit(actions)` for every well-typed program of at most
/// `max_actions` actions, in lexicographic order of action ids. Returning
/// false from `visit` stops the enumeration.
template <typename Visit>
void enumerate_sequences(const ActionSpace& space, int max_actions, Visit&& visit) {
  const Grammar& g = space.grammar();
  if (max_actions < 1 || space.min_length(g.root()) > max_actions) return;
  std::vector<ActionId> seq;
  std::vector<TypeId> pending{g.root()};  // back() is the next type to expand
  int pending_min = space.min_length(g.root());
  bool stop = false;

  std::function<void()> rec = [&] {
    if (pending.empty()) {
      if (!visit(std::span<const ActionId>(seq))) stop = true;
      return;
    }
    const TypeId t = pending.back();
    pending.pop_back();
    const int rest_min = pending_min - space.min_length(t);
    for (ActionId a : g.expansions(t)) {
      if (!space.allowed(a)) continue;
      const int used = static_cast<int>(seq.size());
      if (used + space.min_completion(a) + rest_min > max_actions) continue;
      const auto& act = g.action(a);
      seq.push_back(a);
      const int saved_min = pending_min;
      pending_min = rest_min;
      for (auto it = act.children.rbegin(); it != act.children.rend(); ++it) {
        pending.push_back(*it);
        pending_min += space.min_length(*it);
      }
      rec();
      pending.resize(pending.size() - act.children.size());
      pending_min = saved_min;
      seq.pop_back();
      if (stop) break;
    }
    pending.push_back(t);
  };
  rec();
}

inline std::vector<Program> enumerate(const ActionSpace& space, int max_actions) {
  std::vector<Program> out;
  enumerate_sequences(space, max_actions, [&](std::span<const ActionId> seq) {
    out.push_back(parse_actions(space.grammar(), seq));
    return true;
  });
  return out;
}

inline std::vector<Program> enumerate(const Grammar& g, int max_actions) {
  return enumerate(ActionSpace(g), max_actions);
}

// ---------------------------------------------------------------------------
// Denotation checks
// ---------------------------------------------------------------------------

/// Executes `p` on every scene; true iff it matches every stored denotation.
inline bool correct_on_all(const Grammar& g, const Program& p, std::span<const SceneIndex> scenes,
                           std::span<const LabeledScene> labels) {
  for (std::size_t i = 0; i < scenes.size(); ++i)
    if (Executor(g, scenes[i]).run(p) != labels[i].denotation) return false;
  return true;
}

inline std::vector<SceneIndex> index_scenes(std::span<const LabeledScene> scenes) {
  std::vector<SceneIndex> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.emplace_back(s.scene);
  return out;
}

// ---------------------------------------------------------------------------
// Lexically triggered heuristic search (program sets for MML)
// ---------------------------------------------------------------------------

/// Terminals licensed by the words of an utterance. Structural constants and
/// existence predicates are always available; filters, numbers, counting and
/// connectives need a trigger word.
inline std::vector<bool> triggered_terminals(const Grammar& g, std::span<const std::string> tokens) {
  auto has = [&](std::initializer_list<std::string_view> words) {
    for (const auto& t : tokens)
      for (auto w : words)
        if (t == w) return true;
    return false;
  };
  bool has_number = false;
  for (const auto& t : tokens)
    if (t.size() == 1 && t[0] >= '1' && t[0] <= '9') has_number = true;
  static constexpr std::string_view kNumberWords[] = {"one", "two", "three", "four", "five",
                                                      "six", "seven", "eight", "nine"};

  std::vector<bool> allowed(g.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& a = g.action(static_cast<ActionId>(i));
    if (a.kind != ActionKind::Terminal) {
      allowed[i] = true;
      continue;
    }
    bool ok = false;
    switch (a.fn) {
      case Builtin::AllObjs:
      case Builtin::AllBoxes:
      case Builtin::ObjExists:
      case Builtin::BoxExists:
      case Builtin::BoxFilter:
      case Builtin::MemberObjExists: ok = true; break;
      case Builtin::IntLiteral: {
        const std::string digit = std::to_string(a.literal);
        ok = has({digit, kNumberWords[a.literal - 1]}) || (a.literal == 1 && has({"one", "only", "a", "an"}));
        break;
      }
      case Builtin::Black: ok = has({"black"}); break;
      case Builtin::Blue: ok = has({"blue"}); break;
      case Builtin::Yellow: ok = has({"yellow"}); break;
      case Builtin::Triangle: ok = has({"triangle", "triangles"}); break;
      case Builtin::Square: ok = has({"square", "squares"}); break;
      case Builtin::Circle: ok = has({"circle", "circles"}); break;
      case Builtin::Small: ok = has({"small"}); break;
      case Builtin::Medium: ok = has({"medium"}); break;
      case Builtin::Large: ok = has({"large", "big"}); break;
      case Builtin::Top: ok = has({"top"}); break;
      case Builtin::Bottom: ok = has({"bottom", "base"}); break;
      case Builtin::Above: ok = has({"above", "over", "on"}); break;
      case Builtin::Below: ok = has({"below", "under", "beneath"}); break;
      case Builtin::ObjColorCountEq:
      case Builtin::ObjColorCountGrtEq:
      case Builtin::MemberColorCountGrtEq: ok = has({"color", "colors", "colour", "colours"}); break;
      case Builtin::ObjShapeCountEq:
      case Builtin::ObjShapeCountGrtEq: ok = has({"shape", "shapes"}); break;
      case Builtin::ObjectCountEq:
      case Builtin::ObjectCountGtEq:
      case Builtin::ObjectCountLtEq:
      case Builtin::BoxCountEq:
      case Builtin::BoxCountGtEq:
      case Builtin::BoxCountLtEq:
      case Builtin::MemberObjCountEq:
        ok = has_number || has({"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "only"});
        break;
      case Builtin::AndBool: ok = has({"and", "both"}); break;
      case Builtin::OrBool: ok = has({"or", "either"}); break;
      case Builtin::NotBool: ok = has({"no", "not", "none", "nothing"}); break;
    }
    allowed[i] = ok;
  }
  return allowed;
}

struct HeuristicSearchConfig {
  int max_actions = 14;
  std::size_t max_programs = 20;
};

/// Programs built from triggered terminals that are correct on every paired
/// scene; the shortest `max_programs` (ties lexicographic) are kept.
inline std::vector<Program> heuristic_search(const Grammar& g, const Example& ex, const HeuristicSearchConfig& cfg = {}) {
  ActionSpace space(g, triggered_terminals(g, ex.tokens));
  auto scenes = index_scenes(ex.scenes);
  std::vector<std::vector<ActionId>> found;
  std::size_t longest_kept = static_cast<std::size_t>(cfg.max_actions) + 1;
  enumerate_sequences(space, cfg.max_actions, [&](std::span<const ActionId> seq) {
    if (found.size() >= cfg.max_programs && seq.size() >= longest_kept) return true;
    Program p = parse_actions(g, seq);
    if (!correct_on_all(g, p, scenes, ex.scenes)) return true;
    found.emplace_back(seq.begin(), seq.end());
    if (found.size() > 4 * cfg.max_programs) {
      std::ranges::stable_sort(found, {}, [](const auto& s) { return s.size(); });
      found.resize(cfg.max_programs);
      longest_kept = found.back().size();
    }
    return true;
  });
  std::ranges::stable_sort(found, {}, [](const auto& s) { return s.size(); });
  if (found.size() > cfg.max_programs) found.resize(cfg.max_programs);
  std::vector<Program> out;
  for (const auto& s : found) out.push_back(parse_actions(g, s));
  return out;
}

}  // namespace nlvr

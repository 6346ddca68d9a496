#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consistency.hpp"
#include "scene.hpp"
#include "util.hpp"

namespace nlvr {

/// A set of phrases that are interpreted the same way. Patterns use the
/// placeholders COLOR, COLOR1, COLOR2, NUMBER and SHAPE.
struct PhraseSet {
  int id = 0;
  std::vector<std::string> patterns;
};

inline std::vector<PhraseSet> builtin_templates() {
  return {
      {1, {"COLOR block at the base", "the base is COLOR"}},
      {2, {"COLOR block at the top", "the top is COLOR"}},
      {3, {"COLOR1 object above a COLOR2 object"}},
      {4, {"COLOR1 block on a COLOR2 block", "COLOR1 block over a COLOR2 block"}},
      {5, {"a COLOR tower"}},
      {6, {"there is one tower", "there is only one tower", "there is one box", "there is only one box"}},
      {7, {"there are exactly NUMBER towers", "there are exactly NUMBER boxes"}},
      {8, {"NUMBER different colors"}},
      {9, {"with NUMBER COLOR items", "with NUMBER COLOR blocks", "with NUMBER COLOR objects"}},
      {10, {"at least NUMBER COLOR items", "at least NUMBER COLOR blocks", "at least NUMBER COLOR objects"}},
      {11, {"with NUMBER COLOR SHAPE", "are NUMBER COLOR SHAPE", "with only NUMBER COLOR SHAPE",
            "are only NUMBER COLOR SHAPE"}},
  };
}

struct GroundedPhrase {
  int set_id = 0;
  std::string group;  // set id plus placeholder bindings; equal groups are interchangeable
  std::vector<std::string> tokens;

  std::string text() const {
    std::string s;
    for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
    return s;
  }
};

/// Surface forms a placeholder can take, each with the binding it stands for.
/// SHAPE covers singular and plural nouns ("square", "squares") bound to the
/// same shape.
inline std::vector<std::pair<std::string, std::string>> placeholder_values(std::string_view placeholder) {
  std::vector<std::pair<std::string, std::string>> out;
  if (placeholder.starts_with("COLOR")) {
    for (auto c : kColorNames) out.emplace_back(std::string(c), std::string(c));
  } else if (placeholder == "NUMBER") {
    for (int n = 1; n <= 9; ++n) out.emplace_back(std::to_string(n), std::to_string(n));
  } else if (placeholder == "SHAPE") {
    for (auto s : kShapeNames) {
      out.emplace_back(std::string(s), std::string(s));
      out.emplace_back(std::string(s) + "s", std::string(s));
    }
  }
  return out;
}

inline bool is_placeholder(std::string_view tok) {
  return tok == "COLOR" || tok == "COLOR1" || tok == "COLOR2" || tok == "NUMBER" || tok == "SHAPE";
}

/// Instantiates every pattern over the placeholder vocabularies.
inline std::vector<GroundedPhrase> ground_templates(const std::vector<PhraseSet>& sets) {
  std::vector<GroundedPhrase> out;
  for (const auto& set : sets) {
    for (const auto& pattern : set.patterns) {
      std::vector<std::string> raw;
      {
        std::istringstream in(pattern);
        for (std::string t; in >> t;) raw.push_back(t);
      }
      std::vector<std::size_t> slots;
      for (std::size_t i = 0; i < raw.size(); ++i)
        if (is_placeholder(raw[i])) slots.push_back(i);

      // odometer over the slots' vocabularies
      std::vector<std::vector<std::pair<std::string, std::string>>> vocab;
      for (auto s : slots) vocab.push_back(placeholder_values(raw[s]));
      std::vector<std::size_t> idx(slots.size(), 0);
      while (true) {
        GroundedPhrase g;
        g.set_id = set.id;
        g.tokens = raw;
        std::map<std::string, std::string> bindings;
        for (std::size_t k = 0; k < slots.size(); ++k) {
          g.tokens[slots[k]] = vocab[k][idx[k]].first;
          bindings[raw[slots[k]]] = vocab[k][idx[k]].second;
        }
        g.group = "set" + std::to_string(set.id);
        for (const auto& [ph, v] : bindings) g.group += "|" + ph + "=" + v;
        out.push_back(std::move(g));
        std::size_t k = 0;
        for (; k < idx.size(); ++k) {
          if (++idx[k] < vocab[k].size()) break;
          idx[k] = 0;
        }
        if (k == idx.size()) break;
      }
    }
  }
  return out;
}

/// First occurrence of `phrase` as a contiguous token run.
inline std::optional<PhraseSpan> find_phrase(const std::vector<std::string>& tokens,
                                             const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return std::nullopt;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i)
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
      return PhraseSpan{i, i + phrase.size() - 1};
  return std::nullopt;
}

struct UtterancePair {
  std::string x;
  std::string x_prime;
  std::string phrase;  // as it occurs in x
  PhraseSpan span_x;
  PhraseSpan span_x_prime;
  int set_id = 0;

  friend bool operator==(const UtterancePair&, const UtterancePair&) = default;
};

struct PairingStats {
  std::size_t matched_utterances = 0;
  std::size_t pairs = 0;
  std::vector<std::string> singleton_groups;  // groups matched by a single utterance
};

/// For each group of equivalent grounded phrases, pairs every utterance that
/// contains one of them with one other such utterance chosen uniformly at
/// random. Each group draws from its own sub-seed.
inline std::vector<UtterancePair> build_pairs(const Corpus& corpus, const std::vector<PhraseSet>& sets,
                                              std::uint64_t seed, PairingStats* stats = nullptr) {
  std::map<std::string, std::vector<const GroundedPhrase*>> groups;
  const auto grounded = ground_templates(sets);
  for (const auto& g : grounded) groups[g.group].push_back(&g);

  struct Match {
    std::size_t example;
    PhraseSpan span;
    std::string phrase;
  };
  std::vector<UtterancePair> pairs;
  std::vector<bool> matched(corpus.size(), false);
  PairingStats local;
  for (const auto& [key, phrases] : groups) {
    std::vector<Match> members;
    for (std::size_t e = 0; e < corpus.size(); ++e) {
      std::optional<Match> best;
      for (const auto* ph : phrases) {
        auto span = find_phrase(corpus[e].tokens, ph->tokens);
        if (span && (!best || span->start < best->span.start)) best = Match{e, *span, ph->text()};
      }
      if (best) members.push_back(std::move(*best));
    }
    if (members.size() == 1) local.singleton_groups.push_back(key);
    if (members.size() < 2) continue;
    Rng rng(derive_seed(seed, key));
    const int set_id = phrases.front()->set_id;
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 2);
      std::size_t j = pick(rng);
      if (j >= i) ++j;
      const auto& a = members[i];
      const auto& b = members[j];
      matched[a.example] = true;
      pairs.push_back({corpus[a.example].id, corpus[b.example].id, a.phrase, a.span, b.span, set_id});
    }
  }
  local.pairs = pairs.size();
  local.matched_utterances = static_cast<std::size_t>(std::ranges::count(matched, true));
  if (stats) *stats = std::move(local);
  return pairs;
}

// ---------------------------------------------------------------------------
// Pairs file
// ---------------------------------------------------------------------------

inline nlohmann::json pairs_to_json(const std::vector<UtterancePair>& pairs) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs)
    arr.push_back({{"x", p.x},
                   {"x_prime", p.x_prime},
                   {"phrase", p.phrase},
                   {"span_x", {p.span_x.start, p.span_x.end}},
                   {"span_x_prime", {p.span_x_prime.start, p.span_x_prime.end}},
                   {"set", p.set_id}});
  return arr;
}

inline std::vector<UtterancePair> pairs_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("pairs: top-level value must be an array");
  std::vector<UtterancePair> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = "pair #" + std::to_string(i);
    try {
      UtterancePair p;
      p.x = e.at("x").get<std::string>();
      p.x_prime = e.at("x_prime").get<std::string>();
      p.phrase = e.value("phrase", "");
      auto span = [&](const char* key) {
        const auto& s = e.at(key);
        if (!s.is_array() || s.size() != 2) throw DataError(where + ": '" + key + "' must be [m, n]");
        PhraseSpan ps{s[0].get<std::size_t>(), s[1].get<std::size_t>()};
        if (ps.start > ps.end) throw DataError(where + ": '" + key + "' has m > n");
        return ps;
      };
      p.span_x = span("span_x");
      p.span_x_prime = span("span_x_prime");
      p.set_id = e.value("set", 0);
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace nlvr

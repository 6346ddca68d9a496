#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "executor.hpp"
#include "grammar.hpp"
#include "program.hpp"
#include "scene.hpp"
#include "util.hpp"

namespace nlvr {

/// An utterance pattern with its gold program in the new language. Both may
/// use COLOR, COLOR1, COLOR2, NUMBER and SHAPE; in the utterance SHAPES
/// spells the plural noun of the SHAPE binding.
struct UtteranceTemplate {
  std::string text;
  std::string program;
  int min_number = 1;
  int max_number = 3;
};

struct GeneratorConfig {
  int scenes_per_utterance = 4;
  int min_objects = 1;
  int max_objects = 5;
  int retries = 400;  // scene draws per requested denotation
};

struct GeneratedCorpus {
  Corpus examples;
  std::vector<std::string> gold_programs;  // per example, new-language text
  std::vector<std::string> warnings;
};

inline Scene random_scene(Rng& rng, const GeneratorConfig& cfg, std::string id) {
  Scene s;
  s.id = std::move(id);
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  std::uniform_int_distribution<int> coord(0, kCoordMax);
  std::uniform_int_distribution<int> category(0, 2);
  for (int b = 0; b < kBoxesPerScene; ++b) {
    Box box;
    const int n = count(rng);
    std::set<std::pair<int, int>> used;
    while (static_cast<int>(box.objects.size()) < n) {
      Obj o;
      o.x = coord(rng);
      o.y = coord(rng);
      if (!used.insert({o.x, o.y}).second) continue;
      o.color = static_cast<Color>(category(rng));
      o.shape = static_cast<Shape>(category(rng));
      o.size = static_cast<Size>(category(rng));
      box.objects.push_back(o);
    }
    s.boxes.push_back(std::move(box));
  }
  return s;
}

namespace detail {

inline std::string substitute(const std::string& pattern, const std::map<std::string, std::string>& values) {
  // longest placeholder names first so COLOR1 is not read as COLOR + "1"
  std::vector<std::string> keys;
  for (const auto& [k, v] : values) keys.push_back(k);
  std::ranges::sort(keys, [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::string out;
  for (std::size_t i = 0; i < pattern.size();) {
    bool replaced = false;
    for (const auto& k : keys) {
      if (pattern.compare(i, k.size(), k) == 0) {
        out += values.at(k);
        i += k.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += pattern[i++];
  }
  return out;
}

}  // namespace detail

/// Fills a template's placeholders. Distinct COLOR1/COLOR2 bindings are not
/// enforced; the phrase sets allow equal colors.
inline std::pair<std::string, std::string> instantiate(const UtteranceTemplate& t, Rng& rng) {
  std::uniform_int_distribution<int> pick3(0, 2);
  std::uniform_int_distribution<int> number(t.min_number, t.max_number);
  const std::string shape(kShapeNames[pick3(rng)]);
  std::map<std::string, std::string> v{
      {"COLOR1", std::string(kColorNames[pick3(rng)])},
      {"COLOR2", std::string(kColorNames[pick3(rng)])},
      {"COLOR", std::string(kColorNames[pick3(rng)])},
      {"NUMBER", std::to_string(number(rng))},
  };
  auto text_values = v;
  text_values["SHAPES"] = shape + "s";
  text_values["SHAPE"] = shape;
  auto program_values = v;
  program_values["SHAPE"] = shape;
  return {detail::substitute(t.text, text_values), detail::substitute(t.program, program_values)};
}

/// Deterministic synthetic corpus. Example i draws everything from a sub-seed
/// of (seed, i). Denotations come from executing the gold program, and each
/// utterance asks for an even split of true and false scenes.
inline GeneratedCorpus generate_corpus(std::uint64_t seed, std::size_t n_utterances,
                                       const std::vector<UtteranceTemplate>& templates,
                                       const GeneratorConfig& cfg = {}) {
  if (n_utterances == 0) throw std::invalid_argument("generate_corpus: n_utterances must be > 0");
  if (templates.empty()) throw std::invalid_argument("generate_corpus: no templates");
  const Grammar g = build_grammar(LanguageVariant::New);
  GeneratedCorpus out;
  for (std::size_t i = 0; i < n_utterances; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto& tmpl = templates[std::uniform_int_distribution<std::size_t>(0, templates.size() - 1)(rng)];
    auto [text, program_text] = instantiate(tmpl, rng);
    const Program gold = parse_text(g, program_text);

    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "u%04zu", i);
    Example ex;
    ex.id = idbuf;
    ex.text = text;
    ex.tokens = tokenize(text);

    std::vector<bool> targets;
    for (int k = 0; k < cfg.scenes_per_utterance; ++k) targets.push_back(k % 2 == 0);
    std::shuffle(targets.begin(), targets.end(), rng);
    int misses = 0;
    for (int k = 0; k < cfg.scenes_per_utterance; ++k) {
      const std::string sid = ex.id + "-" + std::to_string(k);
      Scene scene;
      bool value = false;
      for (int attempt = 0; attempt < cfg.retries; ++attempt) {
        scene = random_scene(rng, cfg, sid);
        value = execute(g, gold, scene);
        if (value == targets[k]) break;
      }
      if (value != targets[k]) ++misses;
      ex.scenes.push_back({std::move(scene), value});
    }
    if (misses > 0)
      out.warnings.push_back(ex.id + " (\"" + text + "\"): " + std::to_string(misses) +
                             " scene(s) could not reach the requested denotation");
    out.examples.push_back(std::move(ex));
    out.gold_programs.push_back(program_text);
  }
  return out;
}

/// Templates used by the bundled experiments. Several share phrases from the
/// equivalence sets so that related-utterance pairs exist.
inline std::vector<UtteranceTemplate> builtin_utterance_templates() {
  return {
      {"there is a COLOR1 object above a COLOR2 object", "objExists(COLOR1(above(COLOR2(allObjs))))"},
      {"there is a box with a COLOR1 object above a COLOR2 object",
       "boxExists(boxFilter(allBoxes, objExists(COLOR1(above(COLOR2)))))"},
      {"there is a COLOR block at the top", "objExists(COLOR(top(allObjs)))"},
      {"there is a tower with a COLOR block at the top", "boxExists(boxFilter(allBoxes, objExists(COLOR(top))))"},
      {"there is a COLOR block at the base", "objExists(COLOR(bottom(allObjs)))"},
      {"there are exactly NUMBER boxes with a COLOR block at the base",
       "boxCountEq(NUMBER, boxFilter(allBoxes, objExists(COLOR(bottom))))"},
      {"there is a box with at least NUMBER COLOR items",
       "boxExists(boxFilter(allBoxes, objectCountGtEq(NUMBER)(COLOR)))"},
      {"there are at least NUMBER COLOR items", "objectCountGtEq(NUMBER, COLOR(allObjs))"},
      {"there is a box with NUMBER COLOR SHAPES", "boxExists(boxFilter(allBoxes, objectCountEq(NUMBER)(COLOR(SHAPE))))"},
      {"there are NUMBER COLOR SHAPES", "objectCountEq(NUMBER, COLOR(SHAPE(allObjs)))"},
      {"there is one box with NUMBER different colors",
       "boxCountEq(1, boxFilter(allBoxes, objColorCountEq(NUMBER)))"},
      {"there is a SHAPE", "objExists(SHAPE(allObjs))"},
      {"there is a COLOR SHAPE", "objExists(COLOR(SHAPE(allObjs)))"},
      {"there are no COLOR objects", "notBool(objExists(COLOR(allObjs)))"},
  };
}

}  // namespace nlvr

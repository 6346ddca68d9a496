// Parses a program in both surface forms, prints its action sequence and runs it on a few scenes.
#include <cstdio>

#include "nlvr.hpp"

using namespace nlvr;

int main() {
  const Grammar g = build_grammar(LanguageVariant::New);
  const Program p = parse_text(g, "boxCountEq(1, boxFilter(allBoxes, objectCountGtEq(2)(yellow(square))))");

  std::printf("%s\n%s\n", pretty_print(g, p).c_str(), format_action_lines(g, p.actions).c_str());

  // the same program, rebuilt from its actions
  const Program back = parse_actions(g, p.actions);
  std::printf("round trip: %s\n\n", back.root == p.root ? "ok" : "MISMATCH");

  const auto corpus = generate_corpus(1, 3, builtin_utterance_templates());
  for (const auto& ex : corpus.examples)
    for (const auto& s : ex.scenes) std::printf("%-10s %s\n", s.scene.id.c_str(), execute(g, p, s.scene) ? "true" : "false");

  try {
    parse_text(g, "boxExists(memberObjCountEq(1, allBoxes))");
  } catch (const DataError& e) {
    std::printf("\nold-only program rejected: %s\n", e.what());
  }
}

// Trains on a generated corpus with and without the consistency reward and compares dev metrics.
#include <cstdio>

#include "nlvr.hpp"

using namespace nlvr;

int main() {
  const auto templates = builtin_utterance_templates();
  const auto train = generate_corpus(7, 200, templates);
  const auto dev = generate_corpus(1007, 200, templates);
  const auto pairs = build_pairs(train.examples, builtin_templates(), 7);
  std::printf("%zu training utterances, %zu pairs\n", train.examples.size(), pairs.size());

  const Grammar g = build_grammar(LanguageVariant::New);
  ScorerParams last;
  for (bool reward : {false, true}) {
    TrainConfig cfg;
    cfg.use_consistency = reward;
    cfg.eval_each_epoch = false;
    last = iterative_train(cfg, train.examples, pairs).params;
    const auto rep = evaluate(last, dev.examples, g);
    std::printf("%-12s dev accuracy %.3f  consistency %.3f\n", reward ? "new+reward" : "new", rep.accuracy,
                rep.consistency);
  }

  for (std::size_t i = 0; i < 3; ++i) {
    const auto& ex = dev.examples[i];
    const Beam beam = beam_search(last, g, ex.tokens);
    std::printf("\n\"%s\"\n  gold    %s\n  decoded %s\n", ex.text.c_str(), dev.gold_programs[i].c_str(),
                beam.empty() ? "(none)" : pretty_print(g, beam.front().program).c_str());
  }
}

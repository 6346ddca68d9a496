// nlvr: command-line front end for corpus generation, pairing, search,
// execution, training and evaluation.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "nlvr.hpp"

using namespace nlvr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything needed to rerun a command: its resolved options, the seed and
// digests of every input file. Output files are digested too so reruns can
// be compared.
class Manifest {
public:
  explicit Manifest(std::string command) : command_(std::move(command)), started_(utc_now()) {}

  void option(const std::string& key, json value) { options_[key] = std::move(value); }
  void input(const std::string& path) { inputs_[path] = sha256_hex(read_file(path)); }
  void output(const std::string& path) { outputs_[path] = sha256_hex(read_file(path)); }

  void write(const std::string& path, std::uint64_t seed) const {
    json j{{"command", command_},
           {"version", std::string(kVersion)},
           {"seed", seed},
           {"options", options_},
           {"config_hash", sha256_hex(options_.dump())},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"started", started_},
           {"finished", utc_now()}};
    write_file(path, j.dump(2) + "\n");
  }

private:
  std::string command_;
  std::string started_;
  json options_ = json::object();
  json inputs_ = json::object();
  json outputs_ = json::object();
};

LanguageVariant variant_of(const std::string& s) {
  auto v = parse_variant(s);
  if (!v) throw std::invalid_argument("grammar must be 'new' or 'old', got '" + s + "'");
  return *v;
}

const Example& find_example(const Corpus& corpus, const std::string& id) {
  for (const auto& e : corpus)
    if (e.id == id) return e;
  throw DataError("utterance '" + id + "' is not in the corpus");
}

ScorerParams load_checkpoint(const std::string& path, LanguageVariant& variant) {
  const json j = parse_json_text(read_file(path), path);
  if (!j.is_object() || !j.contains("grammar")) throw DataError(path + ": checkpoint has no 'grammar' field");
  variant = variant_of(j.at("grammar").get<std::string>());
  return params_from_json(j, build_grammar(variant));
}

std::vector<std::string> action_names(const Grammar& g, const ActionSet& s) {
  std::vector<std::string> out;
  for (ActionId a : s) out.push_back(g.action(a).id);
  return out;
}

struct Globals {
  std::uint64_t seed = 0;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string manifest;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typed-DSL semantic parsing toolkit with a consistency reward"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals G;
  app.add_option("--seed", G.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", G.jobs, "Worker threads for search and evaluation")->check(CLI::PositiveNumber);
  app.add_option("--manifest", G.manifest, "Also write a run manifest to this path");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  std::size_t gen_n = 200;
  int gen_scenes = 4;
  std::string gen_out, gen_gold;
  gen->add_option("--n", gen_n, "Number of utterances")->capture_default_str();
  gen->add_option("--scenes-per-utterance", gen_scenes, "Scenes per utterance")->capture_default_str();
  gen->add_option("--out", gen_out, "Corpus JSON to write")->required();
  gen->add_option("--gold", gen_gold, "Also write the gold programs (id -> program text)");

  // pair
  auto* pair = app.add_subcommand("pair", "Pair utterances that share an equivalent phrase");
  std::string pair_corpus, pair_out;
  pair->add_option("--corpus", pair_corpus)->required()->check(CLI::ExistingFile);
  pair->add_option("--out", pair_out, "Pairs JSON to write")->required();

  // enumerate
  auto* en = app.add_subcommand("enumerate", "List every program up to a length");
  std::string en_grammar = "new", en_scenes, en_utt;
  int en_max = 6;
  en->add_option("--grammar", en_grammar)->capture_default_str();
  en->add_option("--max-actions", en_max)->capture_default_str()->check(CLI::Range(1, 12));
  en->add_option("--scenes", en_scenes, "Corpus; keep programs correct on its labeled scenes")->check(CLI::ExistingFile);
  en->add_option("--utterance", en_utt, "Restrict --scenes to one utterance id");

  // execute
  auto* ex = app.add_subcommand("execute", "Run a program on scenes");
  std::string ex_grammar = "new", ex_program, ex_scenes, ex_utt;
  ex->add_option("--grammar", ex_grammar)->capture_default_str();
  ex->add_option("--program", ex_program, "Program text")->required();
  ex->add_option("--scenes", ex_scenes, "Corpus JSON")->required()->check(CLI::ExistingFile);
  ex->add_option("--utterance", ex_utt, "Only the scenes of this utterance");

  // train
  auto* tr = app.add_subcommand("train", "Iterative MML / reward training");
  std::string tr_corpus, tr_pairs, tr_config, tr_out;
  bool tr_consistency = false;
  tr->add_option("--corpus", tr_corpus)->required()->check(CLI::ExistingFile);
  tr->add_option("--pairs", tr_pairs, "Pairs JSON; enables the consistency reward")->check(CLI::ExistingFile);
  tr->add_option("--config", tr_config, "TrainConfig JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_flag("--consistency", tr_consistency, "Force the consistency reward on (needs --pairs)");

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy and consistency of a checkpoint");
  std::string ev_corpus, ev_ckpt;
  std::size_t ev_beam = 10;
  bool ev_per = false;
  ev->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--beam", ev_beam)->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_flag("--per-utterance", ev_per, "Include per-utterance records");

  // reward
  auto* rw = app.add_subcommand("reward", "Show relevant actions and consistency rewards for one pair");
  std::string rw_corpus, rw_pairs, rw_ckpt;
  std::size_t rw_pair = 0, rw_beam = 10;
  double rw_tau = kDefaultRelevanceThreshold;
  rw->add_option("--corpus", rw_corpus)->required()->check(CLI::ExistingFile);
  rw->add_option("--pairs", rw_pairs)->required()->check(CLI::ExistingFile);
  rw->add_option("--pair", rw_pair, "Index into the pairs file")->required();
  rw->add_option("--checkpoint", rw_ckpt)->required()->check(CLI::ExistingFile);
  rw->add_option("--beam", rw_beam)->capture_default_str()->check(CLI::PositiveNumber);
  rw->add_option("--tau", rw_tau)->capture_default_str()->check(CLI::Range(0.0, 1.0));

  // probe
  app.add_subcommand("probe", "Relevant-action overlap of gold programs in both languages");

  // ablation
  auto* ab = app.add_subcommand("ablation", "Train {old,new} x {reward off,on} over several seeds");
  AblationConfig ab_cfg;
  std::string ab_out, ab_config;
  ab->add_option("--train-n", ab_cfg.train_utterances)->capture_default_str();
  ab->add_option("--dev-n", ab_cfg.dev_utterances)->capture_default_str();
  ab->add_option("--dev-seed", ab_cfg.dev_seed)->capture_default_str();
  ab->add_option("--seeds", ab_cfg.seeds, "Training seeds")->capture_default_str();
  ab->add_option("--config", ab_config, "TrainConfig JSON shared by all runs")->check(CLI::ExistingFile);
  ab->add_option("--out", ab_out, "Report JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    Manifest manifest(cmd);
    manifest.option("jobs", G.jobs);
    std::string default_manifest;

    if (cmd == "gen") {
      GeneratorConfig gc;
      gc.scenes_per_utterance = gen_scenes;
      const auto corpus = generate_corpus(G.seed, gen_n, builtin_utterance_templates(), gc);
      for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << "\n";
      save_corpus(gen_out, corpus.examples);
      manifest.option("n", gen_n);
      manifest.option("scenes_per_utterance", gen_scenes);
      manifest.output(gen_out);
      if (!gen_gold.empty()) {
        json gold = json::object();
        for (std::size_t i = 0; i < corpus.examples.size(); ++i) gold[corpus.examples[i].id] = corpus.gold_programs[i];
        write_file(gen_gold, gold.dump(1) + "\n");
        manifest.output(gen_gold);
      }
      default_manifest = gen_out + ".manifest.json";
      std::cerr << "wrote " << corpus.examples.size() << " utterances to " << gen_out << "\n";
    } else if (cmd == "pair") {
      const Corpus corpus = load_corpus(pair_corpus);
      manifest.input(pair_corpus);
      PairingStats stats;
      const auto pairs = build_pairs(corpus, builtin_templates(), G.seed, &stats);
      write_file(pair_out, pairs_to_json(pairs).dump(1) + "\n");
      manifest.output(pair_out);
      default_manifest = pair_out + ".manifest.json";
      std::cerr << stats.matched_utterances << " utterances matched, " << stats.pairs << " pairs, "
                << stats.singleton_groups.size() << " phrase groups matched only once\n";
    } else if (cmd == "enumerate") {
      const Grammar g = build_grammar(variant_of(en_grammar));
      std::vector<LabeledScene> scenes;
      if (!en_scenes.empty()) {
        const Corpus corpus = load_corpus(en_scenes);
        if (!en_utt.empty()) scenes = find_example(corpus, en_utt).scenes;
        else
          for (const auto& e : corpus) scenes.insert(scenes.end(), e.scenes.begin(), e.scenes.end());
      }
      const auto index = index_scenes(scenes);
      std::size_t shown = 0;
      for (const auto& p : enumerate(g, en_max)) {
        if (!scenes.empty() && !correct_on_all(g, p, index, scenes)) continue;
        std::cout << pretty_print(g, p) << "\n";
        ++shown;
      }
      std::cerr << shown << " programs\n";
    } else if (cmd == "execute") {
      const Grammar g = build_grammar(variant_of(ex_grammar));
      const Program p = parse_text(g, ex_program);
      const Corpus corpus = load_corpus(ex_scenes);
      for (const auto& e : corpus) {
        if (!ex_utt.empty() && e.id != ex_utt) continue;
        for (const auto& s : e.scenes) std::cout << s.scene.id << " " << (execute(g, p, s.scene) ? "true" : "false") << "\n";
      }
      if (!ex_utt.empty()) (void)find_example(corpus, ex_utt);
    } else if (cmd == "train") {
      TrainConfig cfg;
      if (!tr_config.empty()) {
        cfg = train_config_from_json(parse_json_text(read_file(tr_config), tr_config));
        manifest.input(tr_config);
      }
      if (app.count("--seed")) cfg.seed = G.seed;
      std::vector<UtterancePair> pairs;
      if (!tr_pairs.empty()) {
        pairs = pairs_from_json(parse_json_text(read_file(tr_pairs), tr_pairs));
        manifest.input(tr_pairs);
        if (tr_config.empty() || tr_consistency) cfg.use_consistency = true;
      }
      if (tr_consistency) cfg.use_consistency = true;
      const Corpus corpus = load_corpus(tr_corpus);
      manifest.input(tr_corpus);
      manifest.option("config", to_json(cfg));
      G.seed = cfg.seed;

      fs::create_directories(tr_out);
      const Grammar g = build_grammar(cfg.variant);
      const std::string metrics_path = (fs::path(tr_out) / "metrics.jsonl").string();
      std::ofstream metrics(metrics_path, std::ios::trunc);
      if (!metrics) throw DataError("cannot write '" + metrics_path + "'");
      TrainHooks hooks;
      hooks.on_epoch = [&](const EpochMetrics& m) {
        metrics << to_json(m).dump() << "\n" << std::flush;
        std::cerr << m.phase << " iteration " << m.iteration << " epoch " << m.epoch << ": accuracy " << m.accuracy
                  << " consistency " << m.consistency << " mean reward " << m.mean_reward << "\n";
      };
      hooks.on_checkpoint = [&](const PhaseCheckpoint& c) {
        const auto path = (fs::path(tr_out) / (c.phase + "-" + std::to_string(c.iteration) + ".json")).string();
        write_file(path, params_to_json(c.params, g).dump() + "\n");
      };
      const auto result = iterative_train(cfg, corpus, pairs, nullptr, hooks);
      metrics.close();
      const auto ckpt = (fs::path(tr_out) / "checkpoint.json").string();
      write_file(ckpt, params_to_json(result.params, g).dump() + "\n");
      write_file((fs::path(tr_out) / "config.json").string(), to_json(cfg).dump(2) + "\n");
      manifest.output(ckpt);
      manifest.output(metrics_path);
      default_manifest = (fs::path(tr_out) / "manifest.json").string();
      std::cerr << result.searchable << "/" << corpus.size() << " utterances had searched programs; wrote " << ckpt
                << "\n";
    } else if (cmd == "eval") {
      LanguageVariant v{};
      const auto params = load_checkpoint(ev_ckpt, v);
      const Corpus corpus = load_corpus(ev_corpus);
      manifest.input(ev_ckpt);
      manifest.input(ev_corpus);
      const auto report = evaluate(params, corpus, build_grammar(v), ev_beam, G.jobs);
      std::cout << to_json(report, ev_per).dump(2) << "\n";
    } else if (cmd == "reward") {
      LanguageVariant v{};
      const auto params = load_checkpoint(rw_ckpt, v);
      const Grammar g = build_grammar(v);
      const ActionSpace space(g);
      const Corpus corpus = load_corpus(rw_corpus);
      const auto pairs = pairs_from_json(parse_json_text(read_file(rw_pairs), rw_pairs));
      if (rw_pair >= pairs.size())
        throw DataError("pair index " + std::to_string(rw_pair) + " out of range (" + std::to_string(pairs.size()) +
                        " pairs)");
      const auto& up = pairs[rw_pair];
      const Example& x = find_example(corpus, up.x);
      const Example& xp = find_example(corpus, up.x_prime);
      const BeamConfig bc{rw_beam, kDefaultMaxActions};
      const Beam beam_x = beam_search(params, space, x.tokens, bc);
      const Beam beam_xp = beam_search(params, space, xp.tokens, bc);
      const Beam correct_xp = filter_correct(g, beam_xp, xp.scenes);
      const NeighborSet nb = make_neighbor_set(g, beam_xp, xp.scenes, up.span_x_prime, rw_tau);
      const std::vector<NeighborContext> ctx{{up.span_x, nb}};
      const auto c = consistency_rewards(beam_x, ctx, x.tokens.size(), rw_tau);
      const auto r = denotation_rewards(g, beam_x, x.scenes);
      const auto pt = renormalize(beam_x);

      json out{{"x", x.id}, {"x_prime", xp.id}, {"phrase", up.phrase}, {"tau", rw_tau}};
      auto neighbors = json::array();
      for (std::size_t k = 0; k < correct_xp.size(); ++k)
        neighbors.push_back({{"program", pretty_print(g, correct_xp[k].program)},
                             {"p", nb.weights[k]},
                             {"relevant", action_names(g, nb.relevant[k])}});
      out["neighbor_correct"] = neighbors;
      auto cands = json::array();
      for (std::size_t i = 0; i < beam_x.size(); ++i) {
        const auto a = relevant_actions(beam_x[i].attention, beam_x[i].program, up.span_x, rw_tau);
        auto s = json::array();
        for (const auto& rel : nb.relevant) s.push_back(pair_consistency(a, rel));
        cands.push_back({{"program", pretty_print(g, beam_x[i].program)},
                         {"p", pt[i]},
                         {"relevant", action_names(g, a)},
                         {"S", s},
                         {"C", c[i]},
                         {"R", r[i]}});
      }
      out["candidates"] = cands;
      std::cout << out.dump(2) << "\n";
    } else if (cmd == "probe") {
      std::cout << to_json(language_consistency_probe(builtin_probe_cases())).dump(2) << "\n";
    } else if (cmd == "ablation") {
      if (!ab_config.empty()) {
        ab_cfg.train = train_config_from_json(parse_json_text(read_file(ab_config), ab_config));
        manifest.input(ab_config);
      }
      if (ab_cfg.seeds.empty()) throw std::invalid_argument("ablation: at least one seed is required");
      ab_cfg.corpus_seed = app.count("--seed") ? G.seed : ab_cfg.corpus_seed;
      G.seed = ab_cfg.corpus_seed;
      ab_cfg.jobs = G.jobs;
      manifest.option("train", to_json(ab_cfg.train));
      manifest.option("train_n", ab_cfg.train_utterances);
      manifest.option("dev_n", ab_cfg.dev_utterances);
      manifest.option("dev_seed", ab_cfg.dev_seed);
      manifest.option("seeds", ab_cfg.seeds);
      const auto rep = run_ablation(ab_cfg, [](const AblationRun& r) {
        std::cerr << r.config << " seed " << r.seed << ": accuracy " << r.accuracy << " consistency " << r.consistency
                  << " (" << r.seconds << " s)\n";
      });
      std::cout << format_ablation_table(rep);
      if (!ab_out.empty()) {
        json j = to_json(rep);
        // wall-clock times vary between reruns; keep them out of the report file
        for (auto& row : j["rows"]) row.erase("max_seconds");
        for (auto& run : j["runs"]) run.erase("seconds");
        write_file(ab_out, j.dump(2) + "\n");
        manifest.output(ab_out);
        default_manifest = ab_out + ".manifest.json";
      }
    }

    if (!G.manifest.empty()) manifest.write(G.manifest, G.seed);
    else if (!default_manifest.empty()) manifest.write(default_manifest, G.seed);
    return 0;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

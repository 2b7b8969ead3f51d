// Copyright 2026 The GoalWeaver Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// goalweaver: command-line front end for the story pipeline.
//
// Exit codes: 0 success, 2 usage or configuration, 3 data, 4 external
// service, 1 anything unexpected.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "goalweaver/config.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/pipeline.hpp"

namespace {

using goalweaver::RunConfig;

// Flags shared by every command. Flag values override the config file;
// `--set key=value` overrides both.
struct GlobalFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string index;
  bool verbose = false;
};

RunConfig resolve(const GlobalFlags& g) {
  RunConfig c = goalweaver::load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.output.empty()) c.output = g.output;
  if (!g.index.empty()) c.index_path = g.index;
  for (const auto& o : g.overrides) goalweaver::apply_override(c, o);
  return c;
}

int run(int argc, char** argv) {
  CLI::App app{"Goal-driven story generation with verb-class rewards."};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "config file (default: $GOALWEAVER_CONFIG)");
  app.add_option("--set", g.overrides, "override a config key, e.g. --set dqn.epochs=5");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--output", g.output, "output directory");
  app.add_option("--index", g.index, "verb class index file");
  app.add_flag("-v,--verbose", g.verbose, "log progress to stderr");

  auto* pre = app.add_subcommand("preprocess", "split the corpus into train and test manifests");
  std::string corpus, format;
  std::optional<double> split;
  pre->add_option("--corpus", corpus, "corpus file");
  pre->add_option("--format", format, "corpus format: lines or blocks");
  pre->add_option("--split", split, "training fraction");

  auto* rew = app.add_subcommand("rewards", "reward table and clusters for a goal class");
  std::string goal;
  std::optional<std::size_t> k;
  rew->add_option("--goal", goal, "goal verb class");
  rew->add_option("--k", k, "number of clusters (default: smallest k reaching the GVF threshold)");

  auto* trn = app.add_subcommand("train", "train the language model, a policy or the fine-tuned model");
  std::string mode = "dqn";
  std::optional<std::size_t> epochs;
  trn->add_option("--mode", mode, "lm, dqn or rsft");
  trn->add_option("--epochs", epochs, "training epochs");

  auto* gen = app.add_subcommand("generate", "generate one story from seed text");
  std::string seed_text, model = "kg-dqn";
  gen->add_option("--seed-text", seed_text, "first sentence of the story")->required();
  gen->add_option("--goal", goal, "goal verb class (default: the stored reward table's)");
  gen->add_option("--model", model, "generator name");

  auto* ev = app.add_subcommand("evaluate", "generate from every seed and report metrics");
  std::string models = "kg-dqn,ngram", seeds;
  std::size_t limit = 0;
  ev->add_option("--models", models, "comma-separated generator names");
  ev->add_option("--seeds", seeds, "seed manifest (default: test.manifest in the output directory)");
  ev->add_option("--limit", limit, "use at most this many seeds (0: all)");

  auto* syn = app.add_subcommand("synth", "write the planted chain corpus and its verb index");
  std::string synth_dir = ".";
  syn->add_option("--dir", synth_dir, "destination directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(goalweaver::ErrorKind::kUsage);
  }

  if (g.verbose) goalweaver::log::set_threshold(goalweaver::log::Level::kInfo);

  if (syn->parsed()) {
    std::cout << goalweaver::pipeline::synth(synth_dir, g.seed.value_or(0));
    return 0;
  }
  RunConfig c = resolve(g);
  if (pre->parsed()) {
    if (!corpus.empty()) c.corpus_path = corpus;
    if (!format.empty()) c.corpus_format = goalweaver::parse_corpus_format(format);
    if (split) c.split = *split;
    std::cout << goalweaver::pipeline::preprocess(c);
  } else if (rew->parsed()) {
    if (!goal.empty()) c.goal = goal;
    if (k) c.clusters = *k;
    std::cout << goalweaver::pipeline::rewards(c);
  } else if (trn->parsed()) {
    if (epochs) {
      c.dqn.epochs = *epochs;
      c.rsft.epochs = *epochs;
    }
    std::cout << goalweaver::pipeline::train(c, mode);
  } else if (gen->parsed()) {
    std::cout << goalweaver::pipeline::generate(c, model, seed_text, goal);
  } else if (ev->parsed()) {
    std::cout << goalweaver::pipeline::evaluate_models(c, models, seeds, limit).to_text();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const goalweaver::Error& e) {
    std::cerr << "goalweaver: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "goalweaver: unexpected error: " << e.what() << '\n';
    return 1;
  }
}

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

// The command pipeline over an output directory:
//
//   preprocess  train.manifest, test.manifest
//   rewards     rewards.tsv
//   train       lm.ckpt, then kg-dqn/ or dqn/ (Q-network checkpoints) or
//               rsft/ (tuned-model checkpoints), each with train.log
//   generate    one story on stdout
//   evaluate    report.txt, report.json, stories.txt
//   synth       corpus.txt, index.tsv (planted chain corpus)
//
// Commands share nothing but these files.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "goalweaver/config.hpp"
#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/eval.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/policy.hpp"
#include "goalweaver/remote.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rsft.hpp"
#include "goalweaver/synthetic.hpp"

namespace goalweaver::pipeline {

namespace fs = std::filesystem;

inline fs::path out_path(const RunConfig& c, const std::string& name) { return fs::path(c.output) / name; }

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

// A path the user named must exist; a missing one is a usage error.
inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

// An artifact an earlier command should have produced.
inline void require_artifact(const fs::path& path, const char* producer) {
  if (!fs::is_regular_file(path)) {
    throw DataError("missing " + path.string() + " (run '" + producer + "' first)");
  }
}

inline VerbClassIndex load_index(const RunConfig& c) {
  require_file(c.index_path, "verb index");
  return load_verbnet_index(c.index_path);
}

inline Corpus load_split(const RunConfig& c, const VerbClassIndex& index, const std::string& name) {
  const auto path = out_path(c, name);
  require_artifact(path, "preprocess");
  return load_manifest_corpus(load_manifest(path.string()), index);
}

// preprocess: seeded split of the corpus into train and test manifests.
inline std::string preprocess(const RunConfig& c) {
  c.validate();
  const auto index = load_index(c);
  require_file(c.corpus_path, "corpus");
  const auto corpus = load_corpus(c.corpus_path, c.corpus_format, &index);
  const auto [train, test] = split_corpus(corpus, c.split, derive_seed(c.seed, "corpus/split"));
  auto manifest = [&c](const Corpus& part) {
    Manifest m{c.corpus_path, c.corpus_format, {}};
    for (const auto& s : part.stories()) m.ids.push_back(s.id);
    return format_manifest(m);
  };
  write_text(out_path(c, "train.manifest"), manifest(train));
  write_text(out_path(c, "test.manifest"), manifest(test));
  std::size_t annotated = 0;
  for (const auto& s : corpus.stories()) {
    for (const auto& sentence : s.sentences) annotated += sentence.verb_class.has_value();
  }
  return "stories " + std::to_string(corpus.size()) + " (train " + std::to_string(train.size()) + ", test " +
         std::to_string(test.size()) + "), sentences " + std::to_string(corpus.stats().sentence_count) +
         ", with verb class " + std::to_string(annotated) + "\n";
}

struct RewardArtifacts {
  RewardTable table;
  ClusterAssignment clusters;
};

inline RewardArtifacts compute_rewards(const RunConfig& c, const Corpus& train, const VerbClass& goal) {
  if (goal.empty()) throw UsageError("no goal class given (rewards.goal or --goal)");
  auto table = compute_reward_table(train, goal);
  auto clusters = cluster_rewards(table, c.clusters, c.gvf_threshold);
  return {std::move(table), std::move(clusters)};
}

// rewards: reward table and clusters from the training split.
inline std::string rewards(const RunConfig& c) {
  c.validate();
  const auto index = load_index(c);
  const auto train = load_split(c, index, "train.manifest");
  const auto r = compute_rewards(c, train, c.goal);
  write_text(out_path(c, "rewards.tsv"), format_rewards(r.table, r.clusters));
  return format_rewards(r.table, r.clusters);
}

inline RewardArtifacts load_rewards(const RunConfig& c) {
  const auto path = out_path(c, "rewards.tsv");
  require_artifact(path, "rewards");
  auto [table, clusters] = parse_rewards(read_file(path.string()), path.string());
  return {std::move(table), std::move(clusters)};
}

inline NgramModel train_lm(const RunConfig& c, const Corpus& train) {
  NgramConfig lm = c.lm;
  lm.seed = c.seed;
  auto model = NgramModel::train(train, lm);
  const auto path = out_path(c, "lm.ckpt");
  fs::create_directories(path.parent_path());
  model.save(path.string());
  return model;
}

inline std::shared_ptr<const NgramModel> load_lm(const RunConfig& c) {
  const auto path = out_path(c, "lm.ckpt");
  require_artifact(path, "train");
  return std::make_shared<const NgramModel>(NgramModel::load(path.string()));
}

inline std::string policy_dir_name(StateMode mode) { return mode == StateMode::kGraph ? "kg-dqn" : "dqn"; }

inline std::string checkpoint_name(std::size_t epoch, const char* extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%03zu.%s", epoch, extension);
  return buf;
}

// The proposal model policies train and generate with: the n-gram model,
// or the remote service embedding through it.
struct Proposals {
  std::shared_ptr<const NgramModel> ngram;
  std::unique_ptr<RemoteModel> remote;

  const ProposalModel& model() const {
    return remote ? static_cast<const ProposalModel&>(*remote) : *ngram;
  }
};

inline Proposals make_proposals(const RunConfig& c, std::shared_ptr<const NgramModel> ngram) {
  Proposals p{std::move(ngram), nullptr};
  if (c.backend == "remote") p.remote = std::make_unique<RemoteModel>(c.endpoint, *p.ngram, c.remote_options());
  return p;
}

// train: mode lm | dqn | rsft. Returns the number of checkpoints written.
inline std::string train(const RunConfig& c, const std::string& mode) {
  if (mode != "lm" && mode != "dqn" && mode != "rsft") {
    throw UsageError("unknown training mode '" + mode + "' (expected lm, dqn or rsft)");
  }
  c.validate();
  const auto index = load_index(c);
  const auto train_corpus = load_split(c, index, "train.manifest");
  auto ngram = std::make_shared<const NgramModel>(train_lm(c, train_corpus));
  if (mode == "lm") return "language model: vocabulary " + std::to_string(ngram->vocabulary_size()) + "\n";

  const auto r = load_rewards(c);
  if (mode == "dqn") {
    const auto proposals = make_proposals(c, ngram);
    const fs::path dir = out_path(c, policy_dir_name(c.dqn.network.mode));
    fs::create_directories(dir);
    const DqnTrainInputs in{train_corpus, proposals.model(), index, r.table, r.clusters};
    std::size_t written = 0;
    auto result = train_dqn(in, c.dqn, derive_seed(c.seed, "policy"), [&](const DqnCheckpoint& cp) {
      qnet_to_container(cp.params, &c.dqn).save((dir / checkpoint_name(cp.epoch, "qnet")).string());
      ++written;
      log::info("epoch " + std::to_string(cp.epoch) + ": selection goal rate " +
                format_double(cp.selection_goal_rate));
    });
    qnet_to_container(result.params, &c.dqn).save((dir / "best.qnet").string());
    std::string log_text;
    for (const auto& line : result.log) log_text += line + "\n";
    write_text(dir / "train.log", log_text);
    return "checkpoints " + std::to_string(written) + ", best epoch " + std::to_string(result.best_epoch) +
           ", skipped stories " + std::to_string(result.skipped_stories) + "\n";
  }

  if (c.backend == "remote") throw UsageError("remote models cannot be fine-tuned");
  const fs::path dir = out_path(c, "rsft");
  fs::create_directories(dir);
  std::size_t written = 0;
  auto result = train_rsft(ngram, train_corpus, RsftInputs{index, r.table, r.clusters}, c.rsft,
                           derive_seed(c.seed, "rsft"), [&](const RsftCheckpoint& cp) {
                             cp.model.save((dir / checkpoint_name(cp.epoch, "tuned")).string());
                             ++written;
                           });
  result.model.save((dir / "final.tuned").string());
  std::string log_text;
  for (const auto& record : result.log) log_text += format_rsft_record(record) + "\n";
  write_text(dir / "train.log", log_text);
  return "checkpoints " + std::to_string(written) + "\n";
}

// Everything a named generator needs, kept alive together.
struct LoadedGenerator {
  GeneratorBundle bundle;
  std::unique_ptr<TunedModel> tuned;
  std::unique_ptr<QNetworkParams> policy;
  std::unique_ptr<RemoteModel> remote;
};

// Names: ngram, rsft, remote, kg-dqn, dqn; a policy name with an "-rs"
// suffix proposes from the fine-tuned model instead of the base model.
inline LoadedGenerator load_generator(const RunConfig& c, const std::string& name,
                                      const std::shared_ptr<const NgramModel>& ngram) {
  LoadedGenerator g;
  g.bundle.name = name;
  auto load_tuned = [&]() {
    const auto path = out_path(c, "rsft/final.tuned");
    require_artifact(path, "train --mode rsft");
    g.tuned = std::make_unique<TunedModel>(TunedModel::load(path.string(), ngram));
  };
  auto load_policy = [&](const std::string& dir) {
    const auto path = out_path(c, dir + "/best.qnet");
    require_artifact(path, "train --mode dqn");
    g.policy = std::make_unique<QNetworkParams>(qnet_from_container(Container::load(path.string())));
    g.bundle.policy = g.policy.get();
  };
  if (name == "ngram") {
    g.bundle.lm = ngram.get();
    g.bundle.report_perplexity = true;
  } else if (name == "rsft") {
    load_tuned();
    g.bundle.lm = g.tuned.get();
    g.bundle.report_perplexity = true;
  } else if (name == "remote") {
    g.remote = std::make_unique<RemoteModel>(c.endpoint, *ngram, c.remote_options());
    g.bundle.lm = g.remote.get();
  } else if (name == "kg-dqn" || name == "dqn" || name == "kg-dqn-rs" || name == "dqn-rs") {
    const bool rs = name.ends_with("-rs");
    load_policy(rs ? name.substr(0, name.size() - 3) : name);
    if (rs) {
      load_tuned();
      g.bundle.lm = g.tuned.get();
    } else if (c.backend == "remote") {
      g.remote = std::make_unique<RemoteModel>(c.endpoint, *ngram, c.remote_options());
      g.bundle.lm = g.remote.get();
    } else {
      g.bundle.lm = ngram.get();
    }
  } else {
    throw UsageError("unknown model '" + name + "' (expected ngram, rsft, remote, kg-dqn, dqn, kg-dqn-rs, dqn-rs)");
  }
  return g;
}

// Rewards for `goal`: the stored table when it matches, else recomputed
// from the training split.
inline RewardArtifacts rewards_for_goal(const RunConfig& c, const VerbClassIndex& index, const VerbClass& goal) {
  auto stored = load_rewards(c);
  if (goal.empty() || stored.table.goal == goal) return stored;
  log::info("recomputing rewards for goal " + goal);
  return compute_rewards(c, load_split(c, index, "train.manifest"), goal);
}

// generate: one story from free seed text.
inline std::string generate(const RunConfig& c, const std::string& model, const std::string& seed_text,
                            const VerbClass& goal_override) {
  c.validate();
  if (trim(seed_text).empty()) throw UsageError("--seed-text must not be empty");
  const auto index = load_index(c);
  const auto r = rewards_for_goal(c, index, goal_override);
  const auto ngram = load_lm(c);
  auto g = load_generator(c, model, ngram);
  const Sentence seed = annotate_verb_class(Sentence::from_text(seed_text), index);
  Rng rng(derive_seed(c.seed, "generate"));
  const auto story = generate_story(seed, r.table.goal, g.bundle, index, r.clusters, c.eval_generation(), rng);
  return format_story(story, model);
}

inline std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  for (auto part : split(list, ',')) {
    auto name = trim(part);
    if (!name.empty()) out.emplace_back(name);
  }
  if (out.empty()) throw UsageError("no model names given");
  return out;
}

// evaluate: stories and metrics for each model over the seed manifest.
inline EvalReport evaluate_models(const RunConfig& c, const std::string& models, const std::string& seeds_path,
                                  std::size_t limit = 0) {
  c.validate();
  const auto index = load_index(c);
  const auto r = load_rewards(c);
  const auto ngram = load_lm(c);
  const std::string manifest_path = seeds_path.empty() ? out_path(c, "test.manifest").string() : seeds_path;
  if (!fs::is_regular_file(manifest_path)) throw UsageError("seed manifest not found: " + manifest_path);
  const auto seed_corpus = load_manifest_corpus(load_manifest(manifest_path), index);
  std::vector<Sentence> seeds;
  for (const auto& s : seed_corpus.stories()) {
    if (limit && seeds.size() == limit) break;
    seeds.push_back(s.sentences.front());
  }
  std::vector<LoadedGenerator> loaded;
  for (const auto& name : split_names(models)) loaded.push_back(load_generator(c, name, ngram));
  std::vector<GeneratorBundle> bundles;
  for (const auto& g : loaded) bundles.push_back(g.bundle);
  const EvalInputs in{index, r.clusters, &seed_corpus};
  auto report = evaluate(bundles, seeds, r.table.goal, in, c.eval_generation(), derive_seed(c.seed, "eval"));
  report.master_seed = c.seed;
  write_text(out_path(c, "report.txt"), report.to_text());
  write_text(out_path(c, "report.json"), report.to_json().dump(2) + "\n");
  write_text(out_path(c, "stories.txt"), report.story_dump());
  return report;
}

// synth: the planted chain corpus and its verb index, written to `dir`.
inline std::string synth(const std::string& dir, std::uint64_t seed) {
  const auto planted = planted_chain_corpus(PlantedChainConfig{}, seed);
  write_text(fs::path(dir) / "corpus.txt", planted.text);
  write_text(fs::path(dir) / "index.tsv", planted.index_text);
  return "stories " + std::to_string(planted.corpus.size()) + ", goal " + planted.goal + "\n";
}

}  // namespace goalweaver::pipeline

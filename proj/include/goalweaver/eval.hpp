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

// Story generation from seed sentences and the automated metrics: goal
// rate, REP-4, average length of goal-reaching stories and perplexity.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/generation.hpp"
#include "goalweaver/kg.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/policy.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rng.hpp"

namespace goalweaver {

inline constexpr std::size_t kMaxContinuations = 15;

struct GeneratedStory {
  Sentence seed;
  std::vector<Candidate> continuations;
  TerminalCause terminal_cause = TerminalCause::kLengthLimit;
  KnowledgeGraph graph;

  std::size_t sentence_count() const { return continuations.size() + 1; }

  std::vector<std::string> tokens() const {
    std::vector<std::string> out = seed.tokens;
    for (const auto& c : continuations) out.insert(out.end(), c.tokens.begin(), c.tokens.end());
    return out;
  }
};

// A proposal model, optionally steered by a Q-network. Without a policy the
// first cleaned candidate is taken; candidates are independent samples, so
// this is a draw from the model restricted to valid sentences.
struct GeneratorBundle {
  std::string name;
  const ProposalModel* lm = nullptr;
  const QNetworkParams* policy = nullptr;
  double epsilon = 0.0;
  // Perplexity is reported for plain built-in models only.
  bool report_perplexity = false;
};

inline Chooser first_candidate_chooser() {
  return [](const EpisodeState&, std::span<const Candidate>, Rng&) { return std::size_t{0}; };
}

inline GeneratedStory generate_story(const Sentence& seed, const VerbClass& goal, const GeneratorBundle& generator,
                                     const VerbClassIndex& index, const ClusterAssignment& clusters,
                                     const GenerationConfig& config, Rng& rng) {
  if (!generator.lm) throw UsageError("generator '" + generator.name + "' has no language model");
  if (config.max_continuations > kMaxContinuations) {
    throw UsageError("at most " + std::to_string(kMaxContinuations) + " continuations per story");
  }
  const Chooser chooser = generator.policy
                              ? policy_chooser(*generator.policy, *generator.lm, clusters, generator.epsilon)
                              : first_candidate_chooser();
  auto episode = run_episode(seed, goal, *generator.lm, index, clusters, config, chooser, rng);
  return GeneratedStory{seed, std::move(episode.continuations), episode.cause, std::move(episode.graph)};
}

inline double goal_rate(std::span<const GeneratedStory> stories) {
  if (stories.empty()) throw DataError("goal_rate of an empty story list");
  std::size_t reached = 0;
  for (const auto& s : stories) reached += s.terminal_cause == TerminalCause::kGoalReached;
  return static_cast<double>(reached) / static_cast<double>(stories.size());
}

// True when some token 4-gram occurs at least twice across the whole story,
// seed included, windows spanning sentence boundaries.
inline bool has_repeated_4gram(std::span<const std::string> tokens) {
  if (tokens.size() < 5) return false;
  std::map<std::vector<std::string_view>, std::size_t> seen;
  for (std::size_t i = 0; i + 4 <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + 4));
    if (++seen[std::move(gram)] >= 2) return true;
  }
  return false;
}

inline double rep4(std::span<const GeneratedStory> stories) {
  if (stories.empty()) throw DataError("rep4 of an empty story list");
  std::size_t repetitive = 0;
  for (const auto& s : stories) repetitive += has_repeated_4gram(s.tokens());
  return static_cast<double>(repetitive) / static_cast<double>(stories.size());
}

// Mean sentence count over goal-reaching stories; absent when none reached.
inline std::optional<double> avg_length(std::span<const GeneratedStory> stories) {
  std::size_t count = 0, total = 0;
  for (const auto& s : stories) {
    if (s.terminal_cause != TerminalCause::kGoalReached) continue;
    ++count;
    total += s.sentence_count();
  }
  if (count == 0) return std::nullopt;
  return static_cast<double>(total) / static_cast<double>(count);
}

// Token-level perplexity over whole stories, each scored from an empty
// context.
inline double corpus_perplexity(const ProposalModel& model, const Corpus& corpus) {
  double logprob = 0.0;
  std::size_t tokens = 0;
  for (const auto& story : corpus.stories()) {
    std::vector<std::string> stream;
    for (const auto& s : story.sentences) stream.insert(stream.end(), s.tokens.begin(), s.tokens.end());
    if (stream.empty()) continue;
    logprob += model.sequence_logprob({}, stream);
    tokens += stream.size();
  }
  if (tokens == 0) throw DataError("perplexity over an empty corpus");
  return std::exp(-logprob / static_cast<double>(tokens));
}

struct ModelReport {
  std::string name;
  std::size_t stories = 0;
  std::size_t failed = 0;
  double goal_rate = 0.0;
  double rep4 = 0.0;
  std::optional<double> avg_length;
  std::optional<double> perplexity;
  std::vector<GeneratedStory> generated;
};

struct EvalReport {
  VerbClass goal;
  std::size_t seeds = 0;
  std::uint64_t master_seed = 0;
  std::vector<ModelReport> models;

  std::string to_text() const;
  nlohmann::ordered_json to_json() const;
  std::string story_dump() const;
};

namespace detail {

inline std::string optional_number(const std::optional<double>& v) { return v ? format_double(*v) : "absent"; }

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline std::string EvalReport::to_text() const {
  std::string out = "# goalweaver evaluation report v1\n";
  out += "goal = " + goal + "\n";
  out += "seeds = " + std::to_string(seeds) + "\n";
  out += "master_seed = " + std::to_string(master_seed) + "\n";
  for (const auto& m : models) {
    out += "\n[model " + m.name + "]\n";
    out += "stories = " + std::to_string(m.stories) + "\n";
    out += "failed = " + std::to_string(m.failed) + "\n";
    out += "goal_rate = " + format_double(m.goal_rate) + "\n";
    out += "rep4 = " + format_double(m.rep4) + "\n";
    out += "avg_length = " + detail::optional_number(m.avg_length) + "\n";
    out += "perplexity = " + detail::optional_number(m.perplexity) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["goal"] = goal;
  j["seeds"] = seeds;
  j["master_seed"] = master_seed;
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : models) {
    nlohmann::ordered_json row;
    row["name"] = m.name;
    row["stories"] = m.stories;
    row["failed"] = m.failed;
    row["goal_rate"] = m.goal_rate;
    row["rep4"] = m.rep4;
    row["avg_length"] = detail::optional_json(m.avg_length);
    row["perplexity"] = detail::optional_json(m.perplexity);
    j["models"].push_back(std::move(row));
  }
  return j;
}

// One block per story: a header line, the seed, then each continuation.
inline std::string format_story(const GeneratedStory& story, const std::string& label) {
  std::string out = "@" + label + "\t" + std::string(terminal_cause_name(story.terminal_cause)) + "\t" +
                    std::to_string(story.sentence_count()) + "\n";
  out += story.seed.text + "\n";
  for (const auto& c : story.continuations) out += c.text + "\n";
  return out;
}

inline std::string EvalReport::story_dump() const {
  std::string out;
  for (const auto& m : models) {
    for (std::size_t i = 0; i < m.generated.size(); ++i) {
      if (!out.empty()) out += "\n";
      out += format_story(m.generated[i], m.name + "/" + std::to_string(i));
    }
  }
  return out;
}

struct EvalInputs {
  const VerbClassIndex& index;
  const ClusterAssignment& clusters;
  // Stories scored for perplexity; none skips it.
  const Corpus* perplexity_corpus = nullptr;
};

// One story per (model, seed). Seed i draws from the same derived stream for
// every model. Seeds that fail with a data error are logged and counted.
inline EvalReport evaluate(std::span<const GeneratorBundle> models, std::span<const Sentence> seeds,
                           const VerbClass& goal, const EvalInputs& in, const GenerationConfig& config,
                           std::uint64_t master_seed) {
  if (models.empty()) throw UsageError("evaluate needs at least one model");
  if (seeds.empty()) throw DataError("evaluate needs at least one seed sentence");
  EvalReport report;
  report.goal = goal;
  report.seeds = seeds.size();
  report.master_seed = master_seed;
  for (const auto& model : models) {
    ModelReport row;
    row.name = model.name;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      Rng rng(derive_seed(master_seed, "eval/story", i));
      try {
        row.generated.push_back(generate_story(seeds[i], goal, model, in.index, in.clusters, config, rng));
      } catch (const DataError& e) {
        ++row.failed;
        log::warning(model.name + ": seed " + std::to_string(i) + " failed: " + e.what());
      }
    }
    row.stories = row.generated.size();
    if (!row.generated.empty()) {
      row.goal_rate = goal_rate(row.generated);
      row.rep4 = rep4(row.generated);
      row.avg_length = avg_length(row.generated);
    }
    if (model.report_perplexity && in.perplexity_corpus && model.lm->supports_logprob()) {
      row.perplexity = corpus_perplexity(*model.lm, *in.perplexity_corpus);
    }
    report.models.push_back(std::move(row));
  }
  return report;
}

}  // namespace goalweaver

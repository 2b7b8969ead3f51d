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

// The sentence-by-sentence generation episode shared by policy training and
// evaluation: propose candidates for the latest sentence, clean them, let a
// chooser pick one, fold its triples into the knowledge graph, repeat until
// the goal class appears, no candidate survives cleaning, or the
// continuation limit is hit.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/kg.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rng.hpp"

namespace goalweaver {

struct GenerationConfig {
  std::size_t breadth = 25;
  std::size_t max_continuations = 15;
  SamplingParams sampling{20, 1000};
};

enum class TerminalCause { kGoalReached, kNoValidCandidates, kLengthLimit };

inline std::string_view terminal_cause_name(TerminalCause cause) {
  switch (cause) {
    case TerminalCause::kGoalReached: return "goal_reached";
    case TerminalCause::kNoValidCandidates: return "no_valid_candidates";
    case TerminalCause::kLengthLimit: return "length_limit";
  }
  return "?";
}

using TripleExtractor = std::function<std::vector<Triple>(const Sentence&)>;

inline std::vector<Triple> default_triples(const Sentence& s) { return extract_triples(s); }

inline std::vector<Candidate> propose_candidates(const ProposalModel& lm, const Sentence& query,
                                                 const VerbClassIndex& index, const GenerationConfig& config,
                                                 Rng& rng) {
  const auto raw = lm.generate(query.tokens, config.breadth, config.sampling, rng);
  return clean_candidates(raw, index, config.sampling.max_tokens);
}

// What the chooser sees before each pick.
struct EpisodeState {
  const KnowledgeGraph& graph;
  const Sentence& query;
  // Most recent verb class that has a cluster; none before the first one.
  const std::optional<VerbClass>& source;
};

using Chooser = std::function<std::size_t(const EpisodeState&, std::span<const Candidate>, Rng&)>;

struct EpisodeStep {
  KnowledgeGraph graph_before;
  Sentence query;
  std::optional<VerbClass> source;
  Candidate action;
  KnowledgeGraph graph_after;
  // Cleaned candidates proposed for the action; empty when the episode ended
  // at the goal or nothing survived cleaning.
  std::vector<Candidate> next_candidates;
  bool terminal = false;
};

struct EpisodeResult {
  std::vector<Candidate> continuations;
  TerminalCause cause = TerminalCause::kLengthLimit;
  KnowledgeGraph graph;
};

struct EpisodeOptions {
  // Also propose successors for the final step of a length-limited episode,
  // so a learner can bootstrap from them.
  bool propose_after_limit = false;
  TripleExtractor extractor = default_triples;
  std::function<void(const EpisodeStep&)> on_step;
};

inline EpisodeResult run_episode(const Sentence& seed, const VerbClass& goal, const ProposalModel& lm,
                                 const VerbClassIndex& index, const ClusterAssignment& clusters,
                                 const GenerationConfig& config, const Chooser& choose, Rng& rng,
                                 const EpisodeOptions& options = {}) {
  if (seed.tokens.empty()) throw DataError("seed sentence has no tokens");
  EpisodeResult result;
  result.graph = update_graph(KnowledgeGraph{}, options.extractor(seed));
  Sentence query = seed;
  std::optional<VerbClass> source;
  if (seed.verb_class && clusters.find(*seed.verb_class)) source = seed.verb_class;

  auto candidates = propose_candidates(lm, query, index, config, rng);
  if (candidates.empty()) {
    result.cause = TerminalCause::kNoValidCandidates;
    return result;
  }
  for (std::size_t step = 1; step <= config.max_continuations; ++step) {
    const EpisodeState state{result.graph, query, source};
    const std::size_t pick = choose(state, candidates, rng);
    if (pick >= candidates.size()) throw DataError("chooser returned an out-of-range candidate");
    Candidate action = candidates[pick];
    const bool terminal = action.verb_class == goal;
    const Sentence action_sentence = action.as_sentence();
    KnowledgeGraph next_graph = update_graph(result.graph, options.extractor(action_sentence));

    std::vector<Candidate> next;
    const bool at_limit = step == config.max_continuations;
    if (!terminal && (!at_limit || options.propose_after_limit)) {
      next = propose_candidates(lm, action_sentence, index, config, rng);
    }
    if (options.on_step) {
      options.on_step(EpisodeStep{result.graph, query, source, action, next_graph, next, terminal});
    }
    result.continuations.push_back(action);
    result.graph = std::move(next_graph);
    if (clusters.find(action.verb_class)) source = action.verb_class;
    query = action_sentence;

    if (terminal) {
      result.cause = TerminalCause::kGoalReached;
      return result;
    }
    if (at_limit) break;
    if (next.empty()) {
      result.cause = TerminalCause::kNoValidCandidates;
      return result;
    }
    candidates = std::move(next);
  }
  result.cause = TerminalCause::kLengthLimit;
  return result;
}

}  // namespace goalweaver

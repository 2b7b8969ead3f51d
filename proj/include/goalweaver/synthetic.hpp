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

// A synthetic corpus with planted verb-class structure, for demos and
// end-to-end checks.
//
// Chain stories walk c1 -> c2 -> c3 -> c4 -> goal after an introduction.
// Detour stories open differently, mention one chain class and then drift
// into an idle class that never leads anywhere. Every class has its own
// object noun, so a 4-gram model can tell from "<object> . she" which class
// the previous sentence used. Detour counts shrink along the chain, which
// makes the reward strictly increase toward the goal while a random walk
// over model samples seldom completes the chain.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/rng.hpp"

namespace goalweaver {

struct PlantedChainConfig {
  std::size_t chain_stories = 50;
  // Detour stories per chain class c1..c4.
  std::vector<std::size_t> detours{60, 45, 30, 15};
  std::size_t idle_sentences = 3;
};

struct PlantedClass {
  VerbClass id;
  std::vector<std::string> lemmas;
  std::string object;
};

struct PlantedCorpus {
  std::string text;        // lines format, one "id<TAB>story" per line
  std::string index_text;  // lemma<TAB>class
  VerbClassIndex index;
  Corpus corpus;
  std::vector<VerbClass> chain;  // c1..c4
  VerbClass goal;
  VerbClass idle;
  std::vector<Sentence> chain_seeds;  // first sentence of every chain story
};

inline const std::vector<PlantedClass>& planted_classes() {
  static const std::vector<PlantedClass> classes = {
      {"run-51.3.2", {"walk", "roam"}, "forest"},
      {"search-35.2", {"search", "hunt"}, "cave"},
      {"escape-51.1", {"enter", "explore"}, "tunnel"},
      {"open-45.4", {"open", "unlock"}, "chest"},
      {"discover-84", {"discover", "uncover"}, "treasure"},
      {"wait-47.1", {"rest", "wait"}, "bed"},
  };
  return classes;
}

inline PlantedCorpus planted_chain_corpus(const PlantedChainConfig& config, std::uint64_t seed) {
  if (config.detours.size() != 4) throw UsageError("planted chain needs four detour counts");
  if (config.chain_stories == 0) throw UsageError("planted chain needs at least one chain story");
  const auto& classes = planted_classes();
  static const std::vector<std::string> names = {"anna", "bruno", "clara", "dev", "elif",
                                                 "farid", "greta", "hugo", "ines", "jonas"};
  Rng rng(derive_seed(seed, "synthetic/planted"));
  auto verb_sentence = [&rng](const PlantedClass& c) {
    const auto& lemma = c.lemmas[rng.index(c.lemmas.size())];
    return "she " + lemma + (lemma.back() == 'e' ? "d" : "ed") + " the " + c.object + " .";
  };

  PlantedCorpus out;
  std::size_t next_id = 0;
  auto emit = [&out, &next_id](const std::vector<std::string>& sentences) {
    std::string line = "s" + std::to_string(next_id++) + "\t";
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (i) line += ' ';
      line += sentences[i];
    }
    out.text += line + "\n";
  };

  for (std::size_t s = 0; s < config.chain_stories; ++s) {
    std::vector<std::string> story{"once upon a time there was a girl named " + names[s % names.size()] + " ."};
    for (std::size_t c = 0; c < 5; ++c) story.push_back(verb_sentence(classes[c]));
    emit(story);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t s = 0; s < config.detours[c]; ++s) {
      std::vector<std::string> story{"one cold day " + names[rng.index(names.size())] + " stayed home ."};
      story.push_back(verb_sentence(classes[c]));
      for (std::size_t k = 0; k < config.idle_sentences; ++k) story.push_back(verb_sentence(classes[5]));
      emit(story);
    }
  }
  for (const auto& c : classes) {
    for (const auto& lemma : c.lemmas) out.index_text += lemma + "\t" + c.id + "\n";
  }
  out.index = parse_verbnet_index(out.index_text, "<planted index>");
  out.corpus = parse_corpus(out.text, CorpusFormat::kLines, &out.index, "<planted corpus>");
  for (std::size_t c = 0; c < 4; ++c) out.chain.push_back(classes[c].id);
  out.goal = classes[4].id;
  out.idle = classes[5].id;
  for (std::size_t s = 0; s < config.chain_stories; ++s) {
    out.chain_seeds.push_back(out.corpus.stories()[s].sentences.front());
  }
  return out;
}

}  // namespace goalweaver

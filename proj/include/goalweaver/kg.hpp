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

// Story-world state as a set of <subject, relation, object> triples.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  // Normalizes all three parts; throws DataError if any ends up empty.
  static Triple make(std::string_view subject, std::string_view relation, std::string_view object) {
    Triple t{normalize_phrase(subject), normalize_phrase(relation), normalize_phrase(object)};
    if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
      throw DataError("triple with an empty component");
    }
    return t;
  }

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;
};

// Immutable value; update_graph returns a new graph.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(std::span<const Triple> triples) : triples_(triples.begin(), triples.end()) {}

  const std::set<Triple>& triples() const { return triples_; }
  bool empty() const { return triples_.empty(); }
  std::size_t size() const { return triples_.size(); }

  bool contains(const Triple& t) const { return triples_.count(t) > 0; }

  // Subjects and objects, sorted.
  std::vector<std::string> nodes() const {
    std::set<std::string> nodes;
    for (const auto& t : triples_) {
      nodes.insert(t.subject);
      nodes.insert(t.object);
    }
    return {nodes.begin(), nodes.end()};
  }

  // Undirected neighbour lists over nodes(), self-loops included, each list
  // sorted and duplicate free.
  std::vector<std::vector<std::size_t>> adjacency() const {
    const auto names = nodes();
    std::map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], i);
    std::vector<std::set<std::size_t>> sets(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) sets[i].insert(i);
    for (const auto& t : triples_) {
      const auto a = index.at(t.subject);
      const auto b = index.at(t.object);
      sets[a].insert(b);
      sets[b].insert(a);
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(sets.size());
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
  }

  bool operator==(const KnowledgeGraph&) const = default;

 private:
  friend KnowledgeGraph update_graph(const KnowledgeGraph&, std::span<const Triple>);
  std::set<Triple> triples_;
};

inline KnowledgeGraph update_graph(const KnowledgeGraph& graph, std::span<const Triple> triples) {
  KnowledgeGraph next = graph;
  next.triples_.insert(triples.begin(), triples.end());
  return next;
}

namespace detail {

inline bool is_function_word(std::string_view lower) {
  static const std::unordered_set<std::string_view> words = {
      // prepositions
      "about", "above", "across", "after", "against", "along", "among", "around", "at", "before",
      "behind", "below", "beneath", "beside", "between", "beyond", "by", "down", "during", "for",
      "from", "in", "inside", "into", "near", "of", "off", "on", "onto", "out", "outside", "over",
      "past", "through", "to", "toward", "towards", "under", "until", "up", "upon", "with",
      "within", "without",
      // conjunctions and connectives
      "and", "or", "but", "nor", "so", "yet", "then", "because", "while", "when", "if", "as",
      "than", "that", "which", "who", "whom", "whose", "where",
      // auxiliaries and negation
      "am", "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do", "does",
      "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must", "not",
      "never", "also", "just", "still", "again", "very", "too", "now", "soon", "finally",
  };
  return words.count(lower) > 0;
}

inline bool is_determiner(std::string_view lower) {
  static const std::unordered_set<std::string_view> words = {
      "a", "an", "the", "this", "these", "those", "his", "her", "its", "their", "my", "your",
      "our", "some", "any", "every", "each", "no", "another", "all", "both", "several", "many",
  };
  return words.count(lower) > 0;
}

inline bool is_word_token(std::string_view token) {
  return !token.empty() && is_word_char(token.front());
}

// Head of the first noun phrase in tokens[begin, end): the last token of the
// first run of content words, leading determiners skipped.
inline std::optional<std::string> first_phrase_head(std::span<const std::string> tokens, std::size_t begin,
                                                    std::size_t end) {
  std::optional<std::string> head;
  for (std::size_t i = begin; i < end; ++i) {
    const std::string lower = to_lower(tokens[i]);
    const bool content = is_word_token(tokens[i]) && !is_function_word(lower) && !is_determiner(lower);
    if (content) {
      head = lower;
    } else if (head) {
      break;
    }
  }
  return head;
}

}  // namespace detail

// Rule-based subject-verb-object extraction around the sentence's matched
// verb: the first noun-phrase head before it, the verb lemma, and the first
// noun-phrase head after it. Sentences without all three yield nothing.
inline std::vector<Triple> extract_triples(const Sentence& sentence) {
  if (!sentence.verb_position || sentence.verb_lemma.empty()) return {};
  const std::size_t verb = *sentence.verb_position;
  std::span<const std::string> tokens(sentence.tokens);
  std::size_t end = tokens.size();
  for (std::size_t i = verb + 1; i < tokens.size(); ++i) {
    if (is_terminator_token(tokens[i])) {
      end = i;
      break;
    }
  }
  auto subject = detail::first_phrase_head(tokens, 0, verb);
  auto object = detail::first_phrase_head(tokens, verb + 1, end);
  if (!subject || !object) return {};
  return {Triple::make(*subject, sentence.verb_lemma, *object)};
}

// Triple TSV: subject, relation, object, sentence index. '#' lines are
// comments. Returns triples grouped by sentence index.
inline std::map<std::size_t, std::vector<Triple>> parse_triples(std::string_view text,
                                                                const std::string& source = "<triples>") {
  std::map<std::size_t, std::vector<Triple>> groups;
  std::size_t row = 0;
  for (auto line : split(text, '\n')) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError(source, row, "expected 4 tab-separated fields");
    const auto index = parse_integer<std::size_t>(f[3]);
    if (!index) throw ParseError(source, row, "bad sentence index '" + std::string(f[3]) + "'");
    try {
      groups[*index].push_back(Triple::make(f[0], f[1], f[2]));
    } catch (const DataError& e) {
      throw ParseError(source, row, e.what());
    }
  }
  return groups;
}

inline std::map<std::size_t, std::vector<Triple>> import_triples(const std::string& path) {
  return parse_triples(read_file(path), path);
}

// Graph snapshot in the import format, every triple at sentence index 0.
inline std::string format_graph(const KnowledgeGraph& graph) {
  std::string out;
  for (const auto& t : graph.triples()) out += t.subject + "\t" + t.relation + "\t" + t.object + "\t0\n";
  return out;
}

}  // namespace goalweaver

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

// Story corpora annotated with verb classes.
//
// Two on-disk layouts are supported:
//
//   lines   one story per line; sentences run together and are split at
//           '.', '!' or '?' followed by whitespace. An optional "<id>\t"
//           prefix names the story.
//   blocks  stories separated by one or more blank lines, one sentence per
//           line. A leading "@id <id>" line names the story.
//
// Stories without an explicit id are named "story-<n>" by 0-based position.
// The verb class index is a TSV of lemma and class id; '#' starts a comment.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "goalweaver/error.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/rng.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

using VerbClass = std::string;

struct Sentence {
  std::string text;
  std::vector<std::string> tokens;
  std::optional<VerbClass> verb_class;
  // Token position and lemma of the verb that determined verb_class.
  std::optional<std::size_t> verb_position;
  std::string verb_lemma;

  static Sentence from_text(std::string_view text) {
    Sentence s;
    s.text = std::string(trim(text));
    s.tokens = tokenize(s.text);
    return s;
  }

  bool operator==(const Sentence&) const = default;
};

struct Story {
  std::string id;
  std::vector<Sentence> sentences;

  bool operator==(const Story&) const = default;
};

class VerbClassIndex {
 public:
  VerbClassIndex() = default;

  // Adds lemma -> class. Throws DataError if the lemma already maps to a
  // different class.
  void add(std::string_view lemma, std::string_view verb_class) {
    std::string key = to_lower(trim(lemma));
    std::string value(trim(verb_class));
    if (key.empty() || value.empty()) throw DataError("verb index entry with empty field");
    auto [it, inserted] = classes_.emplace(key, value);
    if (!inserted && it->second != value) {
      throw DataError("conflicting verb classes for lemma '" + key + "': " + it->second +
                      " and " + value);
    }
  }

  std::optional<VerbClass> lookup(std::string_view lemma) const {
    auto it = classes_.find(to_lower(lemma));
    if (it == classes_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view lemma) const { return classes_.count(to_lower(lemma)) > 0; }
  std::size_t size() const { return classes_.size(); }
  bool empty() const { return classes_.empty(); }
  const std::map<std::string, VerbClass>& entries() const { return classes_; }

  // Matches a surface token against the index through the lemmatizer.
  std::optional<std::pair<std::string, VerbClass>> match(std::string_view token) const {
    auto lemma = lemmatizer().lemmatize(token, [this](const std::string& l) {
      return classes_.count(l) > 0;
    });
    if (!lemma) return std::nullopt;
    return std::make_pair(*lemma, classes_.at(*lemma));
  }

  static const Lemmatizer& lemmatizer() {
    static const Lemmatizer instance;
    return instance;
  }

 private:
  std::map<std::string, VerbClass> classes_;
};

inline VerbClassIndex parse_verbnet_index(std::string_view text, const std::string& source = "<index>") {
  VerbClassIndex index;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || trim(fields[0]).empty() || trim(fields[1]).empty()) {
      throw ParseError(source, line_no, "expected 'lemma<TAB>class-id'");
    }
    try {
      index.add(fields[0], fields[1]);
    } catch (const DataError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return index;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline VerbClassIndex load_verbnet_index(const std::string& path) {
  return parse_verbnet_index(read_file(path), path);
}

// Sets verb_class from the first token (left to right) whose lemma is in the
// index; clears it when nothing matches. Idempotent.
inline Sentence annotate_verb_class(Sentence sentence, const VerbClassIndex& index) {
  sentence.verb_class.reset();
  sentence.verb_position.reset();
  sentence.verb_lemma.clear();
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (auto m = index.match(sentence.tokens[i])) {
      sentence.verb_lemma = m->first;
      sentence.verb_class = m->second;
      sentence.verb_position = i;
      break;
    }
  }
  return sentence;
}

// Story-level statistics over verb classes.
struct CorpusStats {
  // Number of stories containing each class.
  std::map<VerbClass, std::size_t> class_story_counts;
  // Number of stories containing both classes, keyed with first <= second.
  std::map<std::pair<VerbClass, VerbClass>, std::size_t> cooccurrence;
  std::size_t sentence_count = 0;

  // |verbs|: distinct verb classes observed.
  std::size_t distinct_classes() const { return class_story_counts.size(); }

  std::size_t count(const VerbClass& v) const {
    auto it = class_story_counts.find(v);
    return it == class_story_counts.end() ? 0 : it->second;
  }

  std::size_t count(const VerbClass& a, const VerbClass& b) const {
    auto key = a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = cooccurrence.find(key);
    return it == cooccurrence.end() ? 0 : it->second;
  }

  bool operator==(const CorpusStats&) const = default;

  static CorpusStats compute(const std::vector<Story>& stories) {
    CorpusStats stats;
    for (const auto& story : stories) {
      std::set<VerbClass> present;
      for (const auto& sentence : story.sentences) {
        ++stats.sentence_count;
        if (sentence.verb_class) present.insert(*sentence.verb_class);
      }
      for (auto a = present.begin(); a != present.end(); ++a) {
        ++stats.class_story_counts[*a];
        for (auto b = a; b != present.end(); ++b) ++stats.cooccurrence[{*a, *b}];
      }
    }
    return stats;
  }
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Story> stories)
      : stories_(std::move(stories)), stats_(CorpusStats::compute(stories_)) {}

  const std::vector<Story>& stories() const { return stories_; }
  const CorpusStats& stats() const { return stats_; }
  std::size_t size() const { return stories_.size(); }
  bool empty() const { return stories_.empty(); }

  const Story* find(std::string_view id) const {
    for (const auto& s : stories_) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  // Stories whose ids appear in `ids`, in the order of `ids`.
  Corpus select(const std::vector<std::string>& ids) const {
    std::map<std::string_view, const Story*> by_id;
    for (const auto& s : stories_) by_id.emplace(s.id, &s);
    std::vector<Story> picked;
    picked.reserve(ids.size());
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("story id not in corpus: " + id);
      picked.push_back(*it->second);
    }
    return Corpus(std::move(picked));
  }

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<Story> stories_;
  CorpusStats stats_;
};

enum class CorpusFormat { kLines, kBlocks };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "lines") return CorpusFormat::kLines;
  if (name == "blocks") return CorpusFormat::kBlocks;
  throw UsageError("unknown corpus format '" + std::string(name) + "' (expected lines or blocks)");
}

inline std::string_view corpus_format_name(CorpusFormat format) {
  return format == CorpusFormat::kLines ? "lines" : "blocks";
}

namespace detail {

inline Sentence make_sentence(std::string_view text, const VerbClassIndex* index) {
  Sentence s = Sentence::from_text(text);
  return index ? annotate_verb_class(std::move(s), *index) : s;
}

}  // namespace detail

// Parses corpus text. Sentences are annotated when an index is given.
inline Corpus parse_corpus(std::string_view text, CorpusFormat format,
                           const VerbClassIndex* index = nullptr,
                           const std::string& source = "<corpus>") {
  std::vector<Story> stories;
  std::set<std::string> seen_ids;
  auto add_story = [&](Story story, std::size_t line_no) {
    if (story.id.empty()) story.id = "story-" + std::to_string(stories.size());
    if (!seen_ids.insert(story.id).second) {
      throw ParseError(source, line_no, "duplicate story id '" + story.id + "'");
    }
    stories.push_back(std::move(story));
  };

  auto lines = split(text, '\n');
  if (format == CorpusFormat::kLines) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto line = lines[i];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (trim(line).empty()) continue;
      Story story;
      if (auto tab = line.find('\t'); tab != std::string_view::npos) {
        story.id = std::string(trim(line.substr(0, tab)));
        if (story.id.empty()) throw ParseError(source, i + 1, "empty story id");
        line = line.substr(tab + 1);
      }
      for (auto& sentence : segment_sentences(line)) {
        story.sentences.push_back(detail::make_sentence(sentence, index));
      }
      if (story.sentences.empty()) throw ParseError(source, i + 1, "story has no sentences");
      add_story(std::move(story), i + 1);
    }
  } else {
    Story current;
    bool open = false;
    std::size_t start_line = 0;
    auto close = [&]() {
      if (!open) return;
      if (current.sentences.empty()) throw ParseError(source, start_line, "story has no sentences");
      add_story(std::move(current), start_line);
      current = Story{};
      open = false;
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto line = lines[i];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      auto content = trim(line);
      if (content.empty()) {
        close();
        continue;
      }
      if (!open) {
        open = true;
        start_line = i + 1;
      }
      if (content.starts_with("@id")) {
        if (!current.sentences.empty() || !current.id.empty()) {
          throw ParseError(source, i + 1, "@id must be the first line of a story");
        }
        current.id = std::string(trim(content.substr(3)));
        if (current.id.empty()) throw ParseError(source, i + 1, "empty story id");
        continue;
      }
      current.sentences.push_back(detail::make_sentence(content, index));
    }
    close();
  }
  if (stories.empty()) throw DataError(source + ": empty corpus");
  return Corpus(std::move(stories));
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format,
                          const VerbClassIndex* index = nullptr) {
  return parse_corpus(read_file(path), format, index, path);
}

// Renders stories in the given format; parse_corpus inverts it.
inline std::string format_corpus(const Corpus& corpus, CorpusFormat format) {
  std::string out;
  for (std::size_t i = 0; i < corpus.stories().size(); ++i) {
    const auto& story = corpus.stories()[i];
    if (format == CorpusFormat::kLines) {
      out += story.id;
      out += '\t';
      for (std::size_t j = 0; j < story.sentences.size(); ++j) {
        if (j) out += ' ';
        out += story.sentences[j].text;
      }
      out += '\n';
    } else {
      if (i) out += '\n';
      out += "@id " + story.id + "\n";
      for (const auto& s : story.sentences) out += s.text + "\n";
    }
  }
  return out;
}

// Seeded random partition into (train, rest). The train side holds
// round(n * train_fraction) stories; both sides keep the source order.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                              std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0, 1), got " + format_double(train_fraction));
  }
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  const std::size_t n = corpus.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train == n) {
    log::warning("split of " + std::to_string(n) + " stories at fraction " +
                 format_double(train_fraction) + " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::vector<Story> train, rest;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : rest).push_back(corpus.stories()[i]);
  }
  return {Corpus(std::move(train)), Corpus(std::move(rest))};
}

// Manifests list story ids of one split together with the corpus they index.
struct Manifest {
  std::string corpus_path;
  CorpusFormat format = CorpusFormat::kLines;
  std::vector<std::string> ids;
};

inline std::string format_manifest(const Manifest& m) {
  std::string out = "# goalweaver manifest v1\n";
  out += "corpus\t" + m.corpus_path + "\n";
  out += "format\t" + std::string(corpus_format_name(m.format)) + "\n";
  for (const auto& id : m.ids) out += "story\t" + id + "\n";
  return out;
}

inline Manifest parse_manifest(std::string_view text, const std::string& source = "<manifest>") {
  Manifest m;
  bool have_corpus = false;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw ParseError(source, line_no, "expected 'key<TAB>value'");
    if (fields[0] == "corpus") {
      m.corpus_path = std::string(fields[1]);
      have_corpus = true;
    } else if (fields[0] == "format") {
      m.format = parse_corpus_format(fields[1]);
    } else if (fields[0] == "story") {
      m.ids.emplace_back(fields[1]);
    } else {
      throw ParseError(source, line_no, "unknown manifest key '" + std::string(fields[0]) + "'");
    }
  }
  if (!have_corpus) throw DataError(source + ": manifest names no corpus");
  return m;
}

inline Manifest load_manifest(const std::string& path) { return parse_manifest(read_file(path), path); }

inline Corpus load_manifest_corpus(const Manifest& m, const VerbClassIndex& index) {
  return load_corpus(m.corpus_path, m.format, &index).select(m.ids);
}

}  // namespace goalweaver

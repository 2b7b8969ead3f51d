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

// Proposal language models. A ProposalModel suggests continuations for a
// prompt and exposes token embeddings that the policy reuses for graph nodes
// and candidate sentences. Models are immutable once built; sampling state
// lives in the caller's Rng.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "goalweaver/container.hpp"
#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/rng.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

struct RawContinuation {
  std::string text;

  bool operator==(const RawContinuation&) const = default;
};

struct SamplingParams {
  std::size_t max_tokens = 20;
  std::size_t top_k = 1000;
};

class ProposalModel {
 public:
  virtual ~ProposalModel() = default;

  virtual std::vector<RawContinuation> generate(std::span<const std::string> prompt, std::size_t count,
                                                const SamplingParams& params, Rng& rng) const = 0;

  virtual std::size_t embedding_dim() const = 0;
  virtual Eigen::VectorXd token_embedding(std::string_view token) const = 0;

  // log P(tokens | context). Models that cannot score text throw.
  virtual double sequence_logprob(std::span<const std::string> context,
                                  std::span<const std::string> tokens) const = 0;
  virtual bool supports_logprob() const { return true; }
};

// Mean token embedding; zero vector for an empty span.
inline Eigen::VectorXd mean_embedding(const ProposalModel& model, std::span<const std::string> tokens) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.embedding_dim()));
  if (tokens.empty()) return out;
  for (const auto& t : tokens) out += model.token_embedding(t);
  return out / static_cast<double>(tokens.size());
}

// A model over a closed vocabulary that yields a full next-token
// distribution for any context. Id 0 is the unknown token and id 1 the
// sequence-start padding, which is never predicted.
class TokenModel : public ProposalModel {
 public:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::uint32_t kBos = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kBosToken = "<s>";

  virtual std::size_t order() const = 0;
  virtual const std::vector<std::string>& vocabulary() const = 0;
  // Next-token probabilities; `context` holds exactly order() - 1 ids.
  virtual std::vector<double> next_distribution(std::span<const std::uint32_t> context) const = 0;

  std::size_t vocabulary_size() const { return vocabulary().size(); }

  std::uint32_t id_of(std::string_view token) const {
    auto it = ids().find(std::string(token));
    return it == ids().end() ? kUnk : it->second;
  }

  // Last order()-1 ids of `history`, left-padded with the start symbol.
  std::vector<std::uint32_t> context_ids(std::span<const std::uint32_t> history) const {
    const std::size_t width = order() - 1;
    std::vector<std::uint32_t> ctx(width, kBos);
    const std::size_t take = std::min(width, history.size());
    std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
              ctx.end() - static_cast<std::ptrdiff_t>(take));
    return ctx;
  }

  std::vector<std::uint32_t> encode(std::span<const std::string> tokens) const {
    std::vector<std::uint32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id_of(t));
    return out;
  }

  // Indices of the top_k most probable tokens (ties to the lower id).
  static std::vector<std::uint32_t> top_k_support(std::span<const double> dist, std::size_t top_k) {
    std::vector<std::uint32_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0U);
    const std::size_t k = std::min(top_k, dist.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
                      });
    order.resize(k);
    return order;
  }

  std::uint32_t sample_next(std::span<const std::uint32_t> context, std::size_t top_k, Rng& rng) const {
    const auto dist = next_distribution(context);
    const auto support = top_k_support(dist, std::max<std::size_t>(top_k, 1));
    std::vector<double> weights;
    weights.reserve(support.size());
    for (auto id : support) weights.push_back(dist[id]);
    return support[rng.categorical(weights)];
  }

  // Continuation ids; stops after a terminator token or at max_tokens.
  std::vector<std::uint32_t> sample_ids(std::span<const std::string> prompt, const SamplingParams& params,
                                        Rng& rng) const {
    std::vector<std::uint32_t> history = encode(prompt);
    std::vector<std::uint32_t> out;
    while (out.size() < params.max_tokens) {
      const auto id = sample_next(context_ids(history), params.top_k, rng);
      history.push_back(id);
      out.push_back(id);
      if (is_terminator_token(vocabulary()[id])) break;
    }
    return out;
  }

  std::string decode(std::span<const std::uint32_t> ids) const {
    std::string text;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) text += ' ';
      text += vocabulary()[ids[i]];
    }
    return text;
  }

  std::vector<RawContinuation> generate(std::span<const std::string> prompt, std::size_t count,
                                        const SamplingParams& params, Rng& rng) const override {
    std::vector<RawContinuation> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back({decode(sample_ids(prompt, params, rng))});
    return out;
  }

  double sequence_logprob(std::span<const std::string> context,
                          std::span<const std::string> tokens) const override {
    std::vector<std::uint32_t> history = encode(context);
    double total = 0.0;
    for (const auto& t : tokens) {
      const auto id = id_of(t);
      total += std::log(next_distribution(context_ids(history))[id]);
      history.push_back(id);
    }
    return total;
  }

 protected:
  virtual const std::unordered_map<std::string, std::uint32_t>& ids() const = 0;
};

struct NgramConfig {
  std::size_t order = 3;
  double smoothing = 0.01;  // add-lambda pseudo-count
  std::size_t embedding_dim = 64;
  std::uint64_t seed = 0;   // embedding initialization
};

// Add-lambda n-gram model with backoff to the longest context seen in
// training:
//
//   P(w | h) = (c(h' w) + lambda) / (c(h') + lambda * |V'|)
//
// where h' is the longest suffix of h observed as a context and V' the
// predictable vocabulary (everything but the start symbol).
class NgramModel : public TokenModel {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<std::uint32_t, std::uint64_t> next;
  };
  using Level = std::map<std::vector<std::uint32_t>, ContextCounts>;

  static NgramModel train(const Corpus& corpus, const NgramConfig& config) {
    if (config.order < 1) throw UsageError("n-gram order must be at least 1");
    if (config.smoothing < 0.0) throw UsageError("smoothing must be non-negative");
    if (config.embedding_dim < 1) throw UsageError("embedding dimension must be positive");
    std::vector<std::vector<std::string>> streams;
    for (const auto& story : corpus.stories()) {
      std::vector<std::string> stream;
      for (const auto& s : story.sentences) stream.insert(stream.end(), s.tokens.begin(), s.tokens.end());
      if (!stream.empty()) streams.push_back(std::move(stream));
    }
    if (streams.empty()) throw DataError("cannot train a language model on an empty corpus");

    std::vector<std::string> words;
    for (const auto& stream : streams) words.insert(words.end(), stream.begin(), stream.end());
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    std::vector<std::string> vocab{std::string(kUnkToken), std::string(kBosToken)};
    for (auto& w : words) {
      if (w != kUnkToken && w != kBosToken) vocab.push_back(std::move(w));
    }

    NgramModel model(config, std::move(vocab));
    for (const auto& stream : streams) {
      std::vector<std::uint32_t> history;
      for (const auto& token : stream) {
        const auto id = model.id_of(token);
        const auto ctx = model.context_ids(history);
        for (std::size_t m = 0; m < config.order; ++m) {
          std::vector<std::uint32_t> key(ctx.end() - static_cast<std::ptrdiff_t>(m), ctx.end());
          auto& counts = model.levels_[m][key];
          ++counts.total;
          ++counts.next[id];
        }
        history.push_back(id);
      }
    }
    model.init_embeddings();
    return model;
  }

  std::size_t order() const override { return config_.order; }
  const std::vector<std::string>& vocabulary() const override { return vocab_; }
  const NgramConfig& config() const { return config_; }
  std::size_t embedding_dim() const override { return config_.embedding_dim; }
  const std::vector<Level>& levels() const { return levels_; }

  std::vector<double> next_distribution(std::span<const std::uint32_t> context) const override {
    const std::size_t v = vocab_.size();
    std::vector<double> dist(v, 0.0);
    const ContextCounts* counts = nullptr;
    for (std::size_t m = config_.order; m-- > 0;) {
      std::vector<std::uint32_t> key(context.end() - static_cast<std::ptrdiff_t>(m), context.end());
      auto it = levels_[m].find(key);
      if (it != levels_[m].end() && it->second.total > 0) {
        counts = &it->second;
        break;
      }
    }
    // The unigram level always has mass after training.
    const double lambda = config_.smoothing;
    const double denom = static_cast<double>(counts->total) + lambda * static_cast<double>(v - 1);
    for (std::size_t w = 0; w < v; ++w) {
      if (w == kBos) continue;
      dist[w] = lambda / denom;
    }
    for (const auto& [w, c] : counts->next) dist[w] += static_cast<double>(c) / denom;
    return dist;
  }

  Eigen::VectorXd token_embedding(std::string_view token) const override {
    const auto id = id_of(token);
    const std::size_t d = config_.embedding_dim;
    Eigen::VectorXd out(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) out[static_cast<Eigen::Index>(j)] = embeddings_[id * d + j];
    return out;
  }

  const std::vector<float>& embeddings() const { return embeddings_; }

  Container to_container() const {
    Container c("ngram");
    c.put_text("config", "order=" + std::to_string(config_.order) +
                             "\nsmoothing=" + format_double(config_.smoothing) +
                             "\nembedding_dim=" + std::to_string(config_.embedding_dim) +
                             "\nseed=" + std::to_string(config_.seed) + "\n");
    std::string vocab;
    for (const auto& w : vocab_) vocab += w + "\n";
    c.put_text("vocab", vocab);
    for (std::size_t m = 0; m < config_.order; ++m) {
      std::vector<std::uint64_t> flat;
      std::uint64_t rows = 0;
      for (const auto& [key, counts] : levels_[m]) {
        for (const auto& [w, n] : counts.next) {
          flat.insert(flat.end(), key.begin(), key.end());
          flat.push_back(w);
          flat.push_back(n);
          ++rows;
        }
      }
      c.put("counts/" + std::to_string(m), std::move(flat), {rows, m + 2});
    }
    c.put("embeddings", embeddings_, {vocab_.size(), config_.embedding_dim});
    return c;
  }

  static NgramModel from_container(const Container& c) {
    if (c.kind() != "ngram") throw DataError("checkpoint is not an n-gram model");
    NgramConfig config;
    for (auto line : split(c.get_text("config"), '\n')) {
      if (line.empty()) continue;
      auto eq = line.find('=');
      auto key = line.substr(0, eq);
      auto value = line.substr(eq + 1);
      if (key == "order") config.order = parse_integer<std::size_t>(value).value_or(0);
      if (key == "smoothing") config.smoothing = parse_double(value).value_or(-1.0);
      if (key == "embedding_dim") config.embedding_dim = parse_integer<std::size_t>(value).value_or(0);
      if (key == "seed") config.seed = parse_integer<std::uint64_t>(value).value_or(0);
    }
    if (config.order < 1 || config.embedding_dim < 1 || config.smoothing < 0.0) {
      throw DataError("corrupt n-gram config");
    }
    std::vector<std::string> vocab;
    for (auto w : split(c.get_text("vocab"), '\n')) {
      if (!w.empty()) vocab.emplace_back(w);
    }
    NgramModel model(config, std::move(vocab));
    for (std::size_t m = 0; m < config.order; ++m) {
      const auto& t = c.get<std::uint64_t>("counts/" + std::to_string(m));
      const std::size_t width = m + 2;
      for (std::size_t r = 0; r < t.data.size() / width; ++r) {
        const auto* row = &t.data[r * width];
        std::vector<std::uint32_t> key;
        for (std::size_t j = 0; j < m; ++j) key.push_back(static_cast<std::uint32_t>(row[j]));
        auto& counts = model.levels_[m][key];
        counts.next[static_cast<std::uint32_t>(row[m])] = row[m + 1];
        counts.total += row[m + 1];
      }
    }
    const auto& emb = c.get<float>("embeddings");
    if (emb.data.size() != model.vocab_.size() * config.embedding_dim) {
      throw DataError("embedding table has the wrong shape");
    }
    model.embeddings_ = emb.data;
    return model;
  }

  void save(const std::string& path) const { to_container().save(path); }
  static NgramModel load(const std::string& path) { return from_container(Container::load(path)); }

 protected:
  const std::unordered_map<std::string, std::uint32_t>& ids() const override { return ids_; }

 private:
  NgramModel(NgramConfig config, std::vector<std::string> vocab)
      : config_(config), vocab_(std::move(vocab)), levels_(config.order) {
    for (std::uint32_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], i);
  }

  void init_embeddings() {
    Rng rng(derive_seed(config_.seed, "lm/embeddings"));
    embeddings_.resize(vocab_.size() * config_.embedding_dim);
    for (auto& x : embeddings_) x = static_cast<float>(rng.normal());
  }

  NgramConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<Level> levels_;
  std::vector<float> embeddings_;
};

inline std::vector<RawContinuation> sample_continuations(const ProposalModel& model,
                                                         std::span<const std::string> prompt,
                                                         std::size_t count, std::size_t top_k,
                                                         std::uint64_t seed, std::size_t max_tokens = 20) {
  if (count < 1) throw UsageError("continuation count must be at least 1");
  if (top_k < 1) throw UsageError("top_k must be at least 1");
  Rng rng(seed);
  return model.generate(prompt, count, SamplingParams{max_tokens, top_k}, rng);
}

// A cleaned continuation: one complete sentence carrying an indexed verb.
struct Candidate {
  std::string text;
  std::vector<std::string> tokens;
  VerbClass verb_class;
  std::size_t verb_position = 0;
  std::string verb_lemma;

  Sentence as_sentence() const {
    Sentence s;
    s.text = text;
    s.tokens = tokens;
    s.verb_class = verb_class;
    s.verb_position = verb_position;
    s.verb_lemma = verb_lemma;
    return s;
  }

  static std::optional<Candidate> from_sentence(const Sentence& s) {
    if (!s.verb_class || !s.verb_position) return std::nullopt;
    return Candidate{s.text, s.tokens, *s.verb_class, *s.verb_position, s.verb_lemma};
  }

  bool operator==(const Candidate&) const = default;
};

// Truncates each continuation after its first terminator or at max_tokens,
// whichever comes first, and keeps only complete sentences (terminated, or
// cut exactly at the limit) that contain an indexed verb. Order is kept.
inline std::vector<Candidate> clean_candidates(std::span<const RawContinuation> raw, const VerbClassIndex& index,
                                               std::size_t max_tokens = 20) {
  std::vector<Candidate> out;
  for (const auto& r : raw) {
    const auto spans = tokenize_spans(r.text);
    std::size_t keep = 0;
    bool complete = false;
    for (; keep < spans.size() && keep < max_tokens; ++keep) {
      if (is_terminator_token(std::string_view(r.text).substr(spans[keep].begin, spans[keep].end - spans[keep].begin))) {
        ++keep;
        complete = true;
        break;
      }
    }
    if (!complete && keep == max_tokens) complete = true;
    if (!complete || keep == 0) continue;
    const std::string text(std::string_view(r.text).substr(spans[0].begin, spans[keep - 1].end - spans[0].begin));
    auto sentence = annotate_verb_class(Sentence::from_text(text), index);
    if (auto c = Candidate::from_sentence(sentence)) out.push_back(std::move(*c));
  }
  return out;
}

inline double perplexity(const ProposalModel& model, std::span<const std::string> text) {
  if (text.empty()) throw DataError("perplexity of empty text");
  const double logprob = model.sequence_logprob({}, text);
  return std::exp(-logprob / static_cast<double>(text.size()));
}

}  // namespace goalweaver

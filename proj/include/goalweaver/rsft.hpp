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

// Reward-shaped fine-tuning of the built-in proposal model.
//
// The tuned model keeps one logit vector per full context it has been
// trained on and defers to a frozen reference model everywhere else. Each
// step samples continuations for a batch of query sentences, scores them with
// the shaped reward, and ascends
//
//   J = E_y[ r(y) ] - beta * KL( tuned(.|c) || reference(.|c) )
//
// with a likelihood-ratio estimate of the first term and the exact gradient
// of the second over every context the samples visited.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "goalweaver/container.hpp"
#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rng.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

struct RsftConfig {
  double kl_beta_init = 0.1;
  double kl_target = 6.0;
  std::size_t inner_epochs = 4;
  std::size_t epochs = 40;
  std::size_t batch = 128;
  std::size_t candidates_per_query = 20;
  double learning_rate = 0.05;
  std::size_t checkpoint_period = 10;  // epochs
  std::size_t max_tokens = 20;
  std::size_t top_k = 1000;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw UsageError(std::string("rsft.") + name + " must be positive");
    };
    positive(kl_beta_init, "kl_beta_init");
    positive(kl_target, "kl_target");
    positive(static_cast<double>(inner_epochs), "inner_epochs");
    positive(static_cast<double>(epochs), "epochs");
    positive(static_cast<double>(batch), "batch");
    positive(static_cast<double>(candidates_per_query), "candidates_per_query");
    positive(static_cast<double>(checkpoint_period), "checkpoint_period");
    positive(static_cast<double>(max_tokens), "max_tokens");
    positive(static_cast<double>(top_k), "top_k");
    if (!(learning_rate >= 0.0)) throw UsageError("rsft.learning_rate must be non-negative");
  }
};

// Fingerprint of a reference model's checkpoint bytes.
inline std::string model_fingerprint(const NgramModel& model) {
  const auto h = fnv1a(model.to_container().serialize());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = kHex[(h >> (4 * i)) & 0xF];
  return out;
}

class TunedModel : public TokenModel {
 public:
  using Context = std::vector<std::uint32_t>;

  explicit TunedModel(std::shared_ptr<const NgramModel> reference) : reference_(std::move(reference)) {
    if (!reference_) throw UsageError("tuned model needs a reference model");
    const auto& vocab = reference_->vocabulary();
    for (std::uint32_t i = 0; i < vocab.size(); ++i) ids_.emplace(vocab[i], i);
  }

  const NgramModel& reference() const { return *reference_; }
  std::shared_ptr<const NgramModel> reference_ptr() const { return reference_; }

  std::size_t order() const override { return reference_->order(); }
  const std::vector<std::string>& vocabulary() const override { return reference_->vocabulary(); }
  std::size_t embedding_dim() const override { return reference_->embedding_dim(); }
  Eigen::VectorXd token_embedding(std::string_view token) const override {
    return reference_->token_embedding(token);
  }

  std::vector<double> next_distribution(std::span<const std::uint32_t> context) const override {
    auto it = logits_.find(Context(context.begin(), context.end()));
    if (it == logits_.end()) return reference_->next_distribution(context);
    return softmax(it->second);
  }

  const std::map<Context, std::vector<double>>& logits() const { return logits_; }

  // Logits for a context, created from the reference distribution on first
  // use. Zero-probability tokens get -inf and stay unreachable.
  std::vector<double>& logits_for(const Context& context) {
    auto it = logits_.find(context);
    if (it != logits_.end()) return it->second;
    const auto ref = reference_->next_distribution(context);
    std::vector<double> z(ref.size());
    for (std::size_t w = 0; w < ref.size(); ++w) {
      z[w] = ref[w] > 0.0 ? std::log(ref[w]) : -std::numeric_limits<double>::infinity();
    }
    return logits_.emplace(context, std::move(z)).first->second;
  }

  static std::vector<double> softmax(std::span<const double> z) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : z) peak = std::max(peak, v);
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      p[i] = std::isinf(z[i]) && z[i] < 0 ? 0.0 : std::exp(z[i] - peak);
      total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
  }

  Container to_container() const {
    Container c("tuned");
    c.put_text("reference", model_fingerprint(*reference_));
    const std::size_t width = order() - 1;
    const std::size_t v = vocabulary_size();
    std::vector<std::uint32_t> contexts;
    std::vector<double> logits;
    for (const auto& [ctx, z] : logits_) {
      contexts.insert(contexts.end(), ctx.begin(), ctx.end());
      logits.insert(logits.end(), z.begin(), z.end());
    }
    c.put("contexts", std::move(contexts), {logits_.size(), width});
    c.put("logits", std::move(logits), {logits_.size(), v});
    return c;
  }

  // Rebuilds a tuned model; `reference` must be the model it was tuned from.
  static TunedModel from_container(const Container& c, std::shared_ptr<const NgramModel> reference) {
    if (c.kind() != "tuned") throw DataError("checkpoint is not a tuned model");
    TunedModel model(std::move(reference));
    if (c.get_text("reference") != model_fingerprint(*model.reference_)) {
      throw DataError("tuned checkpoint was trained from a different reference model");
    }
    const auto& ctx = c.get<std::uint32_t>("contexts");
    const auto& z = c.get<double>("logits");
    const std::size_t width = model.order() - 1;
    const std::size_t v = model.vocabulary_size();
    if (ctx.dims.size() != 2 || z.dims.size() != 2 || ctx.dims[0] != z.dims[0] || ctx.dims[1] != width ||
        z.dims[1] != v) {
      throw DataError("tuned checkpoint has the wrong shape");
    }
    for (std::size_t r = 0; r < ctx.dims[0]; ++r) {
      Context key(ctx.data.begin() + static_cast<std::ptrdiff_t>(r * width),
                  ctx.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
      model.logits_.emplace(std::move(key),
                            std::vector<double>(z.data.begin() + static_cast<std::ptrdiff_t>(r * v),
                                                z.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * v)));
    }
    return model;
  }

  void save(const std::string& path) const { to_container().save(path); }
  static TunedModel load(const std::string& path, std::shared_ptr<const NgramModel> reference) {
    return from_container(Container::load(path), std::move(reference));
  }

 protected:
  const std::unordered_map<std::string, std::uint32_t>& ids() const override { return ids_; }

 private:
  std::shared_ptr<const NgramModel> reference_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::map<Context, std::vector<double>> logits_;
};

// KL(p || q) in nats; +inf when p puts mass where q has none.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("kl_divergence over different supports");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

inline double kl_divergence(const TokenModel& tuned, const TokenModel& reference,
                            std::span<const std::string> context) {
  if (tuned.vocabulary() != reference.vocabulary() || tuned.order() != reference.order()) {
    throw UsageError("kl_divergence needs models with a shared vocabulary");
  }
  const auto ctx = tuned.context_ids(tuned.encode(context));
  return kl_divergence(tuned.next_distribution(ctx), reference.next_distribution(ctx));
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

// beta * (1 + clip((kl - target) / target, -0.2, 0.2)).
inline double adapt_kl_beta(double beta, double observed_kl, const RsftConfig& config) {
  if (!(beta > 0.0)) throw UsageError("kl beta must be positive");
  const double error = std::clamp((observed_kl - config.kl_target) / config.kl_target, -0.2, 0.2);
  return beta * (1.0 + error);
}

struct RsftStepStats {
  std::size_t queries = 0;
  std::size_t skipped = 0;    // no candidate moved forward
  std::size_t samples = 0;    // scored continuations
  double mean_reward = 0.0;   // over scored continuations
  double mean_kl = 0.0;       // over visited contexts, after the update
};

struct RsftInputs {
  const VerbClassIndex& index;
  const RewardTable& table;
  const ClusterAssignment& clusters;
};

namespace detail {

struct ScoredSample {
  std::vector<std::uint32_t> prompt;
  std::vector<std::uint32_t> ids;
  double reward = 0.0;
};

inline std::optional<VerbClass> clustered_class(const Sentence& s, const ClusterAssignment& clusters) {
  if (s.verb_class && clusters.find(*s.verb_class)) return s.verb_class;
  return std::nullopt;
}

}  // namespace detail

// One fine-tuning step. Continuations that fail cleaning are left out of
// the update; queries whose cleaned candidates all fail to move forward a
// cluster are skipped. The step size is lr / (1 + beta), so as beta grows
// the update reduces to pulling the model back onto the reference.
inline RsftStepStats rsft_step(TunedModel& model, std::span<const Sentence> queries, const RsftInputs& in,
                               double beta, const RsftConfig& config, Rng& rng) {
  if (queries.empty()) throw DataError("rsft_step on an empty batch");
  RsftStepStats stats;
  stats.queries = queries.size();
  const SamplingParams sampling{config.max_tokens, config.top_k};

  std::vector<detail::ScoredSample> samples;
  std::vector<std::size_t> group_end;  // per kept query, end offset in samples
  for (const auto& query : queries) {
    const auto source = detail::clustered_class(query, in.clusters);
    const long from = source_cluster_index(source, in.clusters);
    const auto prompt = model.encode(query.tokens);
    std::vector<detail::ScoredSample> group;
    bool forward = false;
    for (std::size_t i = 0; i < config.candidates_per_query; ++i) {
      auto ids = model.sample_ids(query.tokens, sampling, rng);
      const RawContinuation raw{model.decode(ids)};
      const auto cleaned = clean_candidates(std::span(&raw, 1), in.index, config.max_tokens);
      if (cleaned.empty()) continue;
      const auto& c = cleaned.front();
      if (const auto cluster = in.clusters.find(c.verb_class); cluster && static_cast<long>(*cluster) > from) {
        forward = true;
      }
      group.push_back({prompt, std::move(ids), shaped_reward(c.verb_class, source, in.table, in.clusters)});
    }
    if (!forward) {
      ++stats.skipped;
      continue;
    }
    samples.insert(samples.end(), std::make_move_iterator(group.begin()), std::make_move_iterator(group.end()));
    group_end.push_back(samples.size());
  }
  if (samples.empty()) return stats;

  // Advantage: reward minus the mean reward of the query's own samples,
  // then scaled to unit root-mean-square over the batch.
  std::vector<double> advantage(samples.size());
  double reward_sum = 0.0;
  for (std::size_t g = 0, begin = 0; g < group_end.size(); begin = group_end[g++]) {
    double mean = 0.0;
    for (std::size_t i = begin; i < group_end[g]; ++i) mean += samples[i].reward;
    mean /= static_cast<double>(group_end[g] - begin);
    for (std::size_t i = begin; i < group_end[g]; ++i) advantage[i] = samples[i].reward - mean;
  }
  double second = 0.0;
  for (double a : advantage) second += a * a;
  const double spread = std::sqrt(second / static_cast<double>(advantage.size()));
  if (spread > 1e-12) {
    for (double& a : advantage) a /= spread;
  }
  for (const auto& s : samples) reward_sum += s.reward;
  stats.samples = samples.size();
  stats.mean_reward = reward_sum / static_cast<double>(samples.size());

  // Contexts visited by the samples, each with its (token, advantage)
  // events. The policy-gradient term is averaged per context, so every
  // conditional moves at a rate set by its own samples rather than by its
  // share of the batch.
  std::map<TunedModel::Context, std::vector<std::pair<std::uint32_t, double>>> events;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<std::uint32_t> history = samples[i].prompt;
    for (auto id : samples[i].ids) {
      events[model.context_ids(history)].emplace_back(id, advantage[i]);
      history.push_back(id);
    }
  }
  for (auto& [_, list] : events) {
    const double inv = 1.0 / static_cast<double>(list.size());
    for (auto& e : list) e.second *= inv;
  }

  const double step = config.learning_rate / (1.0 + beta);
  for (std::size_t epoch = 0; step > 0.0 && epoch < config.inner_epochs; ++epoch) {
    for (const auto& [ctx, list] : events) {
      auto& z = model.logits_for(ctx);
      const auto p = TunedModel::softmax(z);
      const auto q = model.reference().next_distribution(ctx);
      const double kl = kl_divergence(p, q);
      std::vector<double> grad(z.size(), 0.0);
      // Policy-gradient term: sum_e w_e (onehot(t_e) - p).
      double weight = 0.0;
      for (const auto& [t, w] : list) {
        grad[t] += w;
        weight += w;
      }
      for (std::size_t k = 0; k < z.size(); ++k) {
        grad[k] -= weight * p[k];
        // d KL / d z_k = p_k (log(p_k / q_k) - KL).
        if (p[k] > 0.0) grad[k] -= beta * p[k] * (std::log(p[k] / q[k]) - kl);
      }
      for (std::size_t k = 0; k < z.size(); ++k) {
        if (std::isfinite(z[k])) z[k] += step * grad[k];
      }
    }
  }

  double kl_sum = 0.0;
  for (const auto& [ctx, _] : events) {
    kl_sum += kl_divergence(model.next_distribution(ctx), model.reference().next_distribution(ctx));
  }
  stats.mean_kl = kl_sum / static_cast<double>(events.size());
  return stats;
}

struct RsftProbe {
  std::size_t samples = 0;  // cleaned samples scored
  double mean_reward = 0.0;
  double mean_kl = 0.0;  // over contexts the samples visited
};

// One sample per query from `model`, query i drawing from its own stream of
// `seed`, so two models probed with the same seed see common randomness.
// Reports the mean shaped reward of cleaned samples and the mean
// KL(model || reference) over the contexts those samples passed through.
inline RsftProbe probe_model(const TokenModel& model, const TokenModel& reference, std::span<const Sentence> queries,
                             const RsftInputs& in, const SamplingParams& sampling, std::uint64_t seed) {
  RsftProbe out;
  std::set<std::vector<std::uint32_t>> contexts;
  double reward_sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Rng rng(derive_seed(seed, "rsft/probe", i));
    const auto& query = queries[i];
    const auto ids = model.sample_ids(query.tokens, sampling, rng);
    std::vector<std::uint32_t> history = model.encode(query.tokens);
    for (auto id : ids) {
      contexts.insert(model.context_ids(history));
      history.push_back(id);
    }
    const RawContinuation raw{model.decode(ids)};
    const auto cleaned = clean_candidates(std::span(&raw, 1), in.index, sampling.max_tokens);
    if (cleaned.empty()) continue;
    ++out.samples;
    reward_sum += shaped_reward(cleaned.front().verb_class, detail::clustered_class(query, in.clusters), in.table,
                                in.clusters);
  }
  if (out.samples) out.mean_reward = reward_sum / static_cast<double>(out.samples);
  double kl_sum = 0.0;
  for (const auto& ctx : contexts) {
    kl_sum += kl_divergence(model.next_distribution(ctx), reference.next_distribution(ctx));
  }
  if (!contexts.empty()) out.mean_kl = kl_sum / static_cast<double>(contexts.size());
  return out;
}

struct RsftEpochRecord {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double beta = 0.0;
  std::size_t skipped = 0;
};

inline std::string format_rsft_record(const RsftEpochRecord& r) {
  return "epoch=" + std::to_string(r.epoch) + "\tmean_reward=" + format_double(r.mean_reward) +
         "\tmean_kl=" + format_double(r.mean_kl) + "\tbeta=" + format_double(r.beta) +
         "\tskipped=" + std::to_string(r.skipped);
}

struct RsftCheckpoint {
  std::size_t epoch = 0;
  TunedModel model;
};

struct RsftTrainResult {
  TunedModel model;
  std::vector<RsftCheckpoint> checkpoints;
  std::vector<RsftEpochRecord> log;
};

// Training loop: each epoch draws `batch` query sentences uniformly from the
// training stories, takes one rsft_step and adapts beta on the observed KL.
inline RsftTrainResult train_rsft(std::shared_ptr<const NgramModel> reference, const Corpus& corpus,
                                  const RsftInputs& in, const RsftConfig& config, std::uint64_t seed,
                                  const std::function<void(const RsftCheckpoint&)>& on_checkpoint = {}) {
  config.validate();
  std::vector<const Sentence*> pool;
  for (const auto& story : corpus.stories()) {
    for (const auto& s : story.sentences) {
      if (!s.tokens.empty()) pool.push_back(&s);
    }
  }
  if (pool.empty()) throw DataError("no query sentences for fine-tuning");

  RsftTrainResult result{TunedModel(std::move(reference)), {}, {}};
  Rng rng(derive_seed(seed, "rsft/train"));
  double beta = config.kl_beta_init;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<Sentence> batch;
    batch.reserve(config.batch);
    for (std::size_t i = 0; i < config.batch; ++i) batch.push_back(*pool[rng.index(pool.size())]);
    const auto stats = rsft_step(result.model, batch, in, beta, config, rng);
    RsftEpochRecord record{epoch, stats.mean_reward, stats.mean_kl, beta, stats.skipped};
    if (stats.samples > 0) beta = adapt_kl_beta(beta, stats.mean_kl, config);
    log::debug(format_rsft_record(record));
    result.log.push_back(record);
    if (epoch % config.checkpoint_period == 0) {
      RsftCheckpoint cp{epoch, result.model};
      if (on_checkpoint) on_checkpoint(cp);
      result.checkpoints.push_back(std::move(cp));
    }
  }
  return result;
}

}  // namespace goalweaver

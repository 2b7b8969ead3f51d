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

// Knowledge-graph DQN over sentence actions.
//
// Q(G, a) = w . [state(G) ; tanh(P e(a) + b)] + c
//
// where e(a) is the mean token embedding of the candidate sentence and
// state(G) the graph-attention encoding of the knowledge graph. In query
// mode (the graph-free ablation) the state is the query sentence passed
// through the same action encoder.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goalweaver/container.hpp"
#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/gat.hpp"
#include "goalweaver/generation.hpp"
#include "goalweaver/kg.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/reward.hpp"
#include "goalweaver/rng.hpp"

namespace goalweaver {

enum class StateMode { kGraph, kQuery };

inline std::string_view state_mode_name(StateMode m) { return m == StateMode::kGraph ? "graph" : "query"; }

inline StateMode parse_state_mode(std::string_view s) {
  if (s == "graph") return StateMode::kGraph;
  if (s == "query") return StateMode::kQuery;
  throw UsageError("unknown state mode '" + std::string(s) + "'");
}

struct QNetworkConfig {
  StateMode mode = StateMode::kGraph;
  GraphEncoderConfig encoder;
  std::size_t action_dim = 32;
};

// Sized like the published KG-DQN (on the order of 1e5 weights) for 64-d
// embeddings: 4 heads of 256, a 1024-wide action encoder.
inline QNetworkConfig reference_network_config() {
  QNetworkConfig c;
  c.encoder.heads = 4;
  c.encoder.head_dim = 256;
  c.action_dim = 1024;
  return c;
}

struct QNetworkParams {
  StateMode mode = StateMode::kGraph;
  GraphEncoderParams encoder;
  Eigen::MatrixXd action_proj;  // action_dim x input_dim
  Eigen::MatrixXd action_bias;  // action_dim x 1
  Eigen::MatrixXd out_weight;   // (state_dim + action_dim) x 1
  Eigen::MatrixXd out_bias;     // 1 x 1

  static QNetworkParams init(const QNetworkConfig& config, std::size_t input_dim, Rng& rng) {
    QNetworkParams p;
    p.mode = config.mode;
    if (config.mode == StateMode::kGraph) {
      p.encoder = GraphEncoderParams::init(config.encoder, input_dim, rng);
    } else {
      p.encoder.leaky_slope = config.encoder.leaky_slope;
    }
    const auto m = static_cast<Eigen::Index>(config.action_dim);
    const auto in = static_cast<Eigen::Index>(input_dim);
    p.action_proj.resize(m, in);
    for (Eigen::Index i = 0; i < p.action_proj.size(); ++i) {
      p.action_proj.data()[i] = rng.normal() / std::sqrt(static_cast<double>(input_dim));
    }
    p.action_bias = Eigen::MatrixXd::Zero(m, 1);
    const auto total = static_cast<Eigen::Index>(p.state_dim()) + m;
    p.out_weight.resize(total, 1);
    for (Eigen::Index i = 0; i < total; ++i) p.out_weight(i, 0) = rng.normal() / std::sqrt(static_cast<double>(total));
    p.out_bias = Eigen::MatrixXd::Zero(1, 1);
    return p;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(action_proj.cols()); }
  std::size_t action_dim() const { return static_cast<std::size_t>(action_proj.rows()); }
  std::size_t state_dim() const { return mode == StateMode::kGraph ? encoder.output_dim() : action_dim(); }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    GraphEncoderParams::visit(self.encoder, "encoder/", f);
    f(std::string("action/proj"), self.action_proj);
    f(std::string("action/bias"), self.action_bias);
    f(std::string("out/weight"), self.out_weight);
    f(std::string("out/bias"), self.out_bias);
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&n](const std::string&, const Eigen::MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  QNetworkParams zeros_like() const {
    QNetworkParams z = *this;
    z.for_each([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
    return z;
  }

  // this += scale * other
  void add_scaled(const QNetworkParams& other, double scale) {
    std::vector<const Eigen::MatrixXd*> src;
    other.for_each([&src](const std::string&, const Eigen::MatrixXd& m) { src.push_back(&m); });
    std::size_t i = 0;
    for_each([&](const std::string&, Eigen::MatrixXd& m) { m += scale * *src[i++]; });
  }

  // FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for_each([&h](const std::string& name, const Eigen::MatrixXd& m) {
      h = fnv1a(name, h);
      h = fnv1a(std::string_view(reinterpret_cast<const char*>(m.data()),
                                 static_cast<std::size_t>(m.size()) * sizeof(double)),
                h);
    });
    return h;
  }
};

// Embedding-level inputs of one state; fixed once built because the
// proposal model is frozen.
struct StateInput {
  GraphInput graph;
  Eigen::VectorXd query_embedding;
};

inline StateInput make_state_input(StateMode mode, const KnowledgeGraph& graph, std::span<const std::string> query,
                                   const ProposalModel& embedder) {
  StateInput in;
  if (mode == StateMode::kGraph) {
    in.graph = make_graph_input(graph, embedder);
  } else {
    in.query_embedding = mean_embedding(embedder, query);
  }
  return in;
}

struct StateEncoding {
  Eigen::VectorXd vector;
  GraphEncoding graph;
  Eigen::VectorXd query_activation;
};

inline Eigen::VectorXd action_activation(const QNetworkParams& p, const Eigen::VectorXd& embedding) {
  if (static_cast<std::size_t>(embedding.size()) != p.input_dim()) {
    throw DataError("action embedding has dimension " + std::to_string(embedding.size()) + ", network expects " +
                    std::to_string(p.input_dim()));
  }
  return (p.action_proj * embedding + p.action_bias.col(0)).array().tanh().matrix();
}

inline StateEncoding encode_state(const QNetworkParams& p, const StateInput& in) {
  StateEncoding enc;
  if (p.mode == StateMode::kGraph) {
    enc.graph = encode_graph(p.encoder, in.graph);
    enc.vector = enc.graph.output;
  } else {
    enc.query_activation = action_activation(p, in.query_embedding);
    enc.vector = enc.query_activation;
  }
  return enc;
}

inline double q_from_parts(const QNetworkParams& p, const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  const auto s = state.size();
  return p.out_weight.col(0).head(s).dot(state) + p.out_weight.col(0).tail(action.size()).dot(action) +
         p.out_bias(0, 0);
}

// Accumulates scale * dQ/dparams into grads for one (state, action) pair.
inline void q_backward(const QNetworkParams& p, const StateInput& in, const StateEncoding& enc,
                       const Eigen::VectorXd& action_embedding, const Eigen::VectorXd& action_act, double scale,
                       QNetworkParams& grads) {
  const auto s = enc.vector.size();
  const auto m = action_act.size();
  grads.out_bias(0, 0) += scale;
  grads.out_weight.col(0).head(s) += scale * enc.vector;
  grads.out_weight.col(0).tail(m) += scale * action_act;

  auto through_tanh = [&](const Eigen::VectorXd& act, const Eigen::VectorXd& emb, const Eigen::VectorXd& d_act) {
    const Eigen::VectorXd d_pre = d_act.array() * (1.0 - act.array().square());
    grads.action_proj += d_pre * emb.transpose();
    grads.action_bias.col(0) += d_pre;
  };
  through_tanh(action_act, action_embedding, scale * p.out_weight.col(0).tail(m));
  const Eigen::VectorXd d_state = scale * p.out_weight.col(0).head(s);
  if (p.mode == StateMode::kGraph) {
    encode_graph_backward(p.encoder, in.graph, enc.graph, d_state, grads.encoder);
  } else {
    through_tanh(enc.query_activation, in.query_embedding, d_state);
  }
}

inline double q_value(const QNetworkParams& p, const KnowledgeGraph& graph, const Candidate& action,
                      const ProposalModel& embedder, std::span<const std::string> query = {}) {
  const auto in = make_state_input(p.mode, graph, query, embedder);
  const auto enc = encode_state(p, in);
  return q_from_parts(p, enc.vector, action_activation(p, mean_embedding(embedder, action.tokens)));
}

// Q for every candidate in one state.
inline std::vector<double> q_values(const QNetworkParams& p, const StateInput& in,
                                    std::span<const Eigen::VectorXd> action_embeddings) {
  const auto enc = encode_state(p, in);
  std::vector<double> out;
  out.reserve(action_embeddings.size());
  for (const auto& e : action_embeddings) out.push_back(q_from_parts(p, enc.vector, action_activation(p, e)));
  return out;
}

inline QNetworkParams sync_target(const QNetworkParams& params) { return params; }

struct Transition {
  KnowledgeGraph graph_before;
  Candidate action;
  KnowledgeGraph graph_after;
  double reward = 0.0;
  Sentence query;
  bool terminal = false;
  // Cleaned candidates at the successor state; the bootstrap max runs over
  // these. Empty means nothing to bootstrap from.
  std::vector<Candidate> next_candidates;
};

// Transition with embedding-level inputs precomputed for one state mode.
struct PreparedTransition {
  StateInput before;
  StateInput after;
  Eigen::VectorXd action_embedding;
  std::vector<Eigen::VectorXd> next_embeddings;
};

inline PreparedTransition prepare_transition(const Transition& t, StateMode mode, const ProposalModel& embedder) {
  PreparedTransition p;
  p.before = make_state_input(mode, t.graph_before, t.query.tokens, embedder);
  p.after = make_state_input(mode, t.graph_after, t.action.tokens, embedder);
  p.action_embedding = mean_embedding(embedder, t.action.tokens);
  for (const auto& c : t.next_candidates) p.next_embeddings.push_back(mean_embedding(embedder, c.tokens));
  return p;
}

// Bounded FIFO; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 800) : capacity_(capacity) {
    if (capacity == 0) throw UsageError("replay capacity must be positive");
  }

  void push(Transition t, std::optional<PreparedTransition> prepared = std::nullopt) {
    Slot slot{std::move(t), std::move(prepared)};
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(slot));
    } else {
      slots_[head_] = std::move(slot);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return slots_.empty(); }

  // i = 0 is the oldest.
  const Transition& at(std::size_t i) const { return slots_[(head_ + i) % slots_.size()].transition; }
  const std::optional<PreparedTransition>& prepared_at(std::size_t i) const {
    return slots_[(head_ + i) % slots_.size()].prepared;
  }

  // Without replacement when the buffer holds at least `batch` transitions,
  // with replacement otherwise.
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const {
    if (slots_.empty()) throw DataError("cannot sample an empty replay buffer");
    std::vector<std::size_t> out;
    if (slots_.size() < batch) {
      log::debug("replay buffer holds " + std::to_string(slots_.size()) + " < batch " + std::to_string(batch) +
                 "; sampling with replacement");
      for (std::size_t i = 0; i < batch; ++i) out.push_back(rng.index(slots_.size()));
      return out;
    }
    std::vector<std::size_t> all(slots_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (std::size_t i = 0; i < batch; ++i) std::swap(all[i], all[i + rng.index(all.size() - i)]);
    all.resize(batch);
    return all;
  }

 private:
  struct Slot {
    Transition transition;
    std::optional<PreparedTransition> prepared;
  };
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Slot> slots_;
};

inline void push_transition(ReplayBuffer& buffer, Transition t) { buffer.push(std::move(t)); }

enum class OptimizerKind { kSgd, kAdam };

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw UsageError("unknown optimizer '" + std::string(s) + "'");
}

struct DqnConfig {
  double gamma = 0.99;
  double learning_rate = 0.001;
  double epsilon_start = 0.1;
  double epsilon_floor = 0.01;
  double decay_divisor = 1000.0;
  std::size_t batch = 256;
  std::size_t replay_capacity = 800;
  std::size_t breadth = 25;
  std::size_t replay_update_period = 100;  // stories
  std::size_t target_sync_period = 300;    // stories
  std::size_t epochs = 20;
  std::size_t checkpoint_period = 5;       // epochs
  std::size_t replay_steps = 32;           // gradient steps per replay phase
  std::size_t max_continuations = 15;
  std::size_t max_tokens = 20;
  std::size_t top_k = 1000;
  std::size_t selection_stories = 20;      // held out to pick the best checkpoint
  OptimizerKind optimizer = OptimizerKind::kSgd;
  QNetworkConfig network;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw UsageError(std::string("dqn.") + name + " must be positive");
    };
    positive(gamma, "gamma");
    positive(learning_rate, "learning_rate");
    positive(epsilon_start, "epsilon_start");
    positive(epsilon_floor, "epsilon_floor");
    positive(decay_divisor, "decay_divisor");
    positive(static_cast<double>(batch), "batch");
    positive(static_cast<double>(replay_capacity), "replay_capacity");
    positive(static_cast<double>(breadth), "breadth");
    positive(static_cast<double>(replay_update_period), "replay_update_period");
    positive(static_cast<double>(target_sync_period), "target_sync_period");
    positive(static_cast<double>(epochs), "epochs");
    positive(static_cast<double>(checkpoint_period), "checkpoint_period");
    positive(static_cast<double>(replay_steps), "replay_steps");
    positive(static_cast<double>(max_continuations), "max_continuations");
    positive(static_cast<double>(max_tokens), "max_tokens");
    positive(static_cast<double>(top_k), "top_k");
    if (gamma > 1.0) throw UsageError("dqn.gamma must not exceed 1");
    if (!(epsilon_floor < epsilon_start)) throw UsageError("dqn.epsilon_floor must be below epsilon_start");
  }

  GenerationConfig generation() const {
    return GenerationConfig{breadth, max_continuations, SamplingParams{max_tokens, top_k}};
  }
};

// Per-step decrement toward the floor: eps - (eps - floor) / divisor.
inline double epsilon_step(double epsilon, const DqnConfig& config) {
  return epsilon - (epsilon - config.epsilon_floor) / config.decay_divisor;
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  // Gradient descent on `params` with gradient `grads`.
  void step(QNetworkParams& params, const QNetworkParams& grads) {
    std::vector<const Eigen::MatrixXd*> g;
    grads.for_each([&g](const std::string&, const Eigen::MatrixXd& m) { g.push_back(&m); });
    if (kind_ == OptimizerKind::kSgd) {
      std::size_t i = 0;
      params.for_each([&](const std::string&, Eigen::MatrixXd& m) { m -= lr_ * *g[i++]; });
      return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (first_.empty()) {
      for (const auto* m : g) {
        first_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
        second_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    std::size_t i = 0;
    params.for_each([&](const std::string&, Eigen::MatrixXd& m) {
      first_[i] = beta1 * first_[i] + (1.0 - beta1) * *g[i];
      second_[i] = beta2 * second_[i] + (1.0 - beta2) * g[i]->cwiseProduct(*g[i]);
      m.array() -= lr_ * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
      ++i;
    });
  }

  double learning_rate() const { return lr_; }

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<Eigen::MatrixXd> first_, second_;
  std::size_t t_ = 0;
};

struct ReplayStats {
  double loss = 0.0;  // mean squared TD error on the batch, before the step
};

// TD targets y = r for terminal transitions (or when no successor candidates
// were recorded), y = r + gamma * max_a' Q_target(G', a') otherwise.
inline double td_target(const Transition& t, const PreparedTransition& prep, const QNetworkParams& target,
                        double gamma) {
  if (t.terminal || prep.next_embeddings.empty()) return t.reward;
  const auto qs = q_values(target, prep.after, prep.next_embeddings);
  return t.reward + gamma * *std::max_element(qs.begin(), qs.end());
}

// Mean squared TD error over the given transitions.
inline double td_loss(const ReplayBuffer& buffer, std::span<const std::size_t> batch, const QNetworkParams& params,
                      const QNetworkParams& target, double gamma, const ProposalModel& embedder) {
  double total = 0.0;
  for (auto idx : batch) {
    const auto& t = buffer.at(idx);
    const auto& cached = buffer.prepared_at(idx);
    const auto prep = cached ? *cached : prepare_transition(t, params.mode, embedder);
    const double y = td_target(t, prep, target, gamma);
    const auto enc = encode_state(params, prep.before);
    const double q = q_from_parts(params, enc.vector, action_activation(params, prep.action_embedding));
    total += (y - q) * (y - q);
  }
  return total / static_cast<double>(batch.size());
}

// One gradient step on the mean squared TD error of a sampled batch. The
// target network only supplies bootstrap values and is not modified.
inline ReplayStats replay_update(const ReplayBuffer& buffer, QNetworkParams& params, const QNetworkParams& target,
                                 const DqnConfig& config, Rng& rng, Optimizer& optimizer,
                                 const ProposalModel& embedder) {
  if (buffer.empty()) throw DataError("replay update on an empty buffer");
  const auto batch = buffer.sample(config.batch, rng);
  QNetworkParams grads = params.zeros_like();
  ReplayStats stats;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (auto idx : batch) {
    const auto& t = buffer.at(idx);
    const auto& cached = buffer.prepared_at(idx);
    const auto prep = cached ? *cached : prepare_transition(t, params.mode, embedder);
    const double y = td_target(t, prep, target, config.gamma);
    const auto enc = encode_state(params, prep.before);
    const auto act = action_activation(params, prep.action_embedding);
    const double q = q_from_parts(params, enc.vector, act);
    stats.loss += (y - q) * (y - q) * inv_b;
    q_backward(params, prep.before, enc, prep.action_embedding, act, -2.0 * (y - q) * inv_b, grads);
  }
  optimizer.step(params, grads);
  return stats;
}

// Everything select_action needs about the current state.
struct ActionContext {
  const QNetworkParams& params;
  const ProposalModel& embedder;
  const ClusterAssignment& clusters;
  const KnowledgeGraph& graph;
  std::span<const std::string> query;
  std::optional<VerbClass> source;
};

// Candidates whose cluster is exactly one step above the source cluster, or
// equal to it once the source sits in the goal cluster.
inline std::vector<std::size_t> pruned_candidates(std::span<const Candidate> candidates,
                                                  const ClusterAssignment& clusters,
                                                  const std::optional<VerbClass>& source) {
  const long from = source_cluster_index(source, clusters);
  const long top = clusters.goal_cluster ? static_cast<long>(*clusters.goal_cluster)
                                         : static_cast<long>(clusters.k) - 1;
  const long wanted = from == top ? from : from + 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = clusters.find(candidates[i].verb_class);
    if (c && static_cast<long>(*c) == wanted) out.push_back(i);
  }
  return out;
}

inline std::size_t argmax_over(std::span<const double> q, std::span<const std::size_t> subset) {
  std::size_t best = subset.front();
  for (auto i : subset) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

// Epsilon-greedy with cluster pruning: explore uniformly with probability
// epsilon; otherwise take the Q-argmax among candidates that advance one
// cluster toward the goal, or among all candidates when none do. Ties go to
// the lowest index.
inline std::size_t select_action(std::span<const Candidate> candidates, const ActionContext& ctx, double epsilon,
                                 Rng& rng) {
  if (candidates.empty()) throw DataError("select_action on an empty candidate list");
  if (candidates.size() == 1) return 0;
  if (rng.uniform() < epsilon) return rng.index(candidates.size());
  const auto in = make_state_input(ctx.params.mode, ctx.graph, ctx.query, ctx.embedder);
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(candidates.size());
  for (const auto& c : candidates) embeddings.push_back(mean_embedding(ctx.embedder, c.tokens));
  const auto q = q_values(ctx.params, in, embeddings);
  auto subset = pruned_candidates(candidates, ctx.clusters, ctx.source);
  if (subset.empty()) {
    subset.resize(candidates.size());
    for (std::size_t i = 0; i < subset.size(); ++i) subset[i] = i;
  }
  return argmax_over(q, subset);
}

// Chooser for run_episode backed by a Q-network.
inline Chooser policy_chooser(const QNetworkParams& params, const ProposalModel& embedder,
                              const ClusterAssignment& clusters, double epsilon) {
  return [&params, &embedder, &clusters, epsilon](const EpisodeState& s, std::span<const Candidate> cands,
                                                  Rng& rng) {
    const ActionContext ctx{params, embedder, clusters, s.graph, s.query.tokens, s.source};
    return select_action(cands, ctx, epsilon, rng);
  };
}

// Checkpoints: container kind "qnet" holding every tensor as f64 under its
// visit name, a "network" text block and an echo of the training config.
inline std::string format_dqn_config(const DqnConfig& c) {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  kv("gamma", format_double(c.gamma));
  kv("learning_rate", format_double(c.learning_rate));
  kv("epsilon_start", format_double(c.epsilon_start));
  kv("epsilon_floor", format_double(c.epsilon_floor));
  kv("decay_divisor", format_double(c.decay_divisor));
  kv("batch", std::to_string(c.batch));
  kv("replay_capacity", std::to_string(c.replay_capacity));
  kv("breadth", std::to_string(c.breadth));
  kv("replay_update_period", std::to_string(c.replay_update_period));
  kv("target_sync_period", std::to_string(c.target_sync_period));
  kv("epochs", std::to_string(c.epochs));
  kv("checkpoint_period", std::to_string(c.checkpoint_period));
  kv("replay_steps", std::to_string(c.replay_steps));
  kv("max_continuations", std::to_string(c.max_continuations));
  kv("optimizer", c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam");
  return s;
}

inline Container qnet_to_container(const QNetworkParams& p, const DqnConfig* config = nullptr) {
  Container c("qnet");
  c.put_text("network", "mode=" + std::string(state_mode_name(p.mode)) + "\nheads=" +
                            std::to_string(p.encoder.heads()) + "\nhead_dim=" + std::to_string(p.encoder.head_dim()) +
                            "\nleaky_slope=" + format_double(p.encoder.leaky_slope) + "\naction_dim=" +
                            std::to_string(p.action_dim()) + "\ninput_dim=" + std::to_string(p.input_dim()) + "\n");
  if (config) c.put_text("dqn_config", format_dqn_config(*config));
  p.for_each([&c](const std::string& name, const Eigen::MatrixXd& m) {
    // Row-major on disk.
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(r, k));
    }
    c.put("tensor/" + name, std::move(data),
          {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
  });
  return c;
}

inline QNetworkParams qnet_from_container(const Container& c) {
  if (c.kind() != "qnet") throw DataError("checkpoint is not a Q-network");
  std::map<std::string, std::string> kv;
  for (auto line : split(c.get_text("network"), '\n')) {
    auto eq = line.find('=');
    if (eq != std::string_view::npos) kv.emplace(line.substr(0, eq), line.substr(eq + 1));
  }
  auto number = [&kv](const std::string& k) {
    auto v = parse_integer<std::size_t>(kv[k]);
    if (!v) throw DataError("corrupt Q-network header field " + k);
    return *v;
  };
  QNetworkConfig config;
  config.mode = parse_state_mode(kv["mode"]);
  config.encoder.heads = number("heads");
  config.encoder.head_dim = number("head_dim");
  config.encoder.leaky_slope = parse_double(kv["leaky_slope"]).value_or(0.2);
  config.action_dim = number("action_dim");
  Rng scratch(0);
  auto p = QNetworkParams::init(config, number("input_dim"), scratch);
  p.for_each([&c](const std::string& name, Eigen::MatrixXd& m) {
    const auto& t = c.get<double>("tensor/" + name);
    if (t.dims.size() != 2 || t.dims[0] != static_cast<std::uint64_t>(m.rows()) ||
        t.dims[1] != static_cast<std::uint64_t>(m.cols())) {
      throw DataError("checkpoint tensor has the wrong shape: " + name);
    }
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(r, k) = t.data[i++];
    }
  });
  return p;
}

struct DqnCheckpoint {
  std::size_t epoch = 0;
  QNetworkParams params;
  double selection_goal_rate = 0.0;
};

struct DqnTrainResult {
  QNetworkParams params;  // best checkpoint
  std::size_t best_epoch = 0;
  std::vector<DqnCheckpoint> checkpoints;
  std::vector<std::string> log;  // one line per story
  std::size_t skipped_stories = 0;
};

struct DqnTrainInputs {
  const Corpus& corpus;
  const ProposalModel& lm;
  const VerbClassIndex& index;
  const RewardTable& table;
  const ClusterAssignment& clusters;
};

// Greedy goal rate over seed sentences, used for checkpoint selection.
inline double greedy_goal_rate(const QNetworkParams& params, const DqnTrainInputs& in,
                               std::span<const Sentence> seeds, const GenerationConfig& gen, std::uint64_t seed) {
  if (seeds.empty()) return 0.0;
  std::size_t reached = 0;
  const auto chooser = policy_chooser(params, in.lm, in.clusters, 0.0);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Rng rng(derive_seed(seed, "policy/selection", i));
    const auto r = run_episode(seeds[i], in.table.goal, in.lm, in.index, in.clusters, gen, chooser, rng);
    if (r.cause == TerminalCause::kGoalReached) ++reached;
  }
  return static_cast<double>(reached) / static_cast<double>(seeds.size());
}

// The training loop. Per story: seed sentence -> candidates -> clean ->
// epsilon-greedy pick -> triples into the graph -> transition with the shaped
// reward pushed to replay. Every replay_update_period stories the learner
// takes replay_steps gradient steps; every target_sync_period stories the
// target network is refreshed. Every checkpoint_period epochs the policy is
// scored greedily on held-out seeds and the best checkpoint is kept.
inline DqnTrainResult train_dqn(const DqnTrainInputs& in, const DqnConfig& config, std::uint64_t seed,
                                const std::function<void(const DqnCheckpoint&)>& on_checkpoint = {}) {
  config.validate();
  if (in.corpus.empty()) throw DataError("training corpus is empty");
  if (!in.clusters.find(in.table.goal)) throw DataError("goal class is not clustered");

  std::vector<const Story*> train_stories;
  std::vector<Sentence> selection_seeds;
  {
    std::vector<const Story*> all;
    for (const auto& s : in.corpus.stories()) all.push_back(&s);
    Rng split_rng(derive_seed(seed, "policy/selection-split"));
    split_rng.shuffle(all);
    const std::size_t hold = all.size() > 2 * config.selection_stories ? config.selection_stories : 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i < hold) {
        selection_seeds.push_back(all[i]->sentences.front());
      } else {
        train_stories.push_back(all[i]);
      }
    }
    // Back to corpus order; the shuffle only decides membership.
    std::sort(train_stories.begin(), train_stories.end());
    if (hold == 0) {
      for (const auto* s : train_stories) selection_seeds.push_back(s->sentences.front());
      if (selection_seeds.size() > config.selection_stories) selection_seeds.resize(config.selection_stories);
    }
  }

  Rng init_rng(derive_seed(seed, "policy/init"));
  QNetworkParams params = QNetworkParams::init(config.network, in.lm.embedding_dim(), init_rng);
  QNetworkParams target = sync_target(params);
  Optimizer optimizer(config.optimizer, config.learning_rate);
  ReplayBuffer buffer(config.replay_capacity);
  Rng rng(derive_seed(seed, "policy/train"));
  double epsilon = config.epsilon_start;
  const auto gen = config.generation();

  DqnTrainResult result;
  double best_rate = -1.0;
  std::size_t stories_seen = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto order = train_stories;
    rng.shuffle(order);
    for (const Story* story : order) {
      double cumulative = 0.0;
      const auto chooser = [&](const EpisodeState& s, std::span<const Candidate> cands, Rng& r) {
        const ActionContext ctx{params, in.lm, in.clusters, s.graph, s.query.tokens, s.source};
        const auto pick = select_action(cands, ctx, epsilon, r);
        epsilon = epsilon_step(epsilon, config);
        return pick;
      };
      EpisodeOptions options;
      options.propose_after_limit = true;
      options.on_step = [&](const EpisodeStep& step) {
        const double reward = shaped_reward(step.action.verb_class, step.source, in.table, in.clusters);
        cumulative += reward;
        Transition t{step.graph_before, step.action, step.graph_after, reward,
                     step.query,        step.terminal, step.next_candidates};
        auto prepared = prepare_transition(t, params.mode, in.lm);
        buffer.push(std::move(t), std::move(prepared));
      };
      const auto episode =
          run_episode(story->sentences.front(), in.table.goal, in.lm, in.index, in.clusters, gen, chooser, rng,
                      options);
      if (episode.continuations.empty()) {
        ++result.skipped_stories;
        log::debug("story " + story->id + " skipped: no valid first candidates");
      }
      result.log.push_back("epoch=" + std::to_string(epoch) + "\tstory=" + story->id +
                           "\tlength=" + std::to_string(episode.continuations.size() + 1) +
                           "\tcause=" + std::string(terminal_cause_name(episode.cause)) +
                           "\treward=" + format_double(cumulative) + "\tepsilon=" + format_double(epsilon));
      ++stories_seen;
      if (stories_seen % config.replay_update_period == 0 && !buffer.empty()) {
        for (std::size_t k = 0; k < config.replay_steps; ++k) {
          replay_update(buffer, params, target, config, rng, optimizer, in.lm);
        }
      }
      if (stories_seen % config.target_sync_period == 0) target = sync_target(params);
    }
    if (epoch % config.checkpoint_period == 0 || epoch == config.epochs) {
      DqnCheckpoint cp{epoch, params,
                       greedy_goal_rate(params, in, selection_seeds, gen, derive_seed(seed, "policy/checkpoint"))};
      if (cp.selection_goal_rate >= best_rate) {
        best_rate = cp.selection_goal_rate;
        result.params = params;
        result.best_epoch = epoch;
      }
      if (on_checkpoint) on_checkpoint(cp);
      result.checkpoints.push_back(std::move(cp));
    }
  }
  return result;
}

}  // namespace goalweaver

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


#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "goalweaver/goalweaver.hpp"
#include "test_util.hpp"

namespace goalweaver {
namespace {

using testing::TempDir;

// Token "wI" embeds as the I-th unit vector; anything else as zero.
class OneHotEmbedder : public ProposalModel {
 public:
  explicit OneHotEmbedder(std::size_t dim) : dim_(dim) {}
  std::vector<RawContinuation> generate(std::span<const std::string>, std::size_t, const SamplingParams&,
                                        Rng&) const override {
    return {};
  }
  std::size_t embedding_dim() const override { return dim_; }
  Eigen::VectorXd token_embedding(std::string_view token) const override {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    if (token.size() >= 2 && token[0] == 'w') v[std::stoi(std::string(token.substr(1)))] = 1.0;
    return v;
  }
  double sequence_logprob(std::span<const std::string>, std::span<const std::string>) const override { return 0.0; }

 private:
  std::size_t dim_;
};

Candidate cand(int i, const std::string& cls) {
  const std::string tok = "w" + std::to_string(i);
  return Candidate{tok, {tok}, cls, 0, tok};
}

ClusterAssignment three_clusters() {
  ClusterAssignment c;
  c.k = 3;
  c.cluster_of = {{"c0", 0}, {"c1", 1}, {"c2", 2}};
  c.means = {-1.0, -0.5, 0.0};
  c.goal_cluster = 2;
  return c;
}

// Query-mode network whose Q for candidate "wI" is q[I].
QNetworkParams scripted_network(const std::vector<double>& q) {
  QNetworkConfig config;
  config.mode = StateMode::kQuery;
  config.action_dim = q.size();
  Rng rng(0);
  auto p = QNetworkParams::init(config, q.size(), rng);
  p.action_proj.setIdentity();
  p.action_bias.setZero();
  p.out_weight.setZero();
  for (std::size_t i = 0; i < q.size(); ++i) {
    p.out_weight(static_cast<Eigen::Index>(q.size() + i), 0) = q[i] / std::tanh(1.0);
  }
  p.out_bias.setZero();
  return p;
}

TEST(QValue, ZeroFinalWeightsGiveBias) {
  const OneHotEmbedder emb(4);
  for (auto mode : {StateMode::kGraph, StateMode::kQuery}) {
    QNetworkConfig config;
    config.mode = mode;
    config.encoder = GraphEncoderConfig{2, 3, 0.2};
    config.action_dim = 5;
    Rng rng(1);
    auto p = QNetworkParams::init(config, 4, rng);
    p.out_weight.setZero();
    p.out_bias(0, 0) = 0.37;
    const std::vector<Triple> ts{Triple::make("w1", "r", "w2")};
    EXPECT_DOUBLE_EQ(q_value(p, KnowledgeGraph(ts), cand(0, "c0"), emb), 0.37);
  }
}

TEST(QValue, PureAndMatchesStraightLineOracle) {
  const OneHotEmbedder emb(4);
  QNetworkConfig config;
  config.mode = StateMode::kQuery;
  config.action_dim = 3;
  Rng rng(2);
  const auto p = QNetworkParams::init(config, 4, rng);
  const std::vector<std::string> query{"w0", "w3"};
  const auto a = cand(2, "c0");
  const double q = q_value(p, KnowledgeGraph(), a, emb, query);
  EXPECT_EQ(q, q_value(p, KnowledgeGraph(), a, emb, query));
  // Oracle: w . [tanh(P q + b) ; tanh(P a + b)] + c with q = (e0 + e3) / 2.
  double want = p.out_bias(0, 0);
  for (int r = 0; r < 3; ++r) {
    const double s = std::tanh((p.action_proj(r, 0) + p.action_proj(r, 3)) / 2.0 + p.action_bias(r, 0));
    const double x = std::tanh(p.action_proj(r, 2) + p.action_bias(r, 0));
    want += p.out_weight(r, 0) * s + p.out_weight(3 + r, 0) * x;
  }
  EXPECT_NEAR(q, want, 1e-12);
}

TEST(Select, SingleCandidateAlwaysReturned) {
  const OneHotEmbedder emb(3);
  const auto p = scripted_network({0.0, 0.0, 0.0});
  const auto clusters = three_clusters();
  const KnowledgeGraph g;
  const std::vector<Candidate> cands{cand(1, "c2")};
  const ActionContext ctx{p, emb, clusters, g, {}, std::string("c0")};
  Rng rng(3);
  for (double eps : {0.0, 0.5, 1.0}) EXPECT_EQ(select_action(cands, ctx, eps, rng), 0u);
}

TEST(Select, PruningDominatesQ) {
  const OneHotEmbedder emb(3);
  const auto p = scripted_network({0.9, 0.1, 0.0});
  const auto clusters = three_clusters();
  const KnowledgeGraph g;
  const std::vector<Candidate> cands{cand(0, "c2"), cand(1, "c1")};
  const ActionContext ctx{p, emb, clusters, g, {}, std::string("c0")};
  Rng rng(4);
  EXPECT_EQ(select_action(cands, ctx, 0.0, rng), 1u);
}

TEST(Select, ArgmaxFallbackWhenPruningEmpty) {
  const OneHotEmbedder emb(3);
  const auto p = scripted_network({0.2, 0.9, 0.5});
  const auto clusters = three_clusters();
  const KnowledgeGraph g;
  const std::vector<Candidate> cands{cand(0, "c0"), cand(1, "c0"), cand(2, "c0")};
  const ActionContext ctx{p, emb, clusters, g, {}, std::string("c0")};
  Rng rng(5);
  EXPECT_EQ(select_action(cands, ctx, 0.0, rng), 1u);
}

TEST(Select, MissingSourceWantsLowestCluster) {
  const auto clusters = three_clusters();
  const std::vector<Candidate> cands{cand(0, "c1"), cand(1, "c0"), cand(2, "zz")};
  EXPECT_EQ(pruned_candidates(cands, clusters, std::nullopt), std::vector<std::size_t>{1});
  EXPECT_EQ(pruned_candidates(cands, clusters, std::string("c0")), std::vector<std::size_t>{0});
}

TEST(Select, EpsilonOneIsUniform) {
  const OneHotEmbedder emb(3);
  const auto p = scripted_network({0.2, 0.9, 0.5});
  const auto clusters = three_clusters();
  const KnowledgeGraph g;
  const std::vector<Candidate> cands{cand(0, "c0"), cand(1, "c0"), cand(2, "c0")};
  const ActionContext ctx{p, emb, clusters, g, {}, std::string("c0")};
  Rng rng(6);
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 3000; ++i) ++hits[select_action(cands, ctx, 1.0, rng)];
  for (int h : hits) EXPECT_NEAR(h, 1000, 120);
}

TEST(Select, EmptyCandidatesIsDataError) {
  const OneHotEmbedder emb(3);
  const auto p = scripted_network({0.0, 0.0, 0.0});
  const auto clusters = three_clusters();
  const KnowledgeGraph g;
  const ActionContext ctx{p, emb, clusters, g, {}, std::nullopt};
  Rng rng(7);
  EXPECT_THROW(select_action(std::vector<Candidate>{}, ctx, 0.0, rng), DataError);
}

Transition transition(int action, double reward, bool terminal = true) {
  Transition t;
  t.action = cand(action, "c1");
  t.reward = reward;
  t.terminal = terminal;
  t.query = Sentence::from_text("w0");
  return t;
}

TEST(Replay, FifoEviction) {
  ReplayBuffer b(2);
  for (int i = 1; i <= 3; ++i) push_transition(b, transition(0, i));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at(0).reward, 2.0);
  EXPECT_EQ(b.at(1).reward, 3.0);
}

TEST(Replay, SizeAndCapacity) {
  ReplayBuffer fresh(800);
  push_transition(fresh, transition(0, 1));
  EXPECT_EQ(fresh.size(), 1u);
  ReplayBuffer full(800);
  for (int i = 0; i < 800; ++i) push_transition(full, transition(0, i));
  EXPECT_EQ(full.size(), 800u);
  EXPECT_THROW(ReplayBuffer(0), UsageError);
}

TEST(Replay, SampleWithoutReplacementWhenLargeEnough) {
  ReplayBuffer b(10);
  for (int i = 0; i < 10; ++i) push_transition(b, transition(0, i));
  Rng rng(8);
  auto s = b.sample(10, rng);
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(s[i], i);
  EXPECT_EQ(b.sample(25, rng).size(), 25u);
}

TEST(Replay, TerminalAndZeroGammaTargetsAreRewards) {
  const OneHotEmbedder emb(3);
  const auto target = scripted_network({0.4, 0.7, 0.1});
  auto t = transition(0, -0.3, true);
  t.next_candidates = {cand(1, "c1")};
  const auto prep = prepare_transition(t, StateMode::kQuery, emb);
  EXPECT_EQ(td_target(t, prep, target, 0.9), -0.3);
  t.terminal = false;
  EXPECT_EQ(td_target(t, prep, target, 0.0), -0.3);
  EXPECT_NEAR(td_target(t, prep, target, 0.5), -0.3 + 0.5 * 0.7, 1e-12);
}

QNetworkParams query_network(std::size_t dim, std::uint64_t seed) {
  QNetworkConfig config;
  config.mode = StateMode::kQuery;
  config.action_dim = 8;
  Rng rng(seed);
  return QNetworkParams::init(config, dim, rng);
}

TEST(Replay, SingleTransitionConverges) {
  const OneHotEmbedder emb(3);
  ReplayBuffer b(4);
  push_transition(b, transition(1, -0.42));
  auto params = query_network(3, 9);
  const auto target = sync_target(params);
  DqnConfig config;
  config.batch = 1;
  config.learning_rate = 0.05;
  Optimizer opt(OptimizerKind::kSgd, config.learning_rate);
  Rng rng(10);
  for (int i = 0; i < 2000; ++i) replay_update(b, params, target, config, rng, opt, emb);
  const std::vector<std::string> query{"w0"};
  EXPECT_NEAR(q_value(params, KnowledgeGraph(), cand(1, "c1"), emb, query), -0.42, 0.01);
}

TEST(Replay, ZeroGammaLearnsImmediateRewards) {
  const OneHotEmbedder emb(4);
  ReplayBuffer b(8);
  const std::vector<double> rewards{-0.6, -0.2, 0.0, -0.35};
  for (int i = 0; i < 4; ++i) {
    auto t = transition(i, rewards[static_cast<std::size_t>(i)], false);
    t.next_candidates = {cand(0, "c1"), cand(2, "c2")};
    push_transition(b, t);
  }
  auto params = query_network(4, 11);
  DqnConfig config;
  config.gamma = 0.0;
  config.batch = 4;
  Optimizer opt(OptimizerKind::kAdam, 0.01);
  Rng rng(12);
  for (int i = 0; i < 3000; ++i) replay_update(b, params, sync_target(params), config, rng, opt, emb);
  const std::vector<std::string> query{"w0"};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(q_value(params, KnowledgeGraph(), cand(i, "c1"), emb, query), rewards[static_cast<std::size_t>(i)],
                0.05);
  }
}

TEST(Replay, UpdateLeavesTargetAlone) {
  const OneHotEmbedder emb(3);
  ReplayBuffer b(4);
  push_transition(b, transition(1, -0.4));
  auto params = query_network(3, 13);
  const auto target = sync_target(params);
  const auto before = target.checksum();
  DqnConfig config;
  Optimizer opt(OptimizerKind::kSgd, 0.1);
  Rng rng(14);
  replay_update(b, params, target, config, rng, opt, emb);
  EXPECT_EQ(target.checksum(), before);
  EXPECT_NE(params.checksum(), before);
  EXPECT_THROW(replay_update(ReplayBuffer(2), params, target, config, rng, opt, emb), DataError);
}

TEST(Target, SyncCopiesAndDecouples) {
  auto params = query_network(3, 15);
  const auto target = sync_target(params);
  EXPECT_EQ(sync_target(params).checksum(), target.checksum());
  params.out_bias(0, 0) += 1.0;
  EXPECT_NE(params.checksum(), target.checksum());
  EXPECT_EQ(target.checksum(), sync_target(target).checksum());
}

TEST(Epsilon, StepArithmetic) {
  const DqnConfig c;
  EXPECT_NEAR(epsilon_step(0.1, c), 0.09991, 1e-15);
  EXPECT_DOUBLE_EQ(epsilon_step(0.01, c), 0.01);
  double eps = 0.1;
  for (int i = 0; i < 1000; ++i) eps = epsilon_step(eps, c);
  EXPECT_NEAR(eps, 0.01 + 0.09 * std::pow(1.0 - 1.0 / 1000.0, 1000), 1e-12);
  EXPECT_NEAR(eps, 0.0431, 1e-4);
}

TEST(Config, ValidationRejectsBadValues) {
  DqnConfig c;
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), UsageError);
  c = DqnConfig{};
  c.epsilon_floor = 0.2;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_THROW(parse_optimizer("rmsprop"), UsageError);
  EXPECT_THROW(parse_state_mode("tree"), UsageError);
}

TEST(Checkpoint, QnetRoundTrip) {
  TempDir dir;
  QNetworkConfig config;
  config.encoder = GraphEncoderConfig{2, 3, 0.2};
  config.action_dim = 4;
  Rng rng(16);
  const auto p = QNetworkParams::init(config, 5, rng);
  const auto path = (dir.path() / "x.qnet").string();
  qnet_to_container(p).save(path);
  const auto back = qnet_from_container(Container::load(path));
  EXPECT_EQ(back.checksum(), p.checksum());
  EXPECT_EQ(back.mode, p.mode);
}

TEST(Train, TwentyEpochsGiveFourCheckpoints) {
  const auto planted = planted_chain_corpus(PlantedChainConfig{}, 2);
  std::vector<Story> few(planted.corpus.stories().begin(), planted.corpus.stories().begin() + 12);
  const Corpus corpus(std::move(few));
  const auto lm = NgramModel::train(planted.corpus, NgramConfig{3, 0.01, 8, 2});
  const auto table = compute_reward_table(planted.corpus, planted.goal);
  const auto clusters = cluster_rewards(table, 3);
  DqnConfig config;
  config.breadth = 3;
  config.max_continuations = 3;
  config.top_k = 5;
  config.batch = 8;
  config.replay_update_period = 5;
  config.replay_steps = 2;
  config.selection_stories = 2;
  config.network.encoder = GraphEncoderConfig{1, 4, 0.2};
  config.network.action_dim = 4;
  std::size_t seen = 0;
  const auto result = train_dqn(DqnTrainInputs{corpus, lm, planted.index, table, clusters}, config, 3,
                                [&seen](const DqnCheckpoint&) { ++seen; });
  EXPECT_EQ(seen, 4u);
  ASSERT_EQ(result.checkpoints.size(), 4u);
  EXPECT_EQ(result.checkpoints.back().epoch, 20u);
  EXPECT_EQ(result.best_epoch % 5, 0u);
  const auto again = train_dqn(DqnTrainInputs{corpus, lm, planted.index, table, clusters}, config, 3);
  EXPECT_EQ(again.params.checksum(), result.params.checksum());
}

}  // namespace
}  // namespace goalweaver

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

// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// non-zero if any criterion fails. Run with criterion numbers as arguments
// to select a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

// Before httplib: its resolver headers define macros that clash with Eigen.
#include "goalweaver/goalweaver.hpp"

#include "httplib.h"

namespace gw = goalweaver;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Reward oracle equivalence.

// Direct nested iteration over stories and sentence pairs.
std::map<gw::VerbClass, double> oracle_rewards(const std::vector<gw::Story>& stories, const gw::VerbClass& goal) {
  std::set<gw::VerbClass> classes;
  for (const auto& st : stories) {
    for (const auto& s : st.sentences) {
      if (s.verb_class) classes.insert(*s.verb_class);
    }
  }
  const double verbs = static_cast<double>(classes.size());
  std::map<gw::VerbClass, double> out;
  for (const auto& v : classes) {
    double proximity = 0.0;
    std::size_t with_v = 0, with_both = 0;
    for (const auto& st : stories) {
      bool has_v = false, has_g = false;
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (std::size_t i = 0; i < st.sentences.size(); ++i) {
        if (st.sentences[i].verb_class == v) has_v = true;
        if (st.sentences[i].verb_class == goal) has_g = true;
        for (std::size_t j = 0; j < st.sentences.size(); ++j) {
          if (st.sentences[i].verb_class == v && st.sentences[j].verb_class == goal) {
            best = std::min(best, i > j ? i - j : j - i);
          }
        }
      }
      with_v += has_v;
      if (has_v && has_g) {
        ++with_both;
        proximity += static_cast<double>(st.sentences.size() - best);
      }
    }
    if (with_both == 0) continue;
    const double r1 = std::log(proximity);
    const double r2 = std::log(static_cast<double>(with_both) / static_cast<double>(with_v));
    out[v] = r1 * r2 / verbs;
  }
  return out;
}

Outcome criterion1() {
  double worst = 0.0;
  bool keys_match = true;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    gw::Rng rng(gw::derive_seed(1001, "acceptance/reward", trial));
    const std::vector<gw::VerbClass> pool = {"a-1", "b-2", "c-3", "d-4", "e-5", "f-6"};
    const gw::VerbClass goal = pool[0];
    std::vector<gw::Story> stories;
    const std::size_t n = 5 + rng.index(16);
    for (std::size_t s = 0; s < n; ++s) {
      gw::Story st{"t" + std::to_string(s), {}};
      const std::size_t len = 1 + rng.index(8);
      for (std::size_t i = 0; i < len; ++i) {
        gw::Sentence sentence = gw::Sentence::from_text("x .");
        if (rng.uniform() < 0.8) sentence.verb_class = pool[rng.index(pool.size())];
        st.sentences.push_back(std::move(sentence));
      }
      stories.push_back(std::move(st));
    }
    stories[0].sentences[0].verb_class = goal;
    const auto table = gw::compute_reward_table(gw::Corpus(stories), goal);
    const auto expected = oracle_rewards(stories, goal);
    if (table.entries.size() != expected.size()) keys_match = false;
    for (const auto& [v, r] : expected) {
      const auto got = table.reward(v);
      if (!got) {
        keys_match = false;
        continue;
      }
      worst = std::max(worst, std::abs(*got - r));
    }
  }
  return {keys_match && worst <= 1e-12, "max |error| " + fmt(worst) + (keys_match ? "" : ", class sets differ")};
}

// ---------------------------------------------------------------------------
// 2. Jenks exactness.

double partition_ssd(const std::vector<gw::jenks::WeightedValue>& points, const std::vector<std::size_t>& breaks) {
  double total = 0.0;
  for (std::size_t c = 0; c < breaks.size(); ++c) {
    const std::size_t end = c + 1 < breaks.size() ? breaks[c + 1] : points.size();
    std::vector<double> values;
    for (std::size_t i = breaks[c]; i < end; ++i) {
      for (double w = 0; w < points[i].weight; w += 1.0) values.push_back(points[i].value);
    }
    total += gw::jenks::ssd(values);
  }
  return total;
}

// Every way to cut n sorted points into k contiguous non-empty groups.
double exhaustive_best(const std::vector<gw::jenks::WeightedValue>& points, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> breaks{0};
  std::function<void(std::size_t)> recurse = [&](std::size_t from) {
    if (breaks.size() == k) {
      best = std::min(best, partition_ssd(points, breaks));
      return;
    }
    for (std::size_t b = from; b + (k - breaks.size()) <= points.size(); ++b) {
      breaks.push_back(b);
      recurse(b + 1);
      breaks.pop_back();
    }
  };
  recurse(1);
  return best;
}

Outcome criterion2() {
  std::size_t exact = 0;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    gw::Rng rng(gw::derive_seed(1002, "acceptance/jenks", trial));
    const std::size_t k = 1 + rng.index(4);
    const std::size_t n = k + rng.index(21 - k);
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) values.push_back(rng.uniform() * 10.0 - 5.0);
    const auto points = gw::jenks::collapse(values);
    const auto breaks = gw::jenks::optimal_breaks(points, k);
    const double got = partition_ssd(points, breaks);
    const double want = exhaustive_best(points, k);
    exact += got == want;
    worst = std::max(worst, std::abs(got - want));
  }
  return {exact == 50, std::to_string(exact) + "/50 exact, max |SSD difference| " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 3. Gradient checks.

template <typename Params>
std::vector<double*> flatten(Params& p) {
  std::vector<double*> out;
  p.for_each([&out](const std::string&, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  });
  return out;
}

struct EncoderView {
  gw::GraphEncoderParams& p;
  template <typename F>
  void for_each(F&& f) {
    gw::GraphEncoderParams::visit(p, "", f);
  }
};

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale > 0.0 ? std::sqrt(diff) / scale : std::sqrt(diff);
}

gw::GraphInput random_graph(gw::Rng& rng, std::size_t dim) {
  gw::GraphInput g;
  const std::size_t n = 2 + rng.index(4);
  g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = rng.normal();
  std::vector<std::set<std::size_t>> sets(n);
  for (std::size_t i = 0; i < n; ++i) sets[i].insert(i);
  for (std::size_t e = 0; e < n; ++e) {
    const auto a = rng.index(n), b = rng.index(n);
    sets[a].insert(b);
    sets[b].insert(a);
  }
  for (const auto& s : sets) g.neighbors.emplace_back(s.begin(), s.end());
  return g;
}

Outcome criterion3() {
  constexpr double h = 1e-6;
  double worst_encoder = 0.0, worst_q = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    gw::Rng rng(gw::derive_seed(1003, "acceptance/gradcheck", trial));
    const std::size_t dim = 3 + rng.index(3);

    // encode_graph against loss = c . output.
    gw::GraphEncoderConfig ec{1 + rng.index(3), 2 + rng.index(3), 0.2};
    auto enc_params = gw::GraphEncoderParams::init(ec, dim, rng);
    const auto graph = random_graph(rng, dim);
    Eigen::VectorXd c(static_cast<Eigen::Index>(enc_params.output_dim()));
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.normal();
    auto grads = enc_params.zeros_like();
    gw::encode_graph_backward(enc_params, graph, gw::encode_graph(enc_params, graph), c, grads);
    EncoderView pv{enc_params}, gv{grads};
    auto pp = flatten(pv);
    auto gp = flatten(gv);
    std::vector<double> analytic, numeric;
    for (std::size_t i = 0; i < pp.size(); ++i) {
      const double saved = *pp[i];
      *pp[i] = saved + h;
      const double up = c.dot(gw::encode_graph(enc_params, graph).output);
      *pp[i] = saved - h;
      const double down = c.dot(gw::encode_graph(enc_params, graph).output);
      *pp[i] = saved;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(*gp[i]);
    }
    worst_encoder = std::max(worst_encoder, relative_error(analytic, numeric));

    // q_value in both state modes.
    for (auto mode : {gw::StateMode::kGraph, gw::StateMode::kQuery}) {
      gw::QNetworkConfig qc;
      qc.mode = mode;
      qc.encoder = ec;
      qc.action_dim = 2 + rng.index(4);
      auto q = gw::QNetworkParams::init(qc, dim, rng);
      gw::StateInput in;
      in.graph = graph;
      in.query_embedding = Eigen::VectorXd::Random(static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < in.query_embedding.size(); ++i) in.query_embedding[i] = rng.normal();
      Eigen::VectorXd action(static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < action.size(); ++i) action[i] = rng.normal();
      auto value = [&]() {
        return gw::q_from_parts(q, gw::encode_state(q, in).vector, gw::action_activation(q, action));
      };
      auto qg = q.zeros_like();
      const auto enc = gw::encode_state(q, in);
      gw::q_backward(q, in, enc, action, gw::action_activation(q, action), 1.0, qg);
      auto qp = flatten(q);
      auto qgp = flatten(qg);
      std::vector<double> a, n;
      for (std::size_t i = 0; i < qp.size(); ++i) {
        const double saved = *qp[i];
        *qp[i] = saved + h;
        const double up = value();
        *qp[i] = saved - h;
        const double down = value();
        *qp[i] = saved;
        n.push_back((up - down) / (2 * h));
        a.push_back(*qgp[i]);
      }
      worst_q = std::max(worst_q, relative_error(a, n));
    }
  }
  return {worst_encoder < 1e-4 && worst_q < 1e-4,
          "max relative error: encode_graph " + fmt(worst_encoder) + ", q_value " + fmt(worst_q)};
}

// ---------------------------------------------------------------------------
// 4. DQN tabular sanity.

// Three states, two actions each, every action owned by one state.
struct MdpEdge {
  std::size_t state, action;
  double reward;
  int next;  // -1 = terminal
};

Outcome criterion4() {
  const std::vector<MdpEdge> edges = {
      {0, 0, 0.0, 1}, {0, 1, 0.3, -1}, {1, 2, 0.0, 2}, {1, 3, 0.1, 0}, {2, 4, 1.0, -1}, {2, 5, -0.2, 1},
  };
  constexpr double gamma = 0.9;
  constexpr std::size_t states = 3, actions = 6, dim = states + actions;

  // Value iteration.
  std::vector<double> q_star(actions, 0.0);
  for (int sweep = 0; sweep < 1000; ++sweep) {
    std::vector<double> v(states, -std::numeric_limits<double>::infinity());
    for (const auto& e : edges) v[e.state] = std::max(v[e.state], q_star[e.action]);
    for (const auto& e : edges) q_star[e.action] = e.reward + (e.next < 0 ? 0.0 : gamma * v[e.next]);
  }

  auto onehot = [](std::size_t i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v[static_cast<Eigen::Index>(i)] = 1.0;
    return v;
  };
  // Embeddings are precomputed; the embedder is never consulted.
  gw::VerbClassIndex index;
  index.add("walk", "run-51.3.2");
  const auto tiny = gw::Corpus({gw::Story{"m", {gw::detail::make_sentence("she walked .", &index)}}});
  const auto embedder = gw::NgramModel::train(tiny, gw::NgramConfig{});

  gw::ReplayBuffer buffer(16);
  for (const auto& e : edges) {
    gw::Transition t;
    t.reward = e.reward;
    t.terminal = e.next < 0;
    gw::PreparedTransition p;
    p.before.query_embedding = onehot(e.state);
    p.action_embedding = onehot(states + e.action);
    if (e.next >= 0) {
      p.after.query_embedding = onehot(static_cast<std::size_t>(e.next));
      for (const auto& f : edges) {
        if (static_cast<int>(f.state) == e.next) {
          p.next_embeddings.push_back(onehot(states + f.action));
          t.next_candidates.push_back(gw::Candidate{"a" + std::to_string(f.action), {}, "x", 0, ""});
        }
      }
    }
    buffer.push(std::move(t), std::move(p));
  }

  gw::DqnConfig config;
  config.gamma = gamma;
  config.batch = edges.size();
  config.network.mode = gw::StateMode::kQuery;
  config.network.action_dim = 16;
  gw::Rng rng(gw::derive_seed(1004, "acceptance/mdp"));
  auto params = gw::QNetworkParams::init(config.network, dim, rng);
  auto target = gw::sync_target(params);
  gw::Optimizer optimizer(gw::OptimizerKind::kAdam, 0.01);
  for (std::size_t step = 1; step <= 6000; ++step) {
    gw::replay_update(buffer, params, target, config, rng, optimizer, embedder);
    if (step % 20 == 0) target = gw::sync_target(params);
  }
  double worst = 0.0;
  for (const auto& e : edges) {
    const auto enc = gw::encode_state(params, gw::StateInput{{}, onehot(e.state)});
    const double q = gw::q_from_parts(params, enc.vector, gw::action_activation(params, onehot(states + e.action)));
    worst = std::max(worst, std::abs(q - q_star[e.action]));
  }
  return {worst <= 0.05, "max |Q - Q*| " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 5 and 6. Planted structure end to end, and the state ablation.

struct PlantedSetup {
  gw::PlantedCorpus planted = gw::planted_chain_corpus({}, 1);
  gw::RewardTable table = gw::compute_reward_table(planted.corpus, planted.goal);
  // One cluster per chain step.
  gw::ClusterAssignment clusters = gw::cluster_rewards(table, 5);
  std::shared_ptr<const gw::NgramModel> lm;

  PlantedSetup() {
    gw::NgramConfig c;
    c.order = 4;
    c.seed = 1;
    lm = std::make_shared<const gw::NgramModel>(gw::NgramModel::train(planted.corpus, c));
  }

  gw::DqnConfig dqn_config(gw::StateMode mode) const {
    gw::DqnConfig c;
    c.breadth = 10;
    c.epochs = 5;
    c.max_continuations = 8;
    c.top_k = 5;
    c.network.mode = mode;
    return c;
  }

  gw::GenerationConfig generation() const { return {10, 8, {20, 5}}; }

  std::vector<gw::Sentence> seeds() const {
    std::vector<gw::Sentence> out;
    for (std::size_t i = 0; i < 100; ++i) out.push_back(planted.chain_seeds[i % planted.chain_seeds.size()]);
    return out;
  }
};

PlantedSetup& planted_setup() {
  static PlantedSetup setup;
  return setup;
}

std::map<std::string, gw::ModelReport>& planted_reports() {
  static std::map<std::string, gw::ModelReport> reports;
  if (!reports.empty()) return reports;
  auto& s = planted_setup();
  const gw::DqnTrainInputs in{s.planted.corpus, *s.lm, s.planted.index, s.table, s.clusters};
  const auto kg = gw::train_dqn(in, s.dqn_config(gw::StateMode::kGraph), 11);
  const auto plain = gw::train_dqn(in, s.dqn_config(gw::StateMode::kQuery), 11);
  gw::Rng init_rng(gw::derive_seed(1005, "acceptance/untrained"));
  const auto untrained = gw::QNetworkParams::init(s.dqn_config(gw::StateMode::kGraph).network,
                                                  s.lm->embedding_dim(), init_rng);
  const std::vector<gw::GeneratorBundle> bundles = {
      {"untrained-random", s.lm.get(), &untrained, 1.0, false},
      {"kg-dqn", s.lm.get(), &kg.params, 0.0, false},
      {"dqn", s.lm.get(), &plain.params, 0.0, false},
  };
  const auto seeds = s.seeds();
  const gw::EvalInputs ein{s.planted.index, s.clusters, nullptr};
  auto report = gw::evaluate(bundles, seeds, s.planted.goal, ein, s.generation(), 1005);
  for (auto& m : report.models) reports.emplace(m.name, std::move(m));
  return reports;
}

Outcome criterion5() {
  const auto& r = planted_reports();
  const auto& kg = r.at("kg-dqn");
  const auto& base = r.at("untrained-random");
  const double len = kg.avg_length.value_or(0.0);
  const bool ok = kg.stories == 100 && kg.goal_rate >= 0.90 && base.goal_rate <= 0.30 && len >= 3.0 && len <= 9.0;
  return {ok, "KG-DQN goal rate " + fmt(kg.goal_rate) + " (>= 0.90), untrained random " + fmt(base.goal_rate) +
                  " (<= 0.30), average length " + fmt(len) + " (3..9)"};
}

Outcome criterion6() {
  const auto& r = planted_reports();
  const double kg = r.at("kg-dqn").goal_rate, plain = r.at("dqn").goal_rate;
  return {kg >= plain - 0.02, "KG-DQN " + fmt(kg) + " vs plain DQN " + fmt(plain) + " (slack 0.02)"};
}

// ---------------------------------------------------------------------------
// 7. Fine-tuning effect.

Outcome criterion7() {
  auto& s = planted_setup();
  gw::RsftConfig config;
  config.top_k = 5;
  const gw::RsftInputs in{s.planted.index, s.table, s.clusters};
  const auto result = gw::train_rsft(s.lm, s.planted.corpus, in, config, 7);

  std::vector<const gw::Sentence*> pool;
  for (const auto& st : s.planted.corpus.stories()) {
    for (const auto& sentence : st.sentences) pool.push_back(&sentence);
  }
  gw::Rng pick(gw::derive_seed(1007, "acceptance/probe-queries"));
  std::vector<gw::Sentence> queries;
  for (std::size_t i = 0; i < 100; ++i) queries.push_back(*pool[pick.index(pool.size())]);
  const gw::SamplingParams sampling{config.max_tokens, config.top_k};
  const auto tuned = gw::probe_model(result.model, *s.lm, queries, in, sampling, 1007);
  const auto untuned = gw::probe_model(*s.lm, *s.lm, queries, in, sampling, 1007);
  const bool ok = tuned.mean_reward > untuned.mean_reward && tuned.mean_kl <= 2.0 * config.kl_target;
  return {ok, "mean shaped reward tuned " + fmt(tuned.mean_reward) + " vs untuned " + fmt(untuned.mean_reward) +
                  ", mean KL " + fmt(tuned.mean_kl) + " (<= " + fmt(2.0 * config.kl_target) + ")"};
}

// ---------------------------------------------------------------------------
// 8. Metric fixtures and the story length bound.

gw::GeneratedStory fixture(const std::string& seed, const std::vector<std::string>& continuations,
                           gw::TerminalCause cause) {
  gw::GeneratedStory s;
  s.seed = gw::Sentence::from_text(seed);
  for (const auto& c : continuations) {
    const auto sentence = gw::Sentence::from_text(c);
    s.continuations.push_back(gw::Candidate{sentence.text, sentence.tokens, "x", 0, ""});
  }
  s.terminal_cause = cause;
  return s;
}

Outcome criterion8() {
  using gw::TerminalCause;
  // Hand-computed: goals reached by stories 0, 2 and 5 with 2, 4 and 3
  // sentences; stories 1 and 2 repeat a 4-gram.
  const std::vector<gw::GeneratedStory> stories = {
      fixture("anna walked home .", {"she found a key ."}, TerminalCause::kGoalReached),
      fixture("the dog ran to the park .", {"the dog ran to the lake ."}, TerminalCause::kLengthLimit),
      fixture("he saw a bird .", {"it sang a song .", "he saw a bird again .", "he smiled ."},
              TerminalCause::kGoalReached),
      fixture("rain fell .", {}, TerminalCause::kNoValidCandidates),
      fixture("a cat slept .", {"a cat woke ."}, TerminalCause::kLengthLimit),
      fixture("she opened the door .", {"she walked in .", "she sat down ."}, TerminalCause::kGoalReached),
  };
  const double rate = gw::goal_rate(stories);
  const double rep = gw::rep4(stories);
  const auto len = gw::avg_length(stories);
  const bool metrics_ok = rate == 0.5 && rep == 2.0 / 6.0 && len && *len == 3.0;

  // Fuzzed episodes over a random-token model with the longest allowed
  // story.
  auto& s = planted_setup();
  std::size_t longest = 0, episodes = 0;
  const std::vector<gw::VerbClass> goals = {s.planted.goal, s.planted.chain[2], "never-0"};
  for (std::size_t i = 0; i < 1000; ++i) {
    gw::Rng rng(gw::derive_seed(1008, "acceptance/fuzz", i));
    const auto& story = s.planted.corpus.stories()[rng.index(s.planted.corpus.size())];
    const auto& seed = story.sentences[rng.index(story.sentences.size())];
    gw::GenerationConfig gen{1 + rng.index(4), gw::kMaxContinuations, {1 + rng.index(20), 1 + rng.index(50)}};
    const gw::GeneratorBundle bundle{"fuzz", s.lm.get(), nullptr, 0.0, false};
    const auto out = gw::generate_story(seed, goals[rng.index(goals.size())], bundle, s.planted.index, s.clusters,
                                        gen, rng);
    longest = std::max(longest, out.sentence_count());
    ++episodes;
  }
  return {metrics_ok && longest <= 16,
          "goal_rate " + fmt(rate) + " (0.5), rep4 " + fmt(rep) + " (1/3), avg_length " +
              (len ? fmt(*len) : std::string("absent")) + " (3), longest of " + std::to_string(episodes) +
              " fuzzed stories " + std::to_string(longest) + " (<= 16)"};
}

// ---------------------------------------------------------------------------
// 9. Remote protocol conformance.

Outcome criterion9() {
  httplib::Server server;
  std::string last_body, last_type;
  std::mutex mutex;
  server.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mutex);
      last_body = req.body;
      last_type = req.get_header_value("Content-Type");
    }
    res.set_content(R"({"candidates": ["she walked the forest .", "café \"quoted\" .", ""]})",
                    "application/json");
  });
  server.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(R"({"candidates": []})", "application/json");
  });
  server.Post("/malformed", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"candidates": "nope"})", "application/json");
  });
  server.Post("/status", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("busy", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  std::vector<std::string> failures;
  gw::RemoteOptions options;
  options.timeout = std::chrono::milliseconds(200);
  options.retries = 1;
  options.backoff = std::chrono::milliseconds(1);
  try {
    const auto got = gw::remote_generate(base + "/ok", "once upon a time \"x\"", 3, 20, 1000, options);
    const std::string want_body = R"({"prompt":"once upon a time \"x\"","n":3,"max_tokens":20,"top_k":1000})";
    if (last_body != want_body) failures.push_back("request body " + last_body);
    if (last_type != "application/json") failures.push_back("content type " + last_type);
    const std::vector<std::string> want = {"she walked the forest .", "caf\xc3\xa9 \"quoted\" .", ""};
    if (got.size() != 3) {
      failures.push_back("candidate count");
    } else {
      for (std::size_t i = 0; i < 3; ++i) {
        if (got[i].text != want[i]) failures.push_back("candidate " + std::to_string(i));
      }
    }
  } catch (const std::exception& e) {
    failures.push_back(std::string("round trip threw: ") + e.what());
  }
  auto expect_kind = [&](const std::string& path, gw::RemoteError::Kind kind, const char* label) {
    try {
      gw::remote_generate(base + path, "p", 1, 20, 1000, options);
      failures.push_back(std::string(label) + " not raised");
    } catch (const gw::RemoteError& e) {
      if (e.remote_kind() != kind) failures.push_back(std::string(label) + " misclassified: " + e.what());
      if (e.exit_code() != 4) failures.push_back(std::string(label) + " exit code");
    }
  };
  expect_kind("/slow", gw::RemoteError::Kind::kTimeout, "timeout");
  expect_kind("/malformed", gw::RemoteError::Kind::kMalformed, "malformed response");
  expect_kind("/status", gw::RemoteError::Kind::kStatus, "non-success status");
  server.stop();
  thread.join();
  std::string detail = failures.empty() ? "round trip exact; timeout, malformed and status errors distinct" : "";
  for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 10. Determinism of the full pipeline.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / ("goalweaver-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  gw::pipeline::synth((root / "data").string(), 3);
  std::vector<std::string> reports;
  for (int run = 0; run < 2; ++run) {
    gw::RunConfig c;
    c.seed = 42;
    c.output = (root / ("run" + std::to_string(run))).string();
    c.corpus_path = (root / "data" / "corpus.txt").string();
    c.index_path = (root / "data" / "index.tsv").string();
    c.goal = "discover-84";
    c.lm.order = 4;
    c.dqn.breadth = 5;
    c.dqn.epochs = 2;
    c.dqn.max_continuations = 8;
    c.dqn.top_k = 5;
    c.eval_breadth = 5;
    c.eval_max_continuations = 8;
    c.eval_top_k = 5;
    gw::pipeline::preprocess(c);
    gw::pipeline::rewards(c);
    gw::pipeline::train(c, "dqn");
    gw::pipeline::evaluate_models(c, "kg-dqn,ngram", "", 20);
    std::string all;
    for (const char* name : {"report.txt", "report.json", "stories.txt", "train.manifest", "rewards.tsv",
                             "kg-dqn/best.qnet"}) {
      all += std::string(name) + "\n" + slurp(fs::path(c.output) / name);
    }
    reports.push_back(std::move(all));
  }
  fs::remove_all(root);
  const bool same = reports[0] == reports[1];
  return {same, same ? "reports, manifests, rewards and checkpoints byte-identical across two runs"
                     : "runs differ"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  gw::log::set_threshold(gw::log::Level::kError);
  const std::vector<Criterion> criteria = {
      {1, "reward oracle equivalence", 1.0, criterion1},
      {2, "Jenks exactness", 5.0, criterion2},
      {3, "gradient checks", 30.0, criterion3},
      {4, "DQN tabular sanity", 60.0, criterion4},
      {5, "planted-structure end to end", 600.0, criterion5},
      {6, "ablation direction", 600.0, criterion6},
      {7, "fine-tuning effect", 300.0, criterion7},
      {8, "metric fixtures and length bound", 0.0, criterion8},
      {9, "remote protocol conformance", 0.0, criterion9},
      {10, "pipeline determinism", 0.0, criterion10},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = outcome.pass;
    std::string timing = fmt(seconds) + " s";
    if (c.budget_seconds > 0.0) {
      timing += " (budget " + fmt(c.budget_seconds) + " s)";
      if (seconds >= c.budget_seconds) pass = false;
    }
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " " << c.name << ": " << outcome.detail
              << "; " << timing << std::endl;
    failed += !pass;
  }
  return failed == 0 ? 0 : 1;
}

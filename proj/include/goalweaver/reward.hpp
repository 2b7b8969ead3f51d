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

// Goal-directed reward shaping over verb classes.
//
// For a goal class g and a candidate class v, with S(v,g) the stories that
// contain both:
//
//   r1(v) = log sum_{s in S(v,g)} (len(s) - dist_s(v,g))
//   r2(v) = log (count(v,g) / count(v))
//   R(v)  = r1(v) * r2(v) / |verbs|
//
// len(s) counts sentences, dist_s is the smallest sentence gap between any
// occurrence of v and any occurrence of g, count() counts stories and |verbs|
// is the number of distinct classes in the corpus. Logs are natural. Classes
// with empty S(v,g) have no reward and are left out of the table.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/jenks.hpp"
#include "goalweaver/log.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

namespace detail {

// Sorted sentence positions of each class within one story.
inline std::map<VerbClass, std::vector<std::size_t>> class_positions(const Story& story) {
  std::map<VerbClass, std::vector<std::size_t>> positions;
  for (std::size_t i = 0; i < story.sentences.size(); ++i) {
    if (const auto& vc = story.sentences[i].verb_class) positions[*vc].push_back(i);
  }
  return positions;
}

inline std::size_t min_gap(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    best = std::min(best, a[i] > b[j] ? a[i] - b[j] : b[j] - a[i]);
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return best;
}

}  // namespace detail

// Undefined (nullopt) when no story contains both v and g.
inline std::optional<double> compute_r1(const VerbClass& v, const VerbClass& g, const Corpus& corpus) {
  double total = 0.0;
  bool any = false;
  for (const auto& story : corpus.stories()) {
    const auto positions = detail::class_positions(story);
    auto pv = positions.find(v);
    auto pg = positions.find(g);
    if (pv == positions.end() || pg == positions.end()) continue;
    any = true;
    total += static_cast<double>(story.sentences.size() - detail::min_gap(pv->second, pg->second));
  }
  if (!any) return std::nullopt;
  return std::log(total);
}

// Undefined when v never occurs; -inf when v occurs but never with g.
inline std::optional<double> compute_r2(const VerbClass& v, const VerbClass& g, const Corpus& corpus) {
  const std::size_t count_v = corpus.stats().count(v);
  if (count_v == 0) return std::nullopt;
  return std::log(static_cast<double>(corpus.stats().count(v, g)) / static_cast<double>(count_v));
}

struct RewardEntry {
  double r1 = 0.0;
  double r2 = 0.0;
  double reward = 0.0;

  bool operator==(const RewardEntry&) const = default;
};

struct RewardTable {
  VerbClass goal;
  std::size_t verb_count = 0;
  std::map<VerbClass, RewardEntry> entries;
  // Observed classes that never co-occur with the goal.
  std::vector<VerbClass> omitted;

  std::optional<double> reward(const VerbClass& v) const {
    auto it = entries.find(v);
    if (it == entries.end()) return std::nullopt;
    return it->second.reward;
  }

  std::map<VerbClass, double> rewards() const {
    std::map<VerbClass, double> out;
    for (const auto& [v, e] : entries) out.emplace(v, e.reward);
    return out;
  }

  bool operator==(const RewardTable&) const = default;
};

inline RewardTable compute_reward_table(const Corpus& corpus, const VerbClass& goal) {
  const auto& stats = corpus.stats();
  if (stats.count(goal) == 0) throw DataError("goal never observed: " + goal);

  RewardTable table;
  table.goal = goal;
  table.verb_count = stats.distinct_classes();

  std::map<VerbClass, double> proximity;
  for (const auto& story : corpus.stories()) {
    const auto positions = detail::class_positions(story);
    auto pg = positions.find(goal);
    if (pg == positions.end()) continue;
    for (const auto& [v, pv] : positions) {
      proximity[v] += static_cast<double>(story.sentences.size() - detail::min_gap(pv, pg->second));
    }
  }
  const double scale = 1.0 / static_cast<double>(table.verb_count);
  for (const auto& [v, count_v] : stats.class_story_counts) {
    auto it = proximity.find(v);
    if (it == proximity.end()) {
      table.omitted.push_back(v);
      continue;
    }
    RewardEntry e;
    e.r1 = std::log(it->second);
    e.r2 = std::log(static_cast<double>(stats.count(v, goal)) / static_cast<double>(count_v));
    e.reward = scale * e.r1 * e.r2;
    table.entries.emplace(v, e);
  }
  return table;
}

// Verb classes grouped into k ordered clusters; cluster 0 has the lowest mean
// reward and the goal's cluster the highest.
struct ClusterAssignment {
  std::size_t k = 0;
  std::map<VerbClass, std::size_t> cluster_of;
  std::vector<double> means;
  std::optional<std::size_t> goal_cluster;

  std::optional<std::size_t> find(const VerbClass& v) const {
    auto it = cluster_of.find(v);
    if (it == cluster_of.end()) return std::nullopt;
    return it->second;
  }

  std::size_t at(const VerbClass& v) const {
    auto it = cluster_of.find(v);
    if (it == cluster_of.end()) throw DataError("verb class is not clustered: " + v);
    return it->second;
  }

  bool operator==(const ClusterAssignment&) const = default;
};

inline std::size_t count_distinct(const std::map<VerbClass, double>& values) {
  std::vector<double> v;
  for (const auto& [_, x] : values) v.push_back(x);
  return jenks::collapse(v).size();
}

// Exact natural-breaks clustering of per-class values. Equal values always
// share a cluster.
inline ClusterAssignment jenks_cluster(const std::map<VerbClass, double>& values, std::size_t k) {
  std::vector<double> raw;
  raw.reserve(values.size());
  for (const auto& [_, x] : values) {
    if (!std::isfinite(x)) throw DataError("jenks: non-finite value");
    raw.push_back(x);
  }
  const auto points = jenks::collapse(raw);
  const auto breaks = jenks::optimal_breaks(points, k);

  ClusterAssignment out;
  out.k = k;
  out.means.assign(k, 0.0);
  std::vector<double> weights(k, 0.0);
  auto cluster_of_value = [&](double x) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(points.begin(), points.end(), x,
                         [](const jenks::WeightedValue& p, double v) { return p.value < v; }) -
        points.begin());
    return static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), pos) - breaks.begin()) - 1;
  };
  for (const auto& [v, x] : values) {
    const std::size_t c = cluster_of_value(x);
    out.cluster_of.emplace(v, c);
    out.means[c] += x;
    weights[c] += 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) out.means[c] /= weights[c];
  return out;
}

// Smallest k whose goodness of variance fit reaches `threshold`.
inline std::size_t choose_cluster_count(const std::map<VerbClass, double>& values, double threshold = 0.8) {
  std::vector<double> raw;
  for (const auto& [_, x] : values) raw.push_back(x);
  const auto points = jenks::collapse(raw);
  if (points.empty()) throw DataError("cannot cluster an empty reward table");
  for (std::size_t k = 1; k <= points.size(); ++k) {
    const auto breaks = jenks::optimal_breaks(points, k);
    if (jenks::goodness_of_variance_fit(points, breaks) >= threshold) return k;
  }
  return points.size();
}

// Clusters a reward table. k = 0 selects the count automatically.
inline ClusterAssignment cluster_rewards(const RewardTable& table, std::size_t k = 0,
                                         double gvf_threshold = 0.8) {
  const auto values = table.rewards();
  if (values.empty()) throw DataError("reward table is empty");
  if (k == 0) k = choose_cluster_count(values, gvf_threshold);
  auto clusters = jenks_cluster(values, k);
  clusters.goal_cluster = clusters.at(table.goal);
  if (*clusters.goal_cluster != k - 1) {
    log::warning("goal class " + table.goal + " is not in the top reward cluster");
  }
  return clusters;
}

// Positive values move toward the goal.
inline long cluster_delta(const VerbClass& source, const VerbClass& target, const ClusterAssignment& clusters) {
  return static_cast<long>(clusters.at(target)) - static_cast<long>(clusters.at(source));
}

// Cluster index used as the source position; nullopt source sits below
// cluster 0 so the first hop into cluster 0 counts as +1.
inline long source_cluster_index(const std::optional<VerbClass>& source, const ClusterAssignment& clusters) {
  if (!source) return -1;
  auto c = clusters.find(*source);
  return c ? static_cast<long>(*c) : -1;
}

// Full reward for a move of zero or one cluster, reward / delta for longer
// forward jumps, nothing otherwise. Classes without a reward or cluster earn 0.
inline double shaped_reward_for_delta(double reward, long delta) {
  if (delta == 0 || delta == 1) return reward;
  if (delta > 1) return reward / static_cast<double>(delta);
  return 0.0;
}

inline double shaped_reward(const VerbClass& candidate, const std::optional<VerbClass>& source,
                            const RewardTable& table, const ClusterAssignment& clusters) {
  const auto reward = table.reward(candidate);
  const auto cluster = clusters.find(candidate);
  if (!reward || !cluster) {
    log::debug("no shaped reward for unclustered class " + candidate);
    return 0.0;
  }
  const long delta = static_cast<long>(*cluster) - source_cluster_index(source, clusters);
  return shaped_reward_for_delta(*reward, delta);
}

// Reward table and cluster file:
//
//   # goalweaver rewards v1
//   goal        <class>
//   verb_count  <n>
//   clusters    <k>
//   class       <class> <r1> <r2> <R> <cluster>
//   omitted     <class>
//
// Fields are tab separated; reals use shortest round-trip notation.
inline std::string format_rewards(const RewardTable& table, const ClusterAssignment& clusters) {
  std::string out = "# goalweaver rewards v1\n";
  out += "goal\t" + table.goal + "\n";
  out += "verb_count\t" + std::to_string(table.verb_count) + "\n";
  out += "clusters\t" + std::to_string(clusters.k) + "\n";
  for (const auto& [v, e] : table.entries) {
    out += "class\t" + v + "\t" + format_double(e.r1) + "\t" + format_double(e.r2) + "\t" +
           format_double(e.reward) + "\t" + std::to_string(clusters.at(v)) + "\n";
  }
  for (const auto& v : table.omitted) out += "omitted\t" + v + "\n";
  return out;
}

inline std::pair<RewardTable, ClusterAssignment> parse_rewards(std::string_view text,
                                                               const std::string& source = "<rewards>") {
  RewardTable table;
  ClusterAssignment clusters;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto f = split(line, '\t');
    auto need = [&](std::size_t n) {
      if (f.size() != n) throw ParseError(source, line_no, "expected " + std::to_string(n) + " fields");
    };
    auto integer = [&](std::string_view s) {
      auto v = parse_integer<std::size_t>(s);
      if (!v) throw ParseError(source, line_no, "bad integer '" + std::string(s) + "'");
      return *v;
    };
    auto real = [&](std::string_view s) {
      auto v = parse_double(s);
      if (!v) throw ParseError(source, line_no, "bad number '" + std::string(s) + "'");
      return *v;
    };
    if (f[0] == "goal") {
      need(2);
      table.goal = std::string(f[1]);
    } else if (f[0] == "verb_count") {
      need(2);
      table.verb_count = integer(f[1]);
    } else if (f[0] == "clusters") {
      need(2);
      clusters.k = integer(f[1]);
    } else if (f[0] == "class") {
      need(6);
      const VerbClass v(f[1]);
      table.entries[v] = RewardEntry{real(f[2]), real(f[3]), real(f[4])};
      clusters.cluster_of[v] = integer(f[5]);
    } else if (f[0] == "omitted") {
      need(2);
      table.omitted.emplace_back(f[1]);
    } else {
      throw ParseError(source, line_no, "unknown record '" + std::string(f[0]) + "'");
    }
  }
  if (table.goal.empty()) throw DataError(source + ": no goal record");
  clusters.means.assign(clusters.k, 0.0);
  std::vector<double> counts(clusters.k, 0.0);
  for (const auto& [v, c] : clusters.cluster_of) {
    if (c >= clusters.k) throw DataError(source + ": cluster index out of range for " + v);
    clusters.means[c] += table.entries.at(v).reward;
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < clusters.k; ++c) {
    if (counts[c] == 0.0) throw DataError(source + ": empty cluster " + std::to_string(c));
    clusters.means[c] /= counts[c];
  }
  clusters.goal_cluster = clusters.find(table.goal);
  return {std::move(table), std::move(clusters)};
}

}  // namespace goalweaver

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

// Exact 1-D natural-breaks classification (Fisher's dynamic program).

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "goalweaver/error.hpp"

namespace goalweaver::jenks {

// A weighted point; duplicates of one value collapse into a single point.
struct WeightedValue {
  double value = 0.0;
  double weight = 1.0;
};

// Sum of squared deviations from the mean, two-pass.
inline double ssd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double total = 0.0;
  for (double v : values) total += (v - mean) * (v - mean);
  return total;
}

// Collapses values into sorted distinct points weighted by multiplicity.
inline std::vector<WeightedValue> collapse(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<WeightedValue> points;
  for (double v : sorted) {
    if (!points.empty() && points.back().value == v) {
      points.back().weight += 1.0;
    } else {
      points.push_back({v, 1.0});
    }
  }
  return points;
}

// Splits sorted distinct points into k contiguous classes minimizing the total
// within-class sum of squared deviations. Returns the k start offsets into
// `points` (the first is always 0).
inline std::vector<std::size_t> optimal_breaks(std::span<const WeightedValue> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0) throw UsageError("jenks: cluster count must be at least 1");
  if (k > n) {
    throw DataError("jenks: " + std::to_string(k) + " clusters requested for " +
                    std::to_string(n) + " distinct values");
  }
  // Centre the data so prefix sums of squares stay well conditioned.
  double shift = 0.0, total_weight = 0.0;
  for (const auto& p : points) {
    shift += p.weight * p.value;
    total_weight += p.weight;
  }
  shift /= total_weight;

  std::vector<double> w(n + 1, 0.0), s(n + 1, 0.0), q(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = points[i].value - shift;
    w[i + 1] = w[i] + points[i].weight;
    s[i + 1] = s[i] + points[i].weight * x;
    q[i + 1] = q[i] + points[i].weight * x * x;
  }
  // Cost of the class holding points [a, b).
  auto cost = [&](std::size_t a, std::size_t b) {
    const double weight = w[b] - w[a];
    const double sum = s[b] - s[a];
    return std::max(0.0, (q[b] - q[a]) - sum * sum / weight);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[c][i]: minimal cost of splitting the first i points into c+1 classes.
  std::vector<std::vector<double>> best(k, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<std::size_t>> start(k, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) best[0][i] = cost(0, i);
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = c + 1; i <= n; ++i) {
      for (std::size_t j = c; j < i; ++j) {
        const double candidate = best[c - 1][j] + cost(j, i);
        if (candidate < best[c][i]) {
          best[c][i] = candidate;
          start[c][i] = j;
        }
      }
    }
  }
  std::vector<std::size_t> breaks(k, 0);
  std::size_t end = n;
  for (std::size_t c = k - 1; c > 0; --c) {
    breaks[c] = start[c][end];
    end = breaks[c];
  }
  return breaks;
}

// Goodness of variance fit: 1 - (within-class SSD / total SSD). Defined as 1
// when all values are equal.
inline double goodness_of_variance_fit(std::span<const WeightedValue> points,
                                       std::span<const std::size_t> breaks) {
  auto weighted_ssd = [&](std::size_t a, std::size_t b) {
    double weight = 0.0, mean = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      weight += points[i].weight;
      mean += points[i].weight * points[i].value;
    }
    mean /= weight;
    double total = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      total += points[i].weight * (points[i].value - mean) * (points[i].value - mean);
    }
    return total;
  };
  const double total = weighted_ssd(0, points.size());
  if (total <= 0.0) return 1.0;
  double within = 0.0;
  for (std::size_t c = 0; c < breaks.size(); ++c) {
    const std::size_t end = c + 1 < breaks.size() ? breaks[c + 1] : points.size();
    within += weighted_ssd(breaks[c], end);
  }
  return 1.0 - within / total;
}

}  // namespace goalweaver::jenks

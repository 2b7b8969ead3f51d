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

// One multi-head graph attention layer pooled to a single graph vector.
//
// For head h with projection W_h and attention vectors a_h = [src; dst]:
//
//   z_i      = W_h x_i
//   e_ij     = LeakyReLU(src . z_i + dst . z_j)      j in N(i), self included
//   alpha_ij = softmax_j(e_ij)
//   o_i      = ELU(sum_j alpha_ij z_j)
//
// Head outputs are concatenated per node and mean-pooled over nodes. An empty
// graph encodes to the zero vector.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "goalweaver/error.hpp"
#include "goalweaver/kg.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/rng.hpp"

namespace goalweaver {

struct GraphEncoderConfig {
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  double leaky_slope = 0.2;
};

struct GraphEncoderParams {
  double leaky_slope = 0.2;
  std::vector<Eigen::MatrixXd> projection;  // head_dim x input_dim, per head
  std::vector<Eigen::MatrixXd> attn_src;    // head_dim x 1, per head
  std::vector<Eigen::MatrixXd> attn_dst;    // head_dim x 1, per head

  std::size_t heads() const { return projection.size(); }
  std::size_t head_dim() const { return projection.empty() ? 0 : static_cast<std::size_t>(projection[0].rows()); }
  std::size_t input_dim() const { return projection.empty() ? 0 : static_cast<std::size_t>(projection[0].cols()); }
  std::size_t output_dim() const { return heads() * head_dim(); }

  static GraphEncoderParams init(const GraphEncoderConfig& config, std::size_t input_dim, Rng& rng) {
    GraphEncoderParams p;
    p.leaky_slope = config.leaky_slope;
    const auto hd = static_cast<Eigen::Index>(config.head_dim);
    const auto in = static_cast<Eigen::Index>(input_dim);
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(config.head_dim));
    auto fill = [&rng](Eigen::MatrixXd& m, double scale) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    };
    for (std::size_t h = 0; h < config.heads; ++h) {
      Eigen::MatrixXd w(hd, in), src(hd, 1), dst(hd, 1);
      fill(w, w_scale);
      fill(src, a_scale);
      fill(dst, a_scale);
      p.projection.push_back(std::move(w));
      p.attn_src.push_back(std::move(src));
      p.attn_dst.push_back(std::move(dst));
    }
    return p;
  }

  // Visits every trainable tensor with a stable name.
  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    for (std::size_t h = 0; h < self.projection.size(); ++h) {
      const std::string head = prefix + "head" + std::to_string(h) + "/";
      f(head + "projection", self.projection[h]);
      f(head + "attn_src", self.attn_src[h]);
      f(head + "attn_dst", self.attn_dst[h]);
    }
  }

  GraphEncoderParams zeros_like() const {
    GraphEncoderParams z = *this;
    visit(z, "", [](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
    return z;
  }
};

// Node features and neighbourhoods; node order is arbitrary.
struct GraphInput {
  Eigen::MatrixXd features;  // nodes x input_dim
  std::vector<std::vector<std::size_t>> neighbors;

  std::size_t nodes() const { return neighbors.size(); }
};

// Node feature = mean embedding of the entity's whitespace-separated words.
inline GraphInput make_graph_input(const KnowledgeGraph& graph, const ProposalModel& embedder) {
  GraphInput in;
  const auto names = graph.nodes();
  in.features.resize(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(embedder.embedding_dim()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::string> words;
    for (auto w : split(names[i], ' ')) {
      if (!w.empty()) words.emplace_back(w);
    }
    in.features.row(static_cast<Eigen::Index>(i)) = mean_embedding(embedder, words).transpose();
  }
  in.neighbors = graph.adjacency();
  return in;
}

struct GraphEncoding {
  Eigen::VectorXd output;
  // Per head: projected nodes (nodes x head_dim), pre-ELU aggregates, and for
  // each node the attention weights and pre-activation logits over its
  // neighbour list.
  std::vector<Eigen::MatrixXd> projected;
  std::vector<Eigen::MatrixXd> aggregated;
  std::vector<std::vector<std::vector<double>>> attention;
  std::vector<std::vector<std::vector<double>>> logits;
};

namespace detail {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace detail

inline GraphEncoding encode_graph(const GraphEncoderParams& params, const GraphInput& input) {
  GraphEncoding enc;
  const auto out_dim = static_cast<Eigen::Index>(params.output_dim());
  enc.output = Eigen::VectorXd::Zero(out_dim);
  const std::size_t n = input.nodes();
  if (n == 0) return enc;
  if (static_cast<std::size_t>(input.features.cols()) != params.input_dim()) {
    throw DataError("graph encoder expects input dimension " + std::to_string(params.input_dim()) + ", got " +
                    std::to_string(input.features.cols()));
  }
  const auto hd = static_cast<Eigen::Index>(params.head_dim());
  for (std::size_t h = 0; h < params.heads(); ++h) {
    Eigen::MatrixXd z = input.features * params.projection[h].transpose();  // n x hd
    const Eigen::VectorXd s = z * params.attn_src[h];
    const Eigen::VectorXd t = z * params.attn_dst[h];
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), hd);
    std::vector<std::vector<double>> alpha(n), pre(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = input.neighbors[i];
      pre[i].resize(nb.size());
      alpha[i].resize(nb.size());
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb.size(); ++k) {
        pre[i][k] = s[static_cast<Eigen::Index>(i)] + t[static_cast<Eigen::Index>(nb[k])];
        const double e = pre[i][k] > 0.0 ? pre[i][k] : params.leaky_slope * pre[i][k];
        alpha[i][k] = e;
        peak = std::max(peak, e);
      }
      double total = 0.0;
      for (auto& a : alpha[i]) {
        a = std::exp(a - peak);
        total += a;
      }
      for (std::size_t k = 0; k < nb.size(); ++k) {
        alpha[i][k] /= total;
        u.row(static_cast<Eigen::Index>(i)) += alpha[i][k] * z.row(static_cast<Eigen::Index>(nb[k]));
      }
    }
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index j = 0; j < hd; ++j) {
        enc.output[static_cast<Eigen::Index>(h) * hd + j] += detail::elu(u(i, j));
      }
    }
    enc.projected.push_back(std::move(z));
    enc.aggregated.push_back(std::move(u));
    enc.attention.push_back(std::move(alpha));
    enc.logits.push_back(std::move(pre));
  }
  enc.output /= static_cast<double>(n);
  return enc;
}

inline Eigen::VectorXd encode_graph(const KnowledgeGraph& graph, const ProposalModel& embedder,
                                    const GraphEncoderParams& params) {
  if (embedder.embedding_dim() != params.input_dim() && params.heads() > 0) {
    throw DataError("graph encoder input dimension does not match the embedder");
  }
  return encode_graph(params, make_graph_input(graph, embedder)).output;
}

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
inline void encode_graph_backward(const GraphEncoderParams& params, const GraphInput& input,
                                  const GraphEncoding& enc, const Eigen::VectorXd& d_output,
                                  GraphEncoderParams& grads) {
  const std::size_t n = input.nodes();
  if (n == 0) return;
  const auto hd = static_cast<Eigen::Index>(params.head_dim());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t h = 0; h < params.heads(); ++h) {
    const auto& z = enc.projected[h];
    const auto& u = enc.aggregated[h];
    const auto& alpha = enc.attention[h];
    const auto& pre = enc.logits[h];
    const Eigen::VectorXd d_head = d_output.segment(static_cast<Eigen::Index>(h) * hd, hd) * inv_n;

    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    Eigen::VectorXd ds = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd dt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      Eigen::VectorXd du(hd);
      for (Eigen::Index j = 0; j < hd; ++j) du[j] = d_head[j] * detail::elu_grad(u(ii, j));
      const auto& nb = input.neighbors[i];
      std::vector<double> d_alpha(nb.size());
      double weighted = 0.0;
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto jj = static_cast<Eigen::Index>(nb[k]);
        dz.row(jj) += alpha[i][k] * du.transpose();
        d_alpha[k] = du.dot(z.row(jj).transpose());
        weighted += alpha[i][k] * d_alpha[k];
      }
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const double d_e = alpha[i][k] * (d_alpha[k] - weighted);
        const double d_pre = d_e * (pre[i][k] > 0.0 ? 1.0 : params.leaky_slope);
        ds[ii] += d_pre;
        dt[static_cast<Eigen::Index>(nb[k])] += d_pre;
      }
    }
    grads.attn_src[h] += z.transpose() * ds;
    grads.attn_dst[h] += z.transpose() * dt;
    dz += ds * params.attn_src[h].transpose();
    dz += dt * params.attn_dst[h].transpose();
    grads.projection[h] += dz.transpose() * input.features;
  }
}

}  // namespace goalweaver

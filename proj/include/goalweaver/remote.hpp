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

// Client for an external generation service, so that any large language
// model can act as the frozen proposal model.
//
// Request:  POST <endpoint>, Content-Type: application/json,
//           {"prompt":"...","n":25,"max_tokens":20,"top_k":1000}
// Response: 2xx with {"candidates":["...", ...]} holding exactly n strings.

#pragma once

#include <chrono>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "goalweaver/error.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/log.hpp"

namespace goalweaver {

class RemoteError : public Error {
 public:
  enum class Kind { kTimeout, kTransport, kMalformed, kStatus };

  RemoteError(Kind kind, const std::string& what, int status = 0)
      : Error(ErrorKind::kService, what), kind_(kind), status_(status) {}

  Kind remote_kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

struct RemoteOptions {
  std::chrono::milliseconds timeout{10000};
  std::size_t retries = 2;  // extra attempts after the first
  std::chrono::milliseconds backoff{100};
};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;

  static Endpoint parse(const std::string& url) {
    static const std::regex pattern(R"(^(https?://[^/\s]+)(/\S*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) throw UsageError("invalid endpoint URL: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
  }
};

// Exact request body for the wire protocol; keys keep protocol order.
inline std::string remote_request_body(const std::string& prompt, std::size_t count, std::size_t max_tokens,
                                       std::size_t top_k) {
  nlohmann::ordered_json body;
  body["prompt"] = prompt;
  body["n"] = count;
  body["max_tokens"] = max_tokens;
  body["top_k"] = top_k;
  return body.dump();
}

inline std::vector<RawContinuation> parse_remote_response(const std::string& body, std::size_t count) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RemoteError(RemoteError::Kind::kMalformed, std::string("malformed response: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("candidates") || !parsed["candidates"].is_array()) {
    throw RemoteError(RemoteError::Kind::kMalformed, "malformed response: missing candidates array");
  }
  std::vector<RawContinuation> out;
  for (const auto& c : parsed["candidates"]) {
    if (!c.is_string()) throw RemoteError(RemoteError::Kind::kMalformed, "malformed response: non-string candidate");
    out.push_back({c.get<std::string>()});
  }
  if (out.size() != count) {
    throw RemoteError(RemoteError::Kind::kMalformed,
                      "candidate count mismatch: expected " + std::to_string(count) + ", got " +
                          std::to_string(out.size()));
  }
  return out;
}

// Transport failures, timeouts and 5xx responses are retried; malformed
// bodies and 4xx responses fail immediately.
inline std::vector<RawContinuation> remote_generate(const std::string& endpoint, const std::string& prompt,
                                                    std::size_t count, std::size_t max_tokens, std::size_t top_k,
                                                    const RemoteOptions& options = {}) {
  const auto target = Endpoint::parse(endpoint);
  const std::string body = remote_request_body(prompt, count, max_tokens, top_k);
  const auto seconds = options.timeout.count() / 1000;
  const auto micros = (options.timeout.count() % 1000) * 1000;

  for (std::size_t attempt = 0;; ++attempt) {
    httplib::Client client(target.origin);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(target.path, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - started;

    std::optional<RemoteError> failure;
    if (!result) {
      const bool timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                             (result.error() == httplib::Error::Read && elapsed >= options.timeout);
      failure.emplace(timed_out ? RemoteError::Kind::kTimeout : RemoteError::Kind::kTransport,
                      (timed_out ? "request timed out: " : "transport error: ") + httplib::to_string(result.error()) +
                          " (" + endpoint + ")");
    } else if (result->status < 200 || result->status >= 300) {
      failure.emplace(RemoteError::Kind::kStatus, "endpoint returned HTTP " + std::to_string(result->status),
                      result->status);
      if (result->status < 500) throw *failure;
    } else {
      return parse_remote_response(result->body, count);
    }
    if (attempt >= options.retries) throw *failure;
    log::warning(std::string(failure->what()) + "; retrying");
    std::this_thread::sleep_for(options.backoff * (attempt + 1));
  }
}

// A ProposalModel served remotely. Embeddings come from a local model since
// the wire protocol carries text only; scoring text is unsupported.
class RemoteModel : public ProposalModel {
 public:
  RemoteModel(std::string endpoint, const ProposalModel& embedder, RemoteOptions options = {})
      : endpoint_(std::move(endpoint)), embedder_(&embedder), options_(options) {
    Endpoint::parse(endpoint_);
  }

  std::vector<RawContinuation> generate(std::span<const std::string> prompt, std::size_t count,
                                        const SamplingParams& params, Rng&) const override {
    std::string text;
    for (std::size_t i = 0; i < prompt.size(); ++i) {
      if (i) text += ' ';
      text += prompt[i];
    }
    return remote_generate(endpoint_, text, count, params.max_tokens, params.top_k, options_);
  }

  std::size_t embedding_dim() const override { return embedder_->embedding_dim(); }
  Eigen::VectorXd token_embedding(std::string_view token) const override {
    return embedder_->token_embedding(token);
  }
  double sequence_logprob(std::span<const std::string>, std::span<const std::string>) const override {
    throw UsageError("remote models do not expose token probabilities");
  }
  bool supports_logprob() const override { return false; }

 private:
  std::string endpoint_;
  const ProposalModel* embedder_;
  RemoteOptions options_;
};

}  // namespace goalweaver

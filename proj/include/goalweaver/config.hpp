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

// Run configuration: one TOML-style file plus command-line overrides.
//
// Supported syntax is the flat subset experiments need:
//
//   # comment
//   seed = 7
//   [dqn]
//   epochs = 20
//   optimizer = "adam"
//
// Values are quoted strings, integers, reals or true/false. Every key is
// registered; an unknown section or key is a usage error, as is a value of
// the wrong type.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "goalweaver/corpus.hpp"
#include "goalweaver/error.hpp"
#include "goalweaver/lm.hpp"
#include "goalweaver/policy.hpp"
#include "goalweaver/remote.hpp"
#include "goalweaver/rsft.hpp"
#include "goalweaver/text.hpp"

namespace goalweaver {

inline constexpr const char* kConfigEnv = "GOALWEAVER_CONFIG";

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output = "run";

  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kLines;
  std::string index_path;
  double split = 0.7;

  VerbClass goal;
  std::size_t clusters = 0;  // 0 = smallest k reaching gvf_threshold
  double gvf_threshold = 0.8;

  std::string backend = "ngram";  // ngram | remote
  std::string endpoint;
  std::size_t timeout_ms = 10000;
  std::size_t retries = 2;
  NgramConfig lm;

  DqnConfig dqn;
  RsftConfig rsft;

  std::size_t eval_breadth = 25;
  std::size_t eval_max_continuations = 15;
  std::size_t eval_max_tokens = 20;
  std::size_t eval_top_k = 1000;

  GenerationConfig eval_generation() const {
    return GenerationConfig{eval_breadth, eval_max_continuations, SamplingParams{eval_max_tokens, eval_top_k}};
  }

  RemoteOptions remote_options() const {
    RemoteOptions o;
    o.timeout = std::chrono::milliseconds(timeout_ms);
    o.retries = retries;
    return o;
  }

  void validate() const {
    if (!(split > 0.0 && split < 1.0)) throw UsageError("corpus.split must lie in (0, 1)");
    if (!(gvf_threshold > 0.0 && gvf_threshold <= 1.0)) throw UsageError("rewards.gvf_threshold must lie in (0, 1]");
    if (backend != "ngram" && backend != "remote") {
      throw UsageError("lm.backend must be 'ngram' or 'remote', got '" + backend + "'");
    }
    if (backend == "remote") Endpoint::parse(endpoint);
    if (lm.order < 1) throw UsageError("lm.order must be at least 1");
    if (lm.smoothing < 0.0) throw UsageError("lm.smoothing must be non-negative");
    if (lm.embedding_dim < 1) throw UsageError("lm.embedding_dim must be positive");
    if (eval_breadth < 1) throw UsageError("eval.breadth must be positive");
    if (eval_max_continuations < 1 || eval_max_continuations > 15) {
      throw UsageError("eval.max_continuations must lie in [1, 15]");
    }
    if (eval_max_tokens < 1 || eval_top_k < 1) throw UsageError("eval.max_tokens and eval.top_k must be positive");
    if (output.empty()) throw UsageError("output directory must not be empty");
    dqn.validate();
    rsft.validate();
  }
};

// A parsed scalar with the line it came from.
struct ConfigValue {
  enum class Type { kString, kInteger, kReal, kBool };
  Type type = Type::kString;
  std::string text;  // unquoted string or the literal as written
  std::size_t line = 0;
};

namespace detail {

inline std::string unquote(std::string_view raw, const std::string& source, std::size_t line) {
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      if (i + 2 >= raw.size()) throw ParseError(source, line, "dangling escape in string");
      switch (raw[++i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: throw ParseError(source, line, "unknown escape in string");
      }
    } else if (c == '"') {
      throw ParseError(source, line, "unescaped quote inside string");
    } else {
      out += c;
    }
  }
  return out;
}

// Strips a trailing comment that is not inside a string.
inline std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

inline ConfigValue classify_value(std::string_view raw, const std::string& source, std::size_t line) {
  ConfigValue v;
  v.line = line;
  if (raw.empty()) throw ParseError(source, line, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ParseError(source, line, "unterminated string");
    v.type = ConfigValue::Type::kString;
    v.text = unquote(raw, source, line);
  } else if (raw == "true" || raw == "false") {
    v.type = ConfigValue::Type::kBool;
    v.text = std::string(raw);
  } else if (parse_integer<long long>(raw)) {
    v.type = ConfigValue::Type::kInteger;
    v.text = std::string(raw);
  } else if (parse_double(raw)) {
    v.type = ConfigValue::Type::kReal;
    v.text = std::string(raw);
  } else {
    throw ParseError(source, line, "cannot parse value '" + std::string(raw) + "'");
  }
  return v;
}

}  // namespace detail

// Parses "key = value" lines grouped by [section] headers into a map from
// "section.key" (or "key" before any header) to value.
inline std::map<std::string, ConfigValue> parse_config_text(std::string_view text,
                                                            const std::string& source = "<config>") {
  std::map<std::string, ConfigValue> out;
  std::string section;
  std::size_t line_no = 0;
  for (auto raw_line : split(text, '\n')) {
    ++line_no;
    auto line = trim(detail::strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ParseError(source, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.count(full)) throw ParseError(source, line_no, "duplicate key '" + full + "'");
    out.emplace(full, detail::classify_value(trim(line.substr(eq + 1)), source, line_no));
  }
  return out;
}

// Typed setters for every recognised key.
class ConfigSchema {
 public:
  using Setter = std::function<void(RunConfig&, const ConfigValue&, const std::string& source)>;

  static const ConfigSchema& instance() {
    static const ConfigSchema schema;
    return schema;
  }

  bool knows(const std::string& key) const { return setters_.count(key) > 0; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters_) out.push_back(k);
    return out;
  }

  void apply(RunConfig& config, const std::string& key, const ConfigValue& value, const std::string& source) const {
    auto it = setters_.find(key);
    if (it == setters_.end()) {
      throw UsageError(source + ":" + std::to_string(value.line) + ": unknown configuration key '" + key + "'");
    }
    it->second(config, value, source);
  }

 private:
  ConfigSchema() {
    auto& s = setters_;
    s["seed"] = uint64_setter([](RunConfig& c) -> std::uint64_t& { return c.seed; });
    s["output"] = string_setter([](RunConfig& c) -> std::string& { return c.output; });

    s["corpus.path"] = string_setter([](RunConfig& c) -> std::string& { return c.corpus_path; });
    s["corpus.index"] = string_setter([](RunConfig& c) -> std::string& { return c.index_path; });
    s["corpus.split"] = real_setter([](RunConfig& c) -> double& { return c.split; });
    s["corpus.format"] = [](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kString, "a string", source);
      c.corpus_format = parse_corpus_format(v.text);
    };

    s["rewards.goal"] = string_setter([](RunConfig& c) -> std::string& { return c.goal; });
    s["rewards.clusters"] = size_setter([](RunConfig& c) -> std::size_t& { return c.clusters; });
    s["rewards.gvf_threshold"] = real_setter([](RunConfig& c) -> double& { return c.gvf_threshold; });

    s["lm.backend"] = string_setter([](RunConfig& c) -> std::string& { return c.backend; });
    s["lm.endpoint"] = string_setter([](RunConfig& c) -> std::string& { return c.endpoint; });
    s["lm.timeout_ms"] = size_setter([](RunConfig& c) -> std::size_t& { return c.timeout_ms; });
    s["lm.retries"] = size_setter([](RunConfig& c) -> std::size_t& { return c.retries; });
    s["lm.order"] = size_setter([](RunConfig& c) -> std::size_t& { return c.lm.order; });
    s["lm.smoothing"] = real_setter([](RunConfig& c) -> double& { return c.lm.smoothing; });
    s["lm.embedding_dim"] = size_setter([](RunConfig& c) -> std::size_t& { return c.lm.embedding_dim; });

    s["network.mode"] = [](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kString, "a string", source);
      c.dqn.network.mode = parse_state_mode(v.text);
    };
    s["network.heads"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.network.encoder.heads; });
    s["network.head_dim"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.network.encoder.head_dim; });
    s["network.leaky_slope"] = real_setter([](RunConfig& c) -> double& { return c.dqn.network.encoder.leaky_slope; });
    s["network.action_dim"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.network.action_dim; });

    s["dqn.gamma"] = real_setter([](RunConfig& c) -> double& { return c.dqn.gamma; });
    s["dqn.learning_rate"] = real_setter([](RunConfig& c) -> double& { return c.dqn.learning_rate; });
    s["dqn.epsilon_start"] = real_setter([](RunConfig& c) -> double& { return c.dqn.epsilon_start; });
    s["dqn.epsilon_floor"] = real_setter([](RunConfig& c) -> double& { return c.dqn.epsilon_floor; });
    s["dqn.decay_divisor"] = real_setter([](RunConfig& c) -> double& { return c.dqn.decay_divisor; });
    s["dqn.batch"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.batch; });
    s["dqn.replay_capacity"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.replay_capacity; });
    s["dqn.breadth"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.breadth; });
    s["dqn.replay_update_period"] =
        size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.replay_update_period; });
    s["dqn.target_sync_period"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.target_sync_period; });
    s["dqn.epochs"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.epochs; });
    s["dqn.checkpoint_period"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.checkpoint_period; });
    s["dqn.replay_steps"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.replay_steps; });
    s["dqn.max_continuations"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.max_continuations; });
    s["dqn.max_tokens"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.max_tokens; });
    s["dqn.top_k"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.top_k; });
    s["dqn.selection_stories"] = size_setter([](RunConfig& c) -> std::size_t& { return c.dqn.selection_stories; });
    s["dqn.optimizer"] = [](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kString, "a string", source);
      c.dqn.optimizer = parse_optimizer(v.text);
    };

    s["rsft.kl_beta_init"] = real_setter([](RunConfig& c) -> double& { return c.rsft.kl_beta_init; });
    s["rsft.kl_target"] = real_setter([](RunConfig& c) -> double& { return c.rsft.kl_target; });
    s["rsft.inner_epochs"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.inner_epochs; });
    s["rsft.epochs"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.epochs; });
    s["rsft.batch"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.batch; });
    s["rsft.candidates_per_query"] =
        size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.candidates_per_query; });
    s["rsft.learning_rate"] = real_setter([](RunConfig& c) -> double& { return c.rsft.learning_rate; });
    s["rsft.checkpoint_period"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.checkpoint_period; });
    s["rsft.max_tokens"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.max_tokens; });
    s["rsft.top_k"] = size_setter([](RunConfig& c) -> std::size_t& { return c.rsft.top_k; });

    s["eval.breadth"] = size_setter([](RunConfig& c) -> std::size_t& { return c.eval_breadth; });
    s["eval.max_continuations"] = size_setter([](RunConfig& c) -> std::size_t& { return c.eval_max_continuations; });
    s["eval.max_tokens"] = size_setter([](RunConfig& c) -> std::size_t& { return c.eval_max_tokens; });
    s["eval.top_k"] = size_setter([](RunConfig& c) -> std::size_t& { return c.eval_top_k; });
  }

  static void expect(const ConfigValue& v, ConfigValue::Type type, const char* what, const std::string& source) {
    if (v.type != type) {
      throw UsageError(source + ":" + std::to_string(v.line) + ": expected " + what + ", got '" + v.text + "'");
    }
  }

  template <typename Ref>
  static Setter string_setter(Ref ref) {
    return [ref](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kString, "a string", source);
      ref(c) = v.text;
    };
  }

  template <typename Ref>
  static Setter size_setter(Ref ref) {
    return [ref](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kInteger, "a non-negative integer", source);
      auto n = parse_integer<std::size_t>(v.text);
      if (!n) throw UsageError(source + ":" + std::to_string(v.line) + ": expected a non-negative integer");
      ref(c) = *n;
    };
  }

  template <typename Ref>
  static Setter uint64_setter(Ref ref) {
    return [ref](RunConfig& c, const ConfigValue& v, const std::string& source) {
      expect(v, ConfigValue::Type::kInteger, "a non-negative integer", source);
      auto n = parse_integer<std::uint64_t>(v.text);
      if (!n) throw UsageError(source + ":" + std::to_string(v.line) + ": expected a non-negative integer");
      ref(c) = *n;
    };
  }

  template <typename Ref>
  static Setter real_setter(Ref ref) {
    return [ref](RunConfig& c, const ConfigValue& v, const std::string& source) {
      if (v.type != ConfigValue::Type::kReal && v.type != ConfigValue::Type::kInteger) {
        throw UsageError(source + ":" + std::to_string(v.line) + ": expected a number, got '" + v.text + "'");
      }
      ref(c) = *parse_double(v.text);
    };
  }

  std::map<std::string, Setter> setters_;
};

inline void apply_config_text(RunConfig& config, std::string_view text, const std::string& source = "<config>") {
  const auto& schema = ConfigSchema::instance();
  for (const auto& [key, value] : parse_config_text(text, source)) schema.apply(config, key, value, source);
}

// Applies one "section.key=value" override. Bare words count as strings so
// that --set corpus.format=blocks works without shell quoting.
inline void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw UsageError("override must look like key=value: " + std::string(assignment));
  const std::string key(trim(assignment.substr(0, eq)));
  const auto raw = trim(assignment.substr(eq + 1));
  ConfigValue value;
  try {
    value = detail::classify_value(raw, "--set", 1);
  } catch (const DataError&) {
    value = ConfigValue{ConfigValue::Type::kString, std::string(raw), 1};
  }
  ConfigSchema::instance().apply(config, key, value, "--set");
}

// Loads `path`, or the file named by GOALWEAVER_CONFIG when path is empty.
// With neither, returns the defaults.
inline RunConfig load_run_config(const std::string& path) {
  RunConfig config;
  std::string file = path;
  if (file.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env && *env) file = env;
  }
  if (file.empty()) return config;
  std::string text;
  try {
    text = read_file(file);
  } catch (const DataError&) {
    throw UsageError("cannot read configuration file: " + file);
  }
  try {
    apply_config_text(config, text, file);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  return config;
}

}  // namespace goalweaver

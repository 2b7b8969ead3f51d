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

#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace goalweaver::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3 };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {

struct State {
  std::mutex mutex;
  Level threshold = Level::kWarning;
  Sink sink;
};

inline State& state() {
  static State s;
  return s;
}

inline const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarning: return "warning";
    case Level::kError: return "error";
  }
  return "?";
}

}  // namespace detail

inline void set_threshold(Level level) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  s.threshold = level;
}

// Replaces the default stderr sink. Pass an empty function to restore it.
inline void set_sink(Sink sink) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  s.sink = std::move(sink);
}

inline void write(Level level, const std::string& message) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  if (s.sink) {
    s.sink(level, message);
    return;
  }
  if (level < s.threshold) return;
  std::clog << "[goalweaver " << detail::level_name(level) << "] " << message << '\n';
}

inline void debug(const std::string& m) { write(Level::kDebug, m); }
inline void info(const std::string& m) { write(Level::kInfo, m); }
inline void warning(const std::string& m) { write(Level::kWarning, m); }

// Captures messages for the lifetime of the guard; used by tests.
class ScopedCapture {
 public:
  ScopedCapture() {
    set_sink([this](Level level, const std::string& m) {
      if (level >= Level::kWarning) warnings_.push_back(m);
    });
  }
  ~ScopedCapture() { set_sink({}); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> warnings_;
};

}  // namespace goalweaver::log

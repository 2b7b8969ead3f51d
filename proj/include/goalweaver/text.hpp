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

// Text primitives shared by the corpus reader, the candidate cleaner and the
// triple extractor: tokenization, sentence segmentation, verb lemmatization
// and a few string helpers.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

namespace goalweaver {

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_terminator_token(std::string_view token) {
  return !token.empty() &&
         std::all_of(token.begin(), token.end(), [](char c) { return is_terminator(c); });
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80 || c == '_';
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Lowercases, trims and collapses internal whitespace runs to one space.
inline std::string normalize_phrase(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Whitespace and punctuation tokenization. A token is a run of word
// characters (apostrophes and hyphens allowed between word characters), a run
// of sentence terminators ("...", "?!"), or any other single punctuation
// character. Entity tags such as ORGANIZATION0 are ordinary word tokens.
inline std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    if (is_word_char(c)) {
      ++i;
      while (i < n) {
        if (is_word_char(text[i])) {
          ++i;
        } else if ((text[i] == '\'' || text[i] == '-') && i + 1 < n && is_word_char(text[i + 1])) {
          i += 2;
        } else {
          break;
        }
      }
    } else if (is_terminator(c)) {
      while (i < n && is_terminator(text[i])) ++i;
    } else {
      ++i;
    }
    spans.push_back({begin, i});
  }
  return spans;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (const auto& span : tokenize_spans(text)) {
    tokens.emplace_back(text.substr(span.begin, span.end - span.begin));
  }
  return tokens;
}

// Splits running text into sentences at terminator runs followed by
// whitespace or end of input. Each returned sentence keeps its terminator.
// Text after the last terminator becomes a final sentence.
inline std::vector<std::string> segment_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_terminator(text[j])) ++j;
    if (j == n || is_space(text[j])) {
      const auto sentence = trim(text.substr(start, j - start));
      if (!sentence.empty()) sentences.emplace_back(sentence);
      start = j;
    }
    i = j;
  }
  const auto tail = trim(text.substr(std::min(start, n)));
  if (!tail.empty()) sentences.emplace_back(tail);
  return sentences;
}

// Shortest round-trip decimal form of a double.
inline std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double value = 0.0;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
  if (result.ec != std::errc{} || result.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <typename Int>
std::optional<Int> parse_integer(std::string_view s) {
  s = trim(s);
  Int value{};
  const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
  if (result.ec != std::errc{} || result.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Rule-based verb lemmatizer: an irregular-form table plus inflectional
// suffix stripping (-s, -es, -ies, -ed, -ied, -ing) with consonant
// un-doubling and silent-e restoration. Because it cannot tell which of
// several plausible stems is right ("hoping" -> hop / hope), it produces an
// ordered candidate list and lets the caller pick the first known lemma.
class Lemmatizer {
 public:
  Lemmatizer() {
    for (const auto& [form, lemma] : kIrregular) irregular_.emplace(form, lemma);
  }

  std::vector<std::string> candidates(std::string_view word) const {
    const std::string w = to_lower(word);
    std::vector<std::string> out;
    auto add = [&out](std::string s) {
      if (s.size() >= 2 && std::find(out.begin(), out.end(), s) == out.end()) {
        out.push_back(std::move(s));
      }
    };
    if (w.empty() || !std::isalpha(static_cast<unsigned char>(w.front()))) return out;
    add(w);
    if (auto it = irregular_.find(w); it != irregular_.end()) add(std::string(it->second));

    auto ends_with = [&w](std::string_view suffix) {
      return w.size() > suffix.size() + 1 && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    auto stem_variants = [&](std::string stem) {
      // stopp -> stop, hop -> hope, hop
      if (stem.size() >= 3 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
          !is_vowel(stem.back()) && stem.back() != 'l' && stem.back() != 's' && stem.back() != 'z') {
        add(stem.substr(0, stem.size() - 1));
      }
      add(stem);
      add(stem + "e");
      if (stem.size() >= 3 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
        add(stem.substr(0, stem.size() - 1));
      }
    };

    if (ends_with("ies")) add(w.substr(0, w.size() - 3) + "y");
    if (ends_with("ied")) add(w.substr(0, w.size() - 3) + "y");
    if (ends_with("ying")) add(w.substr(0, w.size() - 4) + "ie");
    if (ends_with("ing")) stem_variants(w.substr(0, w.size() - 3));
    if (ends_with("ed")) {
      stem_variants(w.substr(0, w.size() - 2));
    }
    if (ends_with("es")) {
      add(w.substr(0, w.size() - 2));
      add(w.substr(0, w.size() - 1));
    } else if (ends_with("s") && !ends_with("ss")) {
      add(w.substr(0, w.size() - 1));
    }
    return out;
  }

  // First candidate accepted by `known`, else nullopt.
  template <typename Pred>
  std::optional<std::string> lemmatize(std::string_view word, Pred&& known) const {
    for (auto& c : candidates(word)) {
      if (known(c)) return c;
    }
    return std::nullopt;
  }

 private:
  static bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  }

  struct Entry {
    std::string_view form;
    std::string_view lemma;
  };

  // Irregular past and participle forms.
  static constexpr Entry kIrregular[] = {
      {"arose", "arise"},     {"arisen", "arise"},    {"ate", "eat"},
      {"eaten", "eat"},       {"awoke", "awake"},     {"awoken", "awake"},
      {"was", "be"},          {"were", "be"},         {"been", "be"},
      {"is", "be"},           {"am", "be"},           {"are", "be"},
      {"bore", "bear"},       {"borne", "bear"},      {"beat", "beat"},
      {"beaten", "beat"},     {"became", "become"},   {"began", "begin"},
      {"begun", "begin"},     {"bent", "bend"},       {"bet", "bet"},
      {"bit", "bite"},        {"bitten", "bite"},     {"bled", "bleed"},
      {"blew", "blow"},       {"blown", "blow"},      {"broke", "break"},
      {"broken", "break"},    {"brought", "bring"},   {"built", "build"},
      {"burnt", "burn"},      {"bought", "buy"},      {"caught", "catch"},
      {"chose", "choose"},    {"chosen", "choose"},   {"came", "come"},
      {"crept", "creep"},     {"dealt", "deal"},      {"dug", "dig"},
      {"did", "do"},          {"done", "do"},         {"does", "do"},
      {"drew", "draw"},       {"drawn", "draw"},      {"dreamt", "dream"},
      {"drank", "drink"},     {"drunk", "drink"},     {"drove", "drive"},
      {"driven", "drive"},    {"fell", "fall"},       {"fallen", "fall"},
      {"fed", "feed"},        {"felt", "feel"},       {"fought", "fight"},
      {"found", "find"},      {"fled", "flee"},       {"flew", "fly"},
      {"flown", "fly"},       {"forbade", "forbid"},  {"forbidden", "forbid"},
      {"forgot", "forget"},   {"forgotten", "forget"}, {"forgave", "forgive"},
      {"forgiven", "forgive"}, {"froze", "freeze"},   {"frozen", "freeze"},
      {"got", "get"},         {"gotten", "get"},      {"gave", "give"},
      {"given", "give"},      {"went", "go"},         {"gone", "go"},
      {"goes", "go"},         {"ground", "grind"},    {"grew", "grow"},
      {"grown", "grow"},      {"hung", "hang"},       {"had", "have"},
      {"has", "have"},        {"heard", "hear"},      {"hid", "hide"},
      {"hidden", "hide"},     {"hit", "hit"},         {"held", "hold"},
      {"hurt", "hurt"},       {"kept", "keep"},       {"knelt", "kneel"},
      {"knew", "know"},       {"known", "know"},      {"laid", "lay"},
      {"led", "lead"},        {"leapt", "leap"},      {"learnt", "learn"},
      {"left", "leave"},      {"lent", "lend"},       {"let", "let"},
      {"lay", "lie"},         {"lain", "lie"},        {"lit", "light"},
      {"lost", "lose"},       {"made", "make"},       {"meant", "mean"},
      {"met", "meet"},        {"paid", "pay"},        {"put", "put"},
      {"quit", "quit"},       {"read", "read"},       {"rode", "ride"},
      {"ridden", "ride"},     {"rang", "ring"},       {"rung", "ring"},
      {"rose", "rise"},       {"risen", "rise"},      {"ran", "run"},
      {"said", "say"},        {"saw", "see"},         {"seen", "see"},
      {"sought", "seek"},     {"sold", "sell"},       {"sent", "send"},
      {"set", "set"},         {"shook", "shake"},     {"shaken", "shake"},
      {"shone", "shine"},     {"shot", "shoot"},      {"showed", "show"},
      {"shown", "show"},      {"shrank", "shrink"},   {"shrunk", "shrink"},
      {"shut", "shut"},       {"sang", "sing"},       {"sung", "sing"},
      {"sank", "sink"},       {"sunk", "sink"},       {"sat", "sit"},
      {"slept", "sleep"},     {"slid", "slide"},      {"slung", "sling"},
      {"spoke", "speak"},     {"spoken", "speak"},    {"spent", "spend"},
      {"spun", "spin"},       {"spat", "spit"},       {"split", "split"},
      {"spread", "spread"},   {"sprang", "spring"},   {"sprung", "spring"},
      {"stood", "stand"},     {"stole", "steal"},     {"stolen", "steal"},
      {"stuck", "stick"},     {"stung", "sting"},     {"struck", "strike"},
      {"stricken", "strike"}, {"swore", "swear"},     {"sworn", "swear"},
      {"swept", "sweep"},     {"swam", "swim"},       {"swum", "swim"},
      {"swung", "swing"},     {"took", "take"},       {"taken", "take"},
      {"taught", "teach"},    {"tore", "tear"},       {"torn", "tear"},
      {"told", "tell"},       {"thought", "think"},   {"threw", "throw"},
      {"thrown", "throw"},    {"understood", "understand"}, {"woke", "wake"},
      {"woken", "wake"},      {"wore", "wear"},       {"worn", "wear"},
      {"wept", "weep"},       {"won", "win"},         {"wound", "wind"},
      {"wrote", "write"},     {"written", "write"},   {"withdrew", "withdraw"},
      {"withdrawn", "withdraw"}, {"overcame", "overcome"}, {"undertook", "undertake"},
      {"mistook", "mistake"}, {"mistaken", "mistake"}, {"foresaw", "foresee"},
      {"foreseen", "foresee"}, {"beheld", "behold"},  {"bound", "bind"},
      {"clung", "cling"},     {"fled", "flee"},       {"flung", "fling"},
      {"slew", "slay"},       {"slain", "slay"},      {"strove", "strive"},
      {"striven", "strive"},  {"wove", "weave"},      {"woven", "weave"},
      {"wrung", "wring"},     {"sped", "speed"},      {"spelt", "spell"},
      {"spilt", "spill"},     {"smelt", "smell"},     {"dove", "dive"},
  };

  std::unordered_map<std::string_view, std::string_view> irregular_;
};

}  // namespace goalweaver

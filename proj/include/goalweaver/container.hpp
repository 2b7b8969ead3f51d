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

// Binary checkpoint container shared by every model file.
//
// Layout, all integers little-endian:
//
//   magic    4 bytes  "GWCK"
//   version  u32      currently 1
//   kind     str      e.g. "ngram", "qnet", "tuned"
//   count    u32      number of entries
//   entries  sorted by name, each:
//     name   str
//     type   u8       1 f32, 2 f64, 3 u32, 4 u64, 5 text
//     rank   u32
//     dims   u64 x rank
//     data   row-major elements (text: raw bytes, rank 1, dims[0] = length)
//
// where str is a u32 byte length followed by UTF-8 bytes.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "goalweaver/error.hpp"

namespace goalweaver {

class Container {
 public:
  static constexpr char kMagic[4] = {'G', 'W', 'C', 'K'};
  static constexpr std::uint32_t kVersion = 1;

  template <typename T>
  struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<T> data;
  };

  using Entry = std::variant<Tensor<float>, Tensor<double>, Tensor<std::uint32_t>,
                             Tensor<std::uint64_t>, std::string>;

  Container() = default;
  explicit Container(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  template <typename T>
  void put(const std::string& name, std::vector<T> data, std::vector<std::uint64_t> dims = {}) {
    if (dims.empty()) dims = {data.size()};
    const auto expected = std::accumulate(dims.begin(), dims.end(), std::uint64_t{1}, std::multiplies<>());
    if (expected != data.size()) throw DataError("container: shape mismatch for " + name);
    entries_[name] = Tensor<T>{std::move(dims), std::move(data)};
  }

  void put_text(const std::string& name, std::string text) { entries_[name] = std::move(text); }

  template <typename T>
  const Tensor<T>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint entry missing: " + name);
    const auto* t = std::get_if<Tensor<T>>(&it->second);
    if (!t) throw DataError("checkpoint entry has unexpected type: " + name);
    return *t;
  }

  const std::string& get_text(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint entry missing: " + name);
    const auto* t = std::get_if<std::string>(&it->second);
    if (!t) throw DataError("checkpoint entry has unexpected type: " + name);
    return *t;
  }

  std::string serialize() const {
    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    put_str(out, kind_);
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, entry] : entries_) {
      put_str(out, name);
      std::visit([&out](const auto& e) { write_entry(out, e); }, entry);
    }
    return out;
  }

  static Container deserialize(std::string_view bytes) {
    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
      throw DataError("not a goalweaver checkpoint (bad magic)");
    }
    r.pos = 4;
    const auto version = r.u32();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Container c(r.str());
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = r.str();
      const auto type = r.u8();
      const auto rank = r.u32();
      std::vector<std::uint64_t> dims(rank);
      for (auto& d : dims) d = r.u64();
      std::uint64_t n = 1;
      for (auto d : dims) n *= d;
      switch (type) {
        case 1: c.entries_[name] = Tensor<float>{dims, r.array<float>(n)}; break;
        case 2: c.entries_[name] = Tensor<double>{dims, r.array<double>(n)}; break;
        case 3: c.entries_[name] = Tensor<std::uint32_t>{dims, r.array<std::uint32_t>(n)}; break;
        case 4: c.entries_[name] = Tensor<std::uint64_t>{dims, r.array<std::uint64_t>(n)}; break;
        case 5: c.entries_[name] = r.bytes_n(n); break;
        default: throw DataError("checkpoint entry with unknown type tag");
      }
    }
    if (r.pos != bytes.size()) throw DataError("trailing bytes in checkpoint");
    return c;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path);
  }

  static Container load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  template <typename T>
  static constexpr std::uint8_t type_tag() {
    if constexpr (std::is_same_v<T, float>) return 1;
    if constexpr (std::is_same_v<T, double>) return 2;
    if constexpr (std::is_same_v<T, std::uint32_t>) return 3;
    if constexpr (std::is_same_v<T, std::uint64_t>) return 4;
  }

  template <typename U>
  static void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
  static void put_u32(std::string& out, std::uint32_t v) { put_le(out, v); }
  static void put_u64(std::string& out, std::uint64_t v) { put_le(out, v); }
  static void put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
  }

  template <typename T>
  static void write_entry(std::string& out, const Tensor<T>& t) {
    out.push_back(static_cast<char>(type_tag<T>()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u64(out, d);
    for (T v : t.data) {
      if constexpr (std::is_floating_point_v<T>) {
        using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        put_le(out, std::bit_cast<Bits>(v));
      } else {
        put_le(out, v);
      }
    }
  }

  static void write_entry(std::string& out, const std::string& text) {
    out.push_back(5);
    put_u32(out, 1);
    put_u64(out, text.size());
    out.append(text);
  }

  struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
      if (bytes.size() - pos < n) throw DataError("truncated checkpoint");
    }
    template <typename U>
    U le() {
      need(sizeof(U));
      U v = 0;
      for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      }
      pos += sizeof(U);
      return v;
    }
    std::uint8_t u8() { return le<std::uint8_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    std::string bytes_n(std::uint64_t n) {
      need(n);
      std::string s(bytes.substr(pos, n));
      pos += n;
      return s;
    }
    std::string str() { return bytes_n(u32()); }
    template <typename T>
    std::vector<T> array(std::uint64_t n) {
      need(n * sizeof(T));
      std::vector<T> out(n);
      for (auto& v : out) {
        if constexpr (std::is_floating_point_v<T>) {
          using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
          v = std::bit_cast<T>(le<Bits>());
        } else {
          v = le<T>();
        }
      }
      return out;
    }
  };

  std::string kind_;
  std::map<std::string, Entry> entries_;
};

}  // namespace goalweaver

// Copyright 2026 The TypoLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TYPOLAB_TOKENIZER_HPP_
#define TYPOLAB_TOKENIZER_HPP_

// Byte-level BPE tokenizer.
//
// Layout of a vocabulary:
//   id 0            <bos>
//   ids 1..256      the single bytes 0x00..0xff (byte fallback, so every
//                   input is encodable)
//   ids 257..V-1    merged tokens, in merge order
//
// Canonical encoding splits text into chunks (an optional single leading
// space followed by a run of alphanumerics, a run of punctuation, or a run of
// whitespace) and then, within each chunk, repeatedly merges the adjacent pair
// whose concatenation has the lowest id in the vocabulary. Leftmost pair wins
// ties. A word therefore carries its preceding space, which makes "the
// position before the space" unambiguous for typo insertion.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "typolab/error.hpp"

namespace typolab {

using TokenId = int32_t;

inline constexpr TokenId kBosId = 0;
inline constexpr TokenId kFirstByteId = 1;
inline constexpr size_t kByteVocabSize = 257;
inline constexpr size_t kUnlimited = std::numeric_limits<size_t>::max();

constexpr TokenId byte_token(unsigned char b) {
  return kFirstByteId + static_cast<TokenId>(b);
}

struct Segmentation {
  std::vector<TokenId> tokens;
  std::string source;

  size_t size() const { return tokens.size(); }
  bool operator==(const Segmentation&) const = default;
};

namespace detail {

enum class CharClass { kSpace, kAlnum, kWhitespace, kPunct };

inline CharClass classify(unsigned char c) {
  if (c == ' ') return CharClass::kSpace;
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
      (c >= '0' && c <= '9') || c >= 0x80) {
    return CharClass::kAlnum;
  }
  if (c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
    return CharClass::kWhitespace;
  }
  return CharClass::kPunct;
}

}  // namespace detail

// Half-open byte ranges [first, second) of the pre-tokenizer chunks.
inline std::vector<std::pair<size_t, size_t>> split_chunks(
    std::string_view text) {
  using detail::CharClass;
  std::vector<std::pair<size_t, size_t>> chunks;
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    const size_t start = i;
    auto cls = detail::classify(static_cast<unsigned char>(text[i]));
    if (cls == CharClass::kSpace) {
      size_t j = i;
      while (j < n && text[j] == ' ') ++j;
      if (j == n) {
        chunks.emplace_back(start, n);
        break;
      }
      if (j - i > 1) {
        // Keep the last space for the following run.
        chunks.emplace_back(start, j - 1);
        i = j - 1;
        continue;
      }
      // Single space: attach it to the run that follows.
      i = j;
      cls = detail::classify(static_cast<unsigned char>(text[i]));
      if (cls == CharClass::kWhitespace) {
        chunks.emplace_back(start, i);
        continue;
      }
    }
    while (i < n && detail::classify(static_cast<unsigned char>(text[i])) == cls)
      ++i;
    chunks.emplace_back(start, i);
  }
  return chunks;
}

class Vocab {
 public:
  // <bos> plus the 256 byte tokens, no merges.
  static Vocab byte_level() {
    Vocab v;
    v.tokens_.reserve(kByteVocabSize);
    v.tokens_.emplace_back();
    for (int b = 0; b < 256; ++b) {
      v.tokens_.emplace_back(1, static_cast<char>(b));
    }
    v.rebuild_index();
    return v;
  }

  // Byte-level vocab followed by `merged` in order. Used to build small
  // hand-made vocabularies.
  static Vocab with_tokens(const std::vector<std::string>& merged) {
    Vocab v = byte_level();
    for (const auto& t : merged) {
      TYPOLAB_REQUIRE(t.size() >= 2, ErrorCode::kInvalidArgument,
                      "merged tokens must span at least two bytes");
      TYPOLAB_REQUIRE(!v.find(t).has_value(), ErrorCode::kInvalidArgument,
                      "duplicate token '" + t + "'");
      v.tokens_.push_back(t);
      v.index_.emplace(v.tokens_.back(), static_cast<TokenId>(v.tokens_.size() - 1));
      v.max_token_bytes_ = std::max(v.max_token_bytes_, t.size());
    }
    return v;
  }

  // Trains merges over the chunks of `texts` until the vocabulary holds
  // `size` tokens (or no pair occurs twice). Deterministic: ties on pair
  // frequency go to the lexicographically smallest (left, right) strings.
  static Vocab train(const std::vector<std::string>& texts, size_t size) {
    Vocab v = byte_level();
    std::map<std::string, int64_t> chunk_counts;
    for (const auto& text : texts) {
      for (auto [b, e] : split_chunks(text)) {
        ++chunk_counts[text.substr(b, e - b)];
      }
    }
    struct Word {
      std::vector<std::string> parts;
      int64_t count;
    };
    std::vector<Word> words;
    words.reserve(chunk_counts.size());
    for (const auto& [chunk, count] : chunk_counts) {
      Word w{{}, count};
      for (char c : chunk) w.parts.emplace_back(1, c);
      words.push_back(std::move(w));
    }

    while (v.tokens_.size() < size) {
      std::map<std::pair<std::string, std::string>, int64_t> pairs;
      for (const auto& w : words) {
        for (size_t i = 0; i + 1 < w.parts.size(); ++i) {
          pairs[{w.parts[i], w.parts[i + 1]}] += w.count;
        }
      }
      const std::pair<std::string, std::string>* best = nullptr;
      int64_t best_count = 1;
      for (const auto& [pair, count] : pairs) {
        if (count > best_count) {
          best = &pair;
          best_count = count;
        }
      }
      if (best == nullptr) break;
      const std::string left = best->first;
      const std::string right = best->second;
      const std::string merged = left + right;
      if (!v.find(merged)) {
        v.tokens_.push_back(merged);
        v.index_.emplace(merged, static_cast<TokenId>(v.tokens_.size() - 1));
        v.max_token_bytes_ = std::max(v.max_token_bytes_, merged.size());
      }
      for (auto& w : words) {
        std::vector<std::string> out;
        out.reserve(w.parts.size());
        for (size_t i = 0; i < w.parts.size(); ++i) {
          if (i + 1 < w.parts.size() && w.parts[i] == left &&
              w.parts[i + 1] == right) {
            out.push_back(merged);
            ++i;
          } else {
            out.push_back(std::move(w.parts[i]));
          }
        }
        w.parts = std::move(out);
      }
    }
    return v;
  }

  size_t size() const { return tokens_.size(); }
  bool is_special(TokenId id) const { return id == kBosId; }
  size_t max_token_bytes() const { return max_token_bytes_; }

  // Surface string of a token; empty for specials.
  const std::string& token(TokenId id) const {
    TYPOLAB_REQUIRE(id >= 0 && static_cast<size_t>(id) < tokens_.size(),
                    ErrorCode::kInvalidArgument,
                    "token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
  }

  std::optional<TokenId> find(std::string_view s) const {
    if (s.empty()) return std::nullopt;
    auto it = index_.find(std::string(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::string decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) out += token(id);
    return out;
  }

  Segmentation encode(std::string_view text, bool add_bos = false) const {
    TYPOLAB_REQUIRE(!text.empty(), ErrorCode::kInvalidArgument,
                    "cannot encode empty text");
    Segmentation seg;
    seg.source = std::string(text);
    if (add_bos) seg.tokens.push_back(kBosId);
    for (auto [b, e] : split_chunks(text)) {
      encode_chunk(text.substr(b, e - b), seg.tokens);
    }
    return seg;
  }

  // All segmentations of `text` into exactly `target_len` vocabulary tokens,
  // in lexicographic order of token lengths (shortest first token first), at
  // most `max_candidates` of them. Unlike encode(), candidates may cross chunk
  // boundaries; only decode(candidate) == text is required.
  std::vector<Segmentation> enumerate_segmentations(
      std::string_view text, size_t target_len,
      size_t max_candidates = kUnlimited) const {
    TYPOLAB_REQUIRE(!text.empty(), ErrorCode::kInvalidArgument,
                    "cannot segment empty text");
    const size_t canonical = encode(text).size();
    TYPOLAB_REQUIRE(target_len >= canonical, ErrorCode::kInvalidArgument,
                    "target length " + std::to_string(target_len) +
                        " below canonical length " + std::to_string(canonical));
    const size_t n = text.size();
    std::vector<Segmentation> out;
    if (target_len > n) {
      throw Error(ErrorCode::kEmptyResult,
                  "no segmentation of length " + std::to_string(target_len));
    }
    if (max_candidates == 0) return out;
    // edges[i] = (token id, byte length) of vocab tokens matching at i.
    std::vector<std::vector<std::pair<TokenId, size_t>>> edges(n);
    for (size_t i = 0; i < n; ++i) {
      const size_t max_len = std::min(max_token_bytes_, n - i);
      for (size_t len = 1; len <= max_len; ++len) {
        if (auto id = find(text.substr(i, len))) edges[i].emplace_back(*id, len);
      }
    }
    // feasible[i][k]: text[i:] splits into exactly k tokens.
    std::vector<std::vector<char>> feasible(n + 1,
                                            std::vector<char>(target_len + 1, 0));
    feasible[n][0] = 1;
    for (size_t i = n; i-- > 0;) {
      for (auto [id, len] : edges[i]) {
        for (size_t k = 1; k <= target_len; ++k) {
          if (feasible[i + len][k - 1]) feasible[i][k] = 1;
        }
      }
    }
    if (!feasible[0][target_len]) {
      throw Error(ErrorCode::kEmptyResult,
                  "no segmentation of length " + std::to_string(target_len));
    }
    std::vector<TokenId> path;
    path.reserve(target_len);
    enumerate_from(text, edges, feasible, 0, target_len, max_candidates, path,
                   out);
    return out;
  }

  // One token per line, line i holding token id i. Escapes: "\\" backslash,
  // "\s" space, "\xNN" for '<' and any byte outside 0x21..0x7e. A line of the
  // form "<name>" is a special token.
  std::string serialize() const {
    std::string out;
    for (size_t id = 0; id < tokens_.size(); ++id) {
      if (id == static_cast<size_t>(kBosId)) {
        out += "<bos>\n";
        continue;
      }
      out += escape(tokens_[id]);
      out += '\n';
    }
    return out;
  }

  static Vocab parse(std::string_view text) {
    Vocab v;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      if (line_no == 0) {
        if (line != "<bos>") {
          throw Error(ErrorCode::kParse, "vocab line 1: expected <bos>");
        }
        v.tokens_.emplace_back();
      } else {
        if (!line.empty() && line.front() == '<') {
          throw Error(ErrorCode::kParse, "vocab line " +
                                             std::to_string(line_no + 1) +
                                             ": unknown special token");
        }
        auto tok = unescape(line, line_no + 1);
        v.tokens_.push_back(std::move(tok));
      }
      ++line_no;
    }
    if (v.tokens_.size() < kByteVocabSize) {
      throw Error(ErrorCode::kParse, "vocab has fewer than 257 entries");
    }
    for (int b = 0; b < 256; ++b) {
      const auto& t = v.tokens_[static_cast<size_t>(byte_token(static_cast<unsigned char>(b)))];
      if (t.size() != 1 || static_cast<unsigned char>(t[0]) != b) {
        throw Error(ErrorCode::kParse, "vocab line " + std::to_string(b + 2) +
                                           ": byte tokens out of order");
      }
    }
    for (size_t i = kByteVocabSize; i < v.tokens_.size(); ++i) {
      if (v.tokens_[i].size() < 2) {
        throw Error(ErrorCode::kParse, "vocab line " + std::to_string(i + 1) +
                                           ": merged token shorter than 2 bytes");
      }
    }
    v.rebuild_index();
    if (v.index_.size() + 1 != v.tokens_.size()) {
      for (size_t i = 1; i < v.tokens_.size(); ++i) {
        if (v.index_.at(v.tokens_[i]) != static_cast<TokenId>(i)) {
          throw Error(ErrorCode::kParse, "vocab line " + std::to_string(i + 1) +
                                             ": duplicate token");
        }
      }
    }
    return v;
  }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void rebuild_index() {
    index_.clear();
    max_token_bytes_ = 1;
    for (size_t i = 1; i < tokens_.size(); ++i) {
      index_.emplace(tokens_[i], static_cast<TokenId>(i));
      max_token_bytes_ = std::max(max_token_bytes_, tokens_[i].size());
    }
  }

  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
    std::vector<std::string_view> parts;
    parts.reserve(chunk.size());
    for (size_t i = 0; i < chunk.size(); ++i) parts.push_back(chunk.substr(i, 1));
    while (parts.size() > 1) {
      TokenId best_id = std::numeric_limits<TokenId>::max();
      size_t best_at = 0;
      for (size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string_view joined(parts[i].data(),
                                      parts[i].size() + parts[i + 1].size());
        if (auto id = find(joined); id && *id < best_id) {
          best_id = *id;
          best_at = i;
        }
      }
      if (best_id == std::numeric_limits<TokenId>::max()) break;
      parts[best_at] = std::string_view(
          parts[best_at].data(), parts[best_at].size() + parts[best_at + 1].size());
      parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
    }
    for (auto p : parts) out.push_back(*find(p));
  }

  static void enumerate_from(
      std::string_view text,
      const std::vector<std::vector<std::pair<TokenId, size_t>>>& edges,
      const std::vector<std::vector<char>>& feasible, size_t at, size_t left,
      size_t max_candidates, std::vector<TokenId>& path,
      std::vector<Segmentation>& out) {
    if (out.size() >= max_candidates) return;
    if (at == text.size()) {
      if (left == 0) out.push_back({path, std::string(text)});
      return;
    }
    if (left == 0) return;
    for (auto [id, len] : edges[at]) {
      if (!feasible[at + len][left - 1]) continue;
      path.push_back(id);
      enumerate_from(text, edges, feasible, at + len, left - 1, max_candidates,
                     path, out);
      path.pop_back();
      if (out.size() >= max_candidates) return;
    }
  }

  static std::string escape(const std::string& tok) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (char ch : tok) {
      const auto c = static_cast<unsigned char>(ch);
      if (c == '\\') {
        out += "\\\\";
      } else if (c == ' ') {
        out += "\\s";
      } else if (c < 0x21 || c > 0x7e || c == '<') {
        out += "\\x";
        out += kHex[c >> 4];
        out += kHex[c & 0xf];
      } else {
        out += ch;
      }
    }
    return out;
  }

  static std::string unescape(std::string_view line, size_t line_no) {
    auto fail = [&](const std::string& what) {
      return Error(ErrorCode::kParse,
                   "vocab line " + std::to_string(line_no) + ": " + what);
    };
    auto hex = [&](char h) -> int {
      if (h >= '0' && h <= '9') return h - '0';
      if (h >= 'a' && h <= 'f') return h - 'a' + 10;
      if (h >= 'A' && h <= 'F') return h - 'A' + 10;
      throw fail("bad hex digit");
    };
    std::string out;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] != '\\') {
        out += line[i];
        continue;
      }
      if (i + 1 >= line.size()) throw fail("dangling escape");
      const char e = line[++i];
      if (e == '\\') {
        out += '\\';
      } else if (e == 's') {
        out += ' ';
      } else if (e == 'x') {
        if (i + 2 >= line.size()) throw fail("truncated \\x escape");
        out += static_cast<char>(hex(line[i + 1]) * 16 + hex(line[i + 2]));
        i += 2;
      } else {
        throw fail(std::string("unknown escape \\") + e);
      }
    }
    if (out.empty()) throw fail("empty token");
    return out;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  size_t max_token_bytes_ = 1;
};

// Byte offset in `seg.source` at which each token starts; one extra entry
// holds the total length.
inline std::vector<size_t> token_offsets(const Vocab& vocab,
                                         const std::vector<TokenId>& tokens) {
  std::vector<size_t> offsets;
  offsets.reserve(tokens.size() + 1);
  size_t at = 0;
  for (TokenId id : tokens) {
    offsets.push_back(at);
    at += vocab.token(id).size();
  }
  offsets.push_back(at);
  return offsets;
}

// Smallest half-open token range whose bytes cover [begin, end).
inline std::pair<size_t, size_t> tokens_covering(
    const std::vector<size_t>& offsets, size_t begin, size_t end) {
  const size_t n = offsets.size() - 1;
  size_t first = n;
  size_t last = 0;
  for (size_t i = 0; i < n; ++i) {
    if (offsets[i + 1] == offsets[i]) continue;  // specials
    if (offsets[i] < end && offsets[i + 1] > begin) {
      first = std::min(first, i);
      last = std::max(last, i + 1);
    }
  }
  if (first == n) return {0, 0};
  return {first, last};
}

}  // namespace typolab

#endif  // TYPOLAB_TOKENIZER_HPP_

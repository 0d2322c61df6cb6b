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

#ifndef TYPOLAB_CORPUS_HPP_
#define TYPOLAB_CORPUS_HPP_

// Word-identification task and the clean / typo / split triplet datasets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/error.hpp"
#include "typolab/hash.hpp"
#include "typolab/lexicon.hpp"
#include "typolab/model.hpp"
#include "typolab/parallel.hpp"
#include "typolab/random.hpp"
#include "typolab/tokenizer.hpp"

namespace typolab {

struct WordDef {
  std::string word;
  std::string definition;

  bool operator==(const WordDef&) const = default;
};

inline bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

inline std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) {
    return !(c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f');
  };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

// Parses TSV ("word<TAB>definition") or JSONL ({"word": .., "definition": ..})
// lines; both may be mixed. Blank lines are skipped, exact duplicates are
// dropped, order of first occurrence is kept.
inline std::vector<WordDef> parse_corpus(std::string_view text,
                                         std::string_view source = "corpus") {
  std::vector<WordDef> out;
  std::set<std::pair<std::string, std::string>> seen;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::kParse, std::string(source) + " line " +
                                          std::to_string(line_no) + ": " + why);
    };
    WordDef wd;
    if (trim(line).front() == '{') {
      try {
        const auto j = nlohmann::json::parse(line);
        wd.word = j.at("word").get<std::string>();
        wd.definition = j.at("definition").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("bad JSON record (") + e.what() + ")");
      }
    } else {
      const size_t tab = line.find('\t');
      if (tab == std::string_view::npos) throw fail("expected word<TAB>definition");
      wd.word = std::string(line.substr(0, tab));
      wd.definition = std::string(line.substr(tab + 1));
    }
    wd.word = std::string(trim(wd.word));
    wd.definition = std::string(trim(wd.definition));
    if (wd.word.empty() || wd.definition.empty()) throw fail("empty word or definition");
    if (has_whitespace(wd.word)) throw fail("word contains whitespace");
    if (seen.insert({wd.word, wd.definition}).second) out.push_back(std::move(wd));
    if (end == text.size()) break;
  }
  return out;
}

inline std::vector<WordDef> ingest(const std::string& path) {
  return parse_corpus(read_file(path), path);
}

inline std::string format_corpus_tsv(const std::vector<WordDef>& pairs) {
  std::string out;
  for (const auto& p : pairs) out += p.word + "\t" + p.definition + "\n";
  return out;
}

struct SynthOptions {
  size_t size = 1200;
  uint64_t seed = 7;
  int min_words = 16;
  int max_words = 20;
  double zipf_exponent = 0.9;
};

// WordNet-style pairs: pronounceable made-up answer words, definitions drawn
// Zipf-like from an everyday lexicon. Deterministic for fixed options.
inline std::vector<WordDef> synthesize_corpus(const SynthOptions& opt) {
  TYPOLAB_REQUIRE(opt.min_words >= 1 && opt.max_words >= opt.min_words,
                  ErrorCode::kInvalidArgument, "bad definition length range");
  Rng rng(derive_seed(opt.seed, 0xc0de, 0));
  std::vector<double> cumulative(kDefinitionLexicon.size());
  double total = 0.0;
  for (size_t r = 0; r < kDefinitionLexicon.size(); ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), opt.zipf_exponent);
    cumulative[r] = total;
  }
  auto draw_word = [&] {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return kDefinitionLexicon[std::min<size_t>(
        static_cast<size_t>(it - cumulative.begin()), kDefinitionLexicon.size() - 1)];
  };
  std::unordered_set<std::string> lexicon;
  for (auto w : kDefinitionLexicon) lexicon.emplace(w);
  std::unordered_set<std::string> words;
  std::unordered_set<std::string> definitions;
  std::vector<WordDef> out;
  out.reserve(opt.size);
  while (out.size() < opt.size) {
    std::string word;
    const size_t syllables = 2 + rng.below(2);
    for (size_t i = 0; i < syllables; ++i) {
      word += kAnswerSyllables[rng.below(kAnswerSyllables.size())];
    }
    word += kAnswerCodas[rng.below(kAnswerCodas.size())];
    if (lexicon.count(word) || words.count(word)) continue;
    const int len = opt.min_words +
                    static_cast<int>(rng.below(static_cast<uint64_t>(
                        opt.max_words - opt.min_words + 1)));
    std::string def;
    for (int i = 0; i < len; ++i) {
      if (i) def += ' ';
      def += draw_word();
    }
    if (definitions.count(def)) continue;
    words.insert(word);
    definitions.insert(def);
    out.push_back({std::move(word), std::move(def)});
  }
  return out;
}

// Prompt pattern with a "{definition}" and a later "{word}" placeholder. The
// text between them ends with the delimiter that precedes the answer; the
// first character after "{word}" closes the answer.
class PromptTemplate {
 public:
  static constexpr std::string_view kDefault =
      "Q. What is the word for \"{definition}\"? A. This is '{word}'";

  explicit PromptTemplate(std::string pattern = std::string(kDefault))
      : pattern_(std::move(pattern)) {
    const size_t d = pattern_.find("{definition}");
    const size_t w = pattern_.find("{word}");
    TYPOLAB_REQUIRE(d != std::string::npos && w != std::string::npos && d < w,
                    ErrorCode::kInvalidArgument,
                    "template needs {definition} followed by {word}");
    prefix_ = pattern_.substr(0, d);
    middle_ = pattern_.substr(d + 12, w - d - 12);
    suffix_ = pattern_.substr(w + 6);
    TYPOLAB_REQUIRE(!middle_.empty() && !suffix_.empty(),
                    ErrorCode::kInvalidArgument,
                    "template needs text between the placeholders and after {word}");
    TYPOLAB_REQUIRE(pattern_.find("{definition}", d + 1) == std::string::npos &&
                        pattern_.find("{word}", w + 1) == std::string::npos,
                    ErrorCode::kInvalidArgument, "placeholders must appear once");
  }

  const std::string& pattern() const { return pattern_; }
  const std::string& prefix() const { return prefix_; }
  const std::string& middle() const { return middle_; }
  const std::string& suffix() const { return suffix_; }
  char stop_char() const { return suffix_.front(); }

  std::string render(std::string_view definition, std::string_view word) const {
    return prefix_ + std::string(definition) + middle_ + std::string(word) + suffix_;
  }

 private:
  std::string pattern_;
  std::string prefix_, middle_, suffix_;
};

enum class Variant { kClean, kTypo, kSplit };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kClean: return "clean";
    case Variant::kTypo: return "typo";
    case Variant::kSplit: return "split";
  }
  return "?";
}

struct Span {
  size_t begin = 0;
  size_t end = 0;
  size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// One prompt+answer sequence. Token index 0 is <bos>.
struct PromptInstance {
  Variant variant = Variant::kClean;
  std::string answer;             // the expected word
  std::string text;               // full prompt including answer and closer
  Segmentation tokens;
  std::vector<Span> words;        // definition words, byte spans in `text`
  Span answer_chars;
  size_t answer_begin = 0;        // token range of the answer word
  size_t answer_end = 0;
  std::vector<size_t> marked;     // M_x, sorted

  std::vector<TokenId> prompt_tokens() const {
    return {tokens.tokens.begin(),
            tokens.tokens.begin() + static_cast<std::ptrdiff_t>(answer_begin)};
  }
  std::vector<TokenId> answer_tokens() const {
    return {tokens.tokens.begin() + static_cast<std::ptrdiff_t>(answer_begin),
            tokens.tokens.begin() + static_cast<std::ptrdiff_t>(answer_end)};
  }
  // Answer word plus the closing delimiter: what the model learns to emit.
  std::vector<TokenId> completion_tokens() const {
    return {tokens.tokens.begin() + static_cast<std::ptrdiff_t>(answer_begin),
            tokens.tokens.end()};
  }
  size_t delimiter_index() const { return answer_begin - 1; }
};

inline std::vector<Span> split_words(std::string_view text, size_t offset) {
  std::vector<Span> spans;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const size_t b = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > b) spans.push_back({offset + b, offset + i});
  }
  return spans;
}

namespace detail {

inline void locate_answer(const Vocab& vocab, PromptInstance& inst) {
  const auto offsets = token_offsets(vocab, inst.tokens.tokens);
  const auto [b, e] =
      tokens_covering(offsets, inst.answer_chars.begin, inst.answer_chars.end);
  TYPOLAB_REQUIRE(e > b && b >= 1, ErrorCode::kInvalidArgument,
                  "answer is not tokenized separately from the prompt");
  TYPOLAB_REQUIRE(offsets[b] == inst.answer_chars.begin,
                  ErrorCode::kInvalidArgument,
                  "answer shares a token with the preceding delimiter");
  inst.answer_begin = b;
  inst.answer_end = e;
}

}  // namespace detail

// Clean-variant instance for `definition` (which may already carry typos for
// the typo variant; the variant tag is set by the caller).
inline PromptInstance make_instance(const Vocab& vocab, const PromptTemplate& tmpl,
                                    std::string_view definition,
                                    std::string_view word,
                                    Variant variant = Variant::kClean) {
  PromptInstance inst;
  inst.variant = variant;
  inst.answer = std::string(word);
  inst.text = tmpl.render(definition, word);
  inst.tokens = vocab.encode(inst.text, /*add_bos=*/true);
  inst.words = split_words(definition, tmpl.prefix().size());
  const size_t answer_at = tmpl.prefix().size() + definition.size() + tmpl.middle().size();
  inst.answer_chars = {answer_at, answer_at + word.size()};
  detail::locate_answer(vocab, inst);
  return inst;
}

inline std::vector<size_t> word_token_range(const Vocab& vocab,
                                            const PromptInstance& inst,
                                            size_t word) {
  const auto offsets = token_offsets(vocab, inst.tokens.tokens);
  const auto [b, e] =
      tokens_covering(offsets, inst.words[word].begin, inst.words[word].end);
  std::vector<size_t> out;
  for (size_t i = b; i < e; ++i) out.push_back(i);
  return out;
}

// M_x: tokens of the selected words in this instance's own segmentation, the
// delimiter right before the answer, and the answer tokens.
inline std::vector<size_t> mark_positions(const Vocab& vocab,
                                          const PromptInstance& inst,
                                          const std::vector<size_t>& selected_words) {
  std::set<size_t> marked;
  const auto offsets = token_offsets(vocab, inst.tokens.tokens);
  for (size_t w : selected_words) {
    TYPOLAB_REQUIRE(w < inst.words.size(), ErrorCode::kInvalidArgument,
                    "selected word out of range");
    const auto [b, e] = tokens_covering(offsets, inst.words[w].begin, inst.words[w].end);
    for (size_t i = b; i < e; ++i) marked.insert(i);
  }
  marked.insert(inst.delimiter_index());
  for (size_t i = inst.answer_begin; i < inst.answer_end; ++i) marked.insert(i);
  return {marked.begin(), marked.end()};
}

// Greedy answer check: generate until the template's closing character, cut
// there, strip whitespace, compare case-sensitively.
struct AnswerChecker {
  const Vocab* vocab;
  const PromptTemplate* tmpl;
  size_t max_new = 16;

  std::string generate_answer(const Model<float>& model, const PromptInstance& inst,
                              const AblationMask& mask = {}) const {
    const auto prompt = inst.prompt_tokens();
    const size_t room = static_cast<size_t>(model.config().max_seq) - prompt.size();
    const char stop = tmpl->stop_char();
    const auto out = model.greedy_generate(
        prompt, std::min(max_new, room), mask, [&](TokenId id) {
          return vocab->token(id).find(stop) != std::string::npos;
        });
    std::string text = vocab->decode(
        {out.begin() + static_cast<std::ptrdiff_t>(prompt.size()), out.end()});
    const size_t cut = text.find(stop);
    if (cut != std::string::npos) text.resize(cut);
    return std::string(trim(text));
  }

  bool correct(const Model<float>& model, const PromptInstance& inst,
               const AblationMask& mask = {}) const {
    return generate_answer(model, inst, mask) == inst.answer;
  }
};

// Accuracy over instances, evaluated in parallel with an order-fixed count.
inline double greedy_accuracy(const Model<float>& model, const AnswerChecker& checker,
                              const std::vector<const PromptInstance*>& instances,
                              const AblationMask& mask = {}, int jobs = 1) {
  if (instances.empty()) return 0.0;
  std::vector<char> ok(instances.size(), 0);
  parallel_for(instances.size(), jobs, [&](size_t i) {
    ok[i] = checker.correct(model, *instances[i], mask) ? 1 : 0;
  });
  const auto hits = std::accumulate(ok.begin(), ok.end(), size_t{0});
  return static_cast<double>(hits) / static_cast<double>(instances.size());
}

struct AnswerableSelection {
  std::vector<size_t> indices;  // into the input pairs, best first
  std::vector<double> scores;   // answer log-likelihood, aligned with indices
  size_t answerable = 0;
  bool insufficient = false;    // fewer than k answerable pairs
};

// Keeps pairs the model answers correctly, then the k most likely by mean
// answer log-probability (ties: corpus order).
inline AnswerableSelection select_answerable(const std::vector<WordDef>& pairs,
                                             const Model<float>& model,
                                             const Vocab& vocab,
                                             const PromptTemplate& tmpl, size_t k,
                                             int jobs = 1) {
  const AnswerChecker checker{&vocab, &tmpl};
  std::vector<std::optional<double>> score(pairs.size());
  parallel_for(pairs.size(), jobs, [&](size_t i) {
    PromptInstance inst;
    try {
      inst = make_instance(vocab, tmpl, pairs[i].definition, pairs[i].word);
      if (inst.tokens.size() > static_cast<size_t>(model.config().max_seq)) return;
    } catch (const Error&) {
      return;
    }
    if (!checker.correct(model, inst)) return;
    score[i] = model.answer_logprob(inst.prompt_tokens(), inst.answer_tokens());
  });
  std::vector<size_t> order;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (score[i]) order.push_back(i);
  }
  AnswerableSelection sel;
  sel.answerable = order.size();
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return *score[a] > *score[b]; });
  sel.insufficient = order.size() < k;
  if (order.size() > k) order.resize(k);
  sel.indices = order;
  for (size_t i : order) sel.scores.push_back(*score[i]);
  return sel;
}

enum class WordAggregate { kMax, kSum };

struct WordImportance {
  size_t word = 0;
  double score = 0.0;
};

// Definition words by descending gradient importance. A word's score
// aggregates the gradient norms of its tokens; earlier words win ties.
inline std::vector<WordImportance> importance_rank(
    const Vocab& vocab, const PromptInstance& clean, const Model<float>& model,
    WordAggregate aggregate = WordAggregate::kMax) {
  TYPOLAB_REQUIRE(clean.variant == Variant::kClean, ErrorCode::kInvalidArgument,
                  "importance is computed on clean instances");
  const auto norms = model.input_gradients(clean.prompt_tokens(), clean.answer_tokens());
  std::vector<WordImportance> out;
  for (size_t w = 0; w < clean.words.size(); ++w) {
    double s = 0.0;
    for (size_t tok : word_token_range(vocab, clean, w)) {
      const double g = static_cast<double>(norms[tok]);
      s = aggregate == WordAggregate::kMax ? std::max(s, g) : s + g;
    }
    out.push_back({w, s});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const WordImportance& a, const WordImportance& b) {
                     return a.score > b.score;
                   });
  return out;
}

inline constexpr std::string_view kDefaultAlphabet =
    "abcdefghijklmnopqrstuvwxyz0123456789";

struct Insertion {
  size_t word = 0;      // definition word index
  size_t offset = 0;    // inserted before this byte of the word, < word length
  char ch = 0;
  size_t text_pos = 0;  // byte position of the new character in the typo text

  bool operator==(const Insertion&) const = default;
};

// Applies insertions (at most one per word) to a clean instance's definition
// and re-tokenizes. Fills in each insertion's text_pos.
inline PromptInstance apply_insertions(const Vocab& vocab, const PromptTemplate& tmpl,
                                       const PromptInstance& clean,
                                       std::vector<Insertion>& insertions) {
  const size_t def_begin = tmpl.prefix().size();
  const size_t def_end = clean.answer_chars.begin - tmpl.middle().size();
  std::string definition = clean.text.substr(def_begin, def_end - def_begin);
  std::vector<size_t> order(insertions.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return insertions[a].word < insertions[b].word;
  });
  size_t shift = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    auto& ins = insertions[order[k]];
    TYPOLAB_REQUIRE(ins.word < clean.words.size(), ErrorCode::kInvalidArgument,
                    "insertion word out of range");
    TYPOLAB_REQUIRE(k == 0 || insertions[order[k - 1]].word != ins.word,
                    ErrorCode::kInvalidArgument, "one insertion per word");
    const Span w = clean.words[ins.word];
    TYPOLAB_REQUIRE(ins.offset < w.size(), ErrorCode::kInvalidArgument,
                    "insertion would land before a space");
    const size_t at = w.begin - def_begin + ins.offset + shift;
    definition.insert(definition.begin() + static_cast<std::ptrdiff_t>(at), ins.ch);
    ins.text_pos = def_begin + at;
    ++shift;
  }
  PromptInstance typo = make_instance(vocab, tmpl, definition, clean.answer, Variant::kTypo);
  return typo;
}

struct TypoInjection {
  PromptInstance instance;
  std::vector<size_t> selected_words;  // in importance order
  std::vector<Insertion> insertions;   // aligned with selected_words
};

// Inserts one random character from `alphabet` into each of the top-t ranked
// words, at a uniform in-word position that is never directly before a space.
inline TypoInjection inject_typos(const Vocab& vocab, const PromptTemplate& tmpl,
                                  const PromptInstance& clean,
                                  const std::vector<WordImportance>& ranked, size_t t,
                                  Rng& rng,
                                  std::string_view alphabet = kDefaultAlphabet) {
  TYPOLAB_REQUIRE(!alphabet.empty(), ErrorCode::kInvalidArgument, "empty alphabet");
  if (ranked.size() < t) {
    throw Error(ErrorCode::kNotEnoughWords,
                "definition has " + std::to_string(ranked.size()) +
                    " words, need " + std::to_string(t));
  }
  TypoInjection out;
  for (size_t i = 0; i < t; ++i) {
    const size_t w = ranked[i].word;
    Insertion ins;
    ins.word = w;
    ins.ch = alphabet[rng.below(alphabet.size())];
    ins.offset = rng.below(clean.words[w].size());
    out.selected_words.push_back(w);
    out.insertions.push_back(ins);
  }
  if (t == 0) {
    out.instance = clean;
    out.instance.variant = Variant::kTypo;
    return out;
  }
  out.instance = apply_insertions(vocab, tmpl, clean, out.insertions);
  return out;
}

namespace detail {

// Lengths k for which `text` has some segmentation into exactly k tokens.
inline std::vector<char> feasible_lengths(const Vocab& vocab, std::string_view text) {
  const size_t n = text.size();
  std::vector<std::vector<char>> f(n + 1, std::vector<char>(n + 1, 0));
  f[n][0] = 1;
  for (size_t i = n; i-- > 0;) {
    for (size_t len = 1; len <= std::min(vocab.max_token_bytes(), n - i); ++len) {
      if (!vocab.find(text.substr(i, len))) continue;
      for (size_t k = 1; k <= n; ++k) {
        if (f[i + len][k - 1]) f[i][k] = 1;
      }
    }
  }
  return f[0];
}

}  // namespace detail

// Re-segments the selected words of the clean text so the split instance has
// as many tokens as the typo instance. Each word gets the token count of its
// typo counterpart when possible; otherwise the closest feasible assignment
// with the right total is used. Candidates are enumerated and one is chosen
// uniformly.
inline PromptInstance make_split(const Vocab& vocab, const PromptInstance& clean,
                                 const PromptInstance& typo,
                                 const std::vector<size_t>& selected_words, Rng& rng,
                                 size_t max_candidates = 4096) {
  PromptInstance split = clean;
  split.variant = Variant::kSplit;
  if (typo.tokens.size() == clean.tokens.size()) return split;

  std::vector<size_t> words = selected_words;
  std::sort(words.begin(), words.end());
  const auto clean_offsets = token_offsets(vocab, clean.tokens.tokens);
  const auto typo_offsets = token_offsets(vocab, typo.tokens.tokens);
  struct Piece {
    size_t begin, end;  // clean token range
    std::string text;
    size_t wanted;      // typo token count for this word
    std::vector<char> feasible;
  };
  std::vector<Piece> pieces;
  size_t covered = 0;
  for (size_t w : words) {
    const auto [b, e] =
        tokens_covering(clean_offsets, clean.words[w].begin, clean.words[w].end);
    const auto [tb, te] =
        tokens_covering(typo_offsets, typo.words[w].begin, typo.words[w].end);
    Piece p{b, e, clean.text.substr(clean_offsets[b], clean_offsets[e] - clean_offsets[b]),
            te - tb, {}};
    p.feasible = detail::feasible_lengths(vocab, p.text);
    covered += e - b;
    pieces.push_back(std::move(p));
  }
  const size_t fixed = clean.tokens.size() - covered;
  if (typo.tokens.size() < fixed) {
    throw Error(ErrorCode::kNoMatchingSegmentation, "typo instance too short");
  }
  const size_t total = typo.tokens.size() - fixed;

  // best[i][s]: minimal deviation from the wanted lengths using pieces i.. to
  // cover s tokens; choice[i][s] the length picked for piece i.
  constexpr size_t kInf = std::numeric_limits<size_t>::max();
  const size_t np = pieces.size();
  std::vector<std::vector<size_t>> best(np + 1, std::vector<size_t>(total + 1, kInf));
  std::vector<std::vector<size_t>> choice(np, std::vector<size_t>(total + 1, 0));
  best[np][0] = 0;
  for (size_t i = np; i-- > 0;) {
    const auto& p = pieces[i];
    const size_t canonical = p.end - p.begin;
    for (size_t s = 0; s <= total; ++s) {
      for (size_t k = canonical; k < p.feasible.size() && k <= s; ++k) {
        if (!p.feasible[k] || best[i + 1][s - k] == kInf) continue;
        const size_t dev = (k > p.wanted ? k - p.wanted : p.wanted - k) + best[i + 1][s - k];
        if (dev < best[i][s]) {
          best[i][s] = dev;
          choice[i][s] = k;
        }
      }
    }
  }
  if (best[0][total] == kInf) {
    throw Error(ErrorCode::kNoMatchingSegmentation,
                "no re-segmentation of the selected words reaches " +
                    std::to_string(typo.tokens.size()) + " tokens");
  }
  std::vector<size_t> lengths(np);
  for (size_t i = 0, s = total; i < np; ++i) {
    lengths[i] = choice[i][s];
    s -= lengths[i];
  }
  std::vector<TokenId> out;
  size_t at = 0;
  for (size_t i = 0; i < np; ++i) {
    const auto& p = pieces[i];
    out.insert(out.end(), clean.tokens.tokens.begin() + static_cast<std::ptrdiff_t>(at),
               clean.tokens.tokens.begin() + static_cast<std::ptrdiff_t>(p.begin));
    const auto candidates = vocab.enumerate_segmentations(p.text, lengths[i], max_candidates);
    const auto& pick = candidates[rng.below(candidates.size())];
    out.insert(out.end(), pick.tokens.begin(), pick.tokens.end());
    at = p.end;
  }
  out.insert(out.end(), clean.tokens.tokens.begin() + static_cast<std::ptrdiff_t>(at),
             clean.tokens.tokens.end());
  split.tokens.tokens = std::move(out);
  detail::locate_answer(vocab, split);
  return split;
}

struct TripletSample {
  size_t index = 0;    // position in the clean set
  uint64_t seed = 0;   // per-sample seed
  std::string word;
  std::string definition;
  std::vector<size_t> selected_words;
  std::vector<Insertion> insertions;
  PromptInstance clean, typo, split;
};

struct DroppedSample {
  size_t index = 0;
  std::string word;
  std::string reason;
};

struct TripletOptions {
  size_t t = 1;
  uint64_t seed = 0;
  std::string alphabet = std::string(kDefaultAlphabet);
  WordAggregate aggregate = WordAggregate::kMax;
  size_t max_candidates = 4096;
  int jobs = 1;
};

struct TripletDataset {
  size_t t = 0;
  uint64_t seed = 0;
  std::string alphabet;
  std::string template_pattern;
  std::vector<TripletSample> samples;
  std::vector<DroppedSample> dropped;
};

inline constexpr uint64_t kTypoStream = 0x7790;

// Per-sample seed; depends on (global seed, sample index) only, so every t
// shares the same draw schedule.
inline uint64_t sample_seed(uint64_t seed, size_t index) {
  return derive_seed(seed, kTypoStream, index);
}

// Builds one triplet from a clean pair. Throws NotEnoughWords or
// NoMatchingSegmentation.
inline TripletSample build_triplet(const Vocab& vocab, const PromptTemplate& tmpl,
                                   const WordDef& pair, size_t index,
                                   const std::vector<WordImportance>& ranked,
                                   const TripletOptions& opt) {
  TripletSample s;
  s.index = index;
  s.seed = sample_seed(opt.seed, index);
  s.word = pair.word;
  s.definition = pair.definition;
  s.clean = make_instance(vocab, tmpl, pair.definition, pair.word);
  Rng typo_rng(derive_seed(s.seed, 1, 0));
  Rng split_rng(derive_seed(s.seed, 2, 0));
  auto inj = inject_typos(vocab, tmpl, s.clean, ranked, opt.t, typo_rng, opt.alphabet);
  s.selected_words = inj.selected_words;
  s.insertions = inj.insertions;
  s.typo = std::move(inj.instance);
  s.split = make_split(vocab, s.clean, s.typo, s.selected_words, split_rng,
                       opt.max_candidates);
  s.clean.marked = mark_positions(vocab, s.clean, s.selected_words);
  s.typo.marked = mark_positions(vocab, s.typo, s.selected_words);
  s.split.marked = mark_positions(vocab, s.split, s.selected_words);
  return s;
}

// Importance rankings for a clean set; independent of t and seed.
inline std::vector<std::vector<WordImportance>> rank_all(
    const Vocab& vocab, const PromptTemplate& tmpl, const std::vector<WordDef>& pairs,
    const Model<float>& model, WordAggregate aggregate = WordAggregate::kMax,
    int jobs = 1) {
  std::vector<std::vector<WordImportance>> out(pairs.size());
  parallel_for(pairs.size(), jobs, [&](size_t i) {
    const auto inst = make_instance(vocab, tmpl, pairs[i].definition, pairs[i].word);
    out[i] = importance_rank(vocab, inst, model, aggregate);
  });
  return out;
}

inline TripletDataset build_triplets(
    const Vocab& vocab, const PromptTemplate& tmpl, const std::vector<WordDef>& pairs,
    const Model<float>& model, const TripletOptions& opt,
    const std::vector<std::vector<WordImportance>>* rankings = nullptr) {
  std::vector<std::vector<WordImportance>> own;
  if (rankings == nullptr) {
    own = rank_all(vocab, tmpl, pairs, model, opt.aggregate, opt.jobs);
    rankings = &own;
  }
  TYPOLAB_REQUIRE(rankings->size() == pairs.size(), ErrorCode::kShapeMismatch,
                  "one ranking per pair required");
  std::vector<std::optional<TripletSample>> built(pairs.size());
  std::vector<std::string> why(pairs.size());
  parallel_for(pairs.size(), opt.jobs, [&](size_t i) {
    try {
      built[i] = build_triplet(vocab, tmpl, pairs[i], i, (*rankings)[i], opt);
      const size_t longest = std::max(built[i]->typo.tokens.size(), built[i]->split.tokens.size());
      if (longest > static_cast<size_t>(model.config().max_seq)) {
        built[i].reset();
        why[i] = "SequenceTooLong: typo instance exceeds max_seq";
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotEnoughWords &&
          e.code() != ErrorCode::kNoMatchingSegmentation) {
        throw;
      }
      why[i] = e.what();
    }
  });
  TripletDataset ds;
  ds.t = opt.t;
  ds.seed = opt.seed;
  ds.alphabet = opt.alphabet;
  ds.template_pattern = tmpl.pattern();
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (built[i]) {
      ds.samples.push_back(std::move(*built[i]));
    } else {
      ds.dropped.push_back({i, pairs[i].word, why[i]});
    }
  }
  return ds;
}

// Definition with 1..max_typos random single-character insertions, for
// training-time augmentation.
inline std::string random_typo_definition(std::string_view definition, Rng& rng,
                                          size_t max_typos,
                                          std::string_view alphabet = kDefaultAlphabet) {
  auto words = split_words(definition, 0);
  if (words.empty() || max_typos == 0) return std::string(definition);
  const size_t count = 1 + rng.below(std::min(max_typos, words.size()));
  auto picks = rng.sample_without_replacement(words.size(), count);
  std::sort(picks.begin(), picks.end());
  std::string out(definition);
  size_t shift = 0;
  for (size_t w : picks) {
    const char ch = alphabet[rng.below(alphabet.size())];
    const size_t at = words[w].begin + rng.below(words[w].size()) + shift;
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), ch);
    ++shift;
  }
  return out;
}

// Prompt tokens of `inst` with 1..max_words definition words re-segmented
// into one or two extra tokens (text unchanged), for training-time
// augmentation.
inline std::vector<TokenId> random_resegmentation(const Vocab& vocab,
                                                  const PromptInstance& inst, Rng& rng,
                                                  size_t max_words) {
  auto tokens = inst.prompt_tokens();
  if (inst.words.empty() || max_words == 0) return tokens;
  const size_t count = 1 + rng.below(std::min(max_words, inst.words.size()));
  auto picks = rng.sample_without_replacement(inst.words.size(), count);
  std::sort(picks.begin(), picks.end(), std::greater<>());
  const auto offsets = token_offsets(vocab, inst.tokens.tokens);
  for (size_t w : picks) {
    const auto [b, e] = tokens_covering(offsets, inst.words[w].begin, inst.words[w].end);
    const std::string piece = inst.text.substr(offsets[b], offsets[e] - offsets[b]);
    const size_t canonical = e - b;
    if (piece.size() <= canonical) continue;
    const size_t target = canonical + 1 + rng.below(std::min<size_t>(2, piece.size() - canonical));
    std::vector<Segmentation> cands;
    try {
      cands = vocab.enumerate_segmentations(piece, target, 64);
    } catch (const Error&) {
      continue;
    }
    const auto& pick = cands[rng.below(cands.size())].tokens;
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(b),
                 tokens.begin() + static_cast<std::ptrdiff_t>(e));
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(b), pick.begin(), pick.end());
  }
  return tokens;
}

}  // namespace typolab

#endif  // TYPOLAB_CORPUS_HPP_

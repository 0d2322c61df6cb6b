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

#include "typolab/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "typolab/dataset_io.hpp"

namespace typolab {
namespace {

using testing::TinyWorld;

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("typolab_corpus_" + name);
  std::ofstream(path) << body;
  return path.string();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

TEST(CorpusTest, ParsesTsvAndJsonlAndDropsDuplicates) {
  const auto pairs = parse_corpus(
      "cygnet\ta young swan\n"
      "{\"word\": \"kitten\", \"definition\": \"a young cat\"}\n"
      "\n"
      "cygnet\ta young swan\r\n"
      "cygnet\t  a baby swan  \n");
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0], (WordDef{"cygnet", "a young swan"}));
  EXPECT_EQ(pairs[1], (WordDef{"kitten", "a young cat"}));
  EXPECT_EQ(pairs[2], (WordDef{"cygnet", "a baby swan"}));
}

TEST(CorpusTest, ParseErrorsNameSourceAndLine) {
  for (const std::string bad : {"ok\tfine\nno tab here\n", "ok\tfine\n{\"word\": 3}\n",
                                "ok\tfine\ntwo words\tdef\n", "ok\tfine\nword\t \n"}) {
    try {
      parse_corpus(bad, "in.tsv");
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParse);
      EXPECT_NE(std::string(e.what()).find("in.tsv line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(CorpusTest, IngestReadsFilesAndReportsMissingOnes) {
  const auto path = write_temp("ok.tsv", "cygnet\ta young swan\n");
  EXPECT_EQ(ingest(path).size(), 1u);
  EXPECT_EQ(code_of([] { ingest("/nonexistent/corpus.tsv"); }), ErrorCode::kIo);
  EXPECT_EQ(parse_corpus(format_corpus_tsv(ingest(path))), ingest(path));
}

TEST(CorpusTest, SynthesizedCorpusIsDeterministicAndWellFormed) {
  SynthOptions so;
  so.size = 200;
  const auto a = synthesize_corpus(so);
  EXPECT_EQ(a, synthesize_corpus(so));
  ASSERT_EQ(a.size(), 200u);
  std::set<std::string> words;
  for (const auto& p : a) {
    EXPECT_FALSE(has_whitespace(p.word));
    const auto n = split_words(p.definition, 0).size();
    EXPECT_GE(n, so.min_words);
    EXPECT_LE(n, so.max_words);
    words.insert(p.word);
  }
  EXPECT_EQ(words.size(), a.size());
  so.seed = 8;
  EXPECT_NE(a, synthesize_corpus(so));
}

TEST(PromptTemplateTest, RendersAndValidates) {
  const PromptTemplate t;
  EXPECT_EQ(t.render("a young swan", "cygnet"),
            "Q. What is the word for \"a young swan\"? A. This is 'cygnet'");
  EXPECT_EQ(t.stop_char(), '\'');
  EXPECT_EQ(code_of([] { PromptTemplate("{word} then {definition}"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { PromptTemplate("{definition}{word}."); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { PromptTemplate("{definition}: {word}"); }),
            ErrorCode::kInvalidArgument);
}

// Vocabulary in which " young" is one token that can also be cut as
// " y"+"oung" or " you"+"ng", and "neg" exists for the typo.
Vocab swan_vocab() {
  return Vocab::with_tokens({"ou", " y", " you", "ng", "oung", " young", "ne", "neg", " s", "an",
                             "wan", " swan"});
}

std::vector<std::string> pieces(const Vocab& v, const std::vector<TokenId>& ids, size_t b,
                                size_t e) {
  std::vector<std::string> out;
  for (size_t i = b; i < e; ++i) out.push_back(v.token(ids[i]));
  return out;
}

TEST(TypoTest, InsertsCharactersInsideWords) {
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  std::vector<Insertion> ins{{2, 1, '5', 0}, {1, 4, 'e', 0}};
  const auto typo = apply_insertions(v, t, clean, ins);
  EXPECT_EQ(typo.text, t.render("a youneg s5wan", "cygnet"));
  EXPECT_EQ(typo.text[ins[1].text_pos], 'e');
  EXPECT_EQ(typo.text[ins[0].text_pos], '5');
  EXPECT_EQ(typo.variant, Variant::kTypo);
  EXPECT_EQ(typo.text.size(), clean.text.size() + 2);
  EXPECT_EQ(v.decode(typo.answer_tokens()), "cygnet");
  // Offsets at or past the word end would put the character before a space.
  std::vector<Insertion> bad{{1, 5, 'x', 0}};
  EXPECT_EQ(code_of([&] { apply_insertions(v, t, clean, bad); }), ErrorCode::kInvalidArgument);
  std::vector<Insertion> twice{{1, 0, 'x', 0}, {1, 2, 'y', 0}};
  EXPECT_EQ(code_of([&] { apply_insertions(v, t, clean, twice); }), ErrorCode::kInvalidArgument);
}

TEST(TypoTest, InjectionProperties) {
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const std::string def = "the quick brown fox jumps over a lazy dog";
  const auto clean = make_instance(v, t, def, "pangram");
  std::vector<WordImportance> ranked;
  for (size_t w : {3, 0, 6, 8, 1, 2, 4, 5, 7}) ranked.push_back({w, 1.0});
  std::map<char, int> seen_chars;
  for (uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const size_t tt = 1 + seed % 4;
    const auto inj = inject_typos(v, t, clean, ranked, tt, rng);
    const auto& typo = inj.instance;
    ASSERT_EQ(typo.text.size(), clean.text.size() + tt);
    ASSERT_EQ(inj.selected_words.size(), tt);
    for (size_t i = 0; i < tt; ++i) EXPECT_EQ(inj.selected_words[i], ranked[i].word);
    for (const auto& ins : inj.insertions) {
      const char c = typo.text[ins.text_pos];
      EXPECT_EQ(c, ins.ch);
      EXPECT_NE(kDefaultAlphabet.find(c), std::string_view::npos);
      // Never directly before a space or the closing quote of the definition.
      EXPECT_NE(typo.text[ins.text_pos + 1], ' ');
      EXPECT_NE(typo.text[ins.text_pos + 1], '"');
      ++seen_chars[c];
    }
    // Removing the inserted characters restores the clean text.
    std::string restored = typo.text;
    std::vector<size_t> pos;
    for (const auto& ins : inj.insertions) pos.push_back(ins.text_pos);
    std::sort(pos.rbegin(), pos.rend());
    for (size_t p : pos) restored.erase(p, 1);
    EXPECT_EQ(restored, clean.text);
  }
  EXPECT_GT(seen_chars.size(), 30u);
}

TEST(TypoTest, ZeroTyposLeavesTheInstanceUnchanged) {
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  Rng rng(1);
  const auto inj = inject_typos(v, t, clean, {{1, 1.0}, {0, 0.5}, {2, 0.1}}, 0, rng);
  EXPECT_EQ(inj.instance.text, clean.text);
  EXPECT_EQ(inj.instance.tokens, clean.tokens);
  EXPECT_TRUE(inj.insertions.empty());
  EXPECT_EQ(code_of([&] { inject_typos(v, t, clean, {{1, 1.0}}, 2, rng); }),
            ErrorCode::kNotEnoughWords);
}

TEST(SplitTest, MatchesTypoLengthWithUniformChoice) {
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  std::vector<Insertion> ins{{1, 4, 'e', 0}};
  const auto typo = apply_insertions(v, t, clean, ins);
  const auto tw = word_token_range(v, typo, 1);
  ASSERT_EQ(pieces(v, typo.tokens.tokens, tw.front(), tw.back() + 1),
            (std::vector<std::string>{" you", "neg"}));
  ASSERT_EQ(word_token_range(v, clean, 1).size(), 1u);
  std::map<std::vector<std::string>, int> counts;
  const int runs = 2000;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng(static_cast<uint64_t>(seed));
    const auto split = make_split(v, clean, typo, {1}, rng);
    ASSERT_EQ(split.tokens.size(), typo.tokens.size());
    ASSERT_EQ(v.decode(split.tokens.tokens), clean.text);
    EXPECT_EQ(split.variant, Variant::kSplit);
    EXPECT_EQ(split.answer_tokens(), clean.answer_tokens());
    const auto sw = word_token_range(v, split, 1);
    ++counts[pieces(v, split.tokens.tokens, sw.front(), sw.back() + 1)];
  }
  // Two-token cuts of " young": " y"+"oung", " you"+"ng", " "+... is not a
  // cut because "young" is not a token.
  ASSERT_EQ(counts.size(), 2u);
  EXPECT_TRUE(counts.count({" y", "oung"}));
  EXPECT_TRUE(counts.count({" you", "ng"}));
  for (const auto& [k, n] : counts) EXPECT_NEAR(n, runs / 2, 4 * std::sqrt(runs / 4.0));
}

TEST(SplitTest, EqualLengthTypoKeepsCleanSegmentation) {
  const Vocab v = Vocab::byte_level();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  // Byte-level: a typo adds exactly one token, so compare against a typo
  // instance of the same length built by substitution.
  PromptInstance same = make_instance(v, t, "a yuung swan", "cygnet", Variant::kTypo);
  Rng rng(3);
  const auto split = make_split(v, clean, same, {1}, rng);
  EXPECT_EQ(split.tokens, clean.tokens);
}

TEST(SplitTest, ImpossibleLengthIsReported) {
  const Vocab v = Vocab::byte_level();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  std::vector<Insertion> ins{{1, 2, 'x', 0}};
  const auto typo = apply_insertions(v, t, clean, ins);
  Rng rng(1);
  // Every word is already one token per byte, so nothing can grow.
  EXPECT_EQ(code_of([&] { make_split(v, clean, typo, {1}, rng); }),
            ErrorCode::kNoMatchingSegmentation);
}

TEST(MarkTest, MarksSelectedWordsDelimiterAndAnswer) {
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const auto clean = make_instance(v, t, "a young swan", "cygnet");
  const auto marked = mark_positions(v, clean, {1});
  std::vector<std::string> got;
  for (size_t i : marked) {
    ASSERT_LT(i, clean.tokens.size());
    got.push_back(v.token(clean.tokens.tokens[i]));
  }
  std::vector<std::string> answer;
  for (TokenId id : clean.answer_tokens()) answer.push_back(v.token(id));
  auto expected = [&](std::vector<std::string> head) {
    head.insert(head.end(), answer.begin(), answer.end());
    return head;
  };
  EXPECT_EQ(got, expected({" young", "'"}));
  std::vector<Insertion> ins{{1, 4, 'e', 0}};
  const auto typo = apply_insertions(v, t, clean, ins);
  got.clear();
  for (size_t i : mark_positions(v, typo, {1})) got.push_back(v.token(typo.tokens.tokens[i]));
  EXPECT_EQ(got, expected({" you", "neg", "'"}));
}

TEST(AnswerableTest, KeepsCorrectPairsSortedByLikelihood) {
  const auto& w = TinyWorld::get();
  const auto checker = w.checker();
  const auto sel = select_answerable(w.pairs, *w.model, w.vocab, w.tmpl, 30);
  // Independent oracle: check and score every pair, then fully sort.
  std::vector<std::pair<double, size_t>> oracle;
  for (size_t i = 0; i < w.pairs.size(); ++i) {
    const auto inst = make_instance(w.vocab, w.tmpl, w.pairs[i].definition, w.pairs[i].word);
    const auto out = w.model->greedy_generate(inst.prompt_tokens(), inst.completion_tokens().size());
    const std::vector<TokenId> gen(out.begin() + static_cast<std::ptrdiff_t>(inst.answer_begin),
                                   out.end());
    if (gen != inst.completion_tokens()) continue;
    oracle.push_back({-w.model->answer_logprob(inst.prompt_tokens(), inst.answer_tokens()), i});
  }
  std::sort(oracle.begin(), oracle.end());
  ASSERT_GE(oracle.size(), 30u);
  EXPECT_EQ(sel.answerable, oracle.size());
  EXPECT_FALSE(sel.insufficient);
  ASSERT_EQ(sel.indices.size(), 30u);
  for (size_t r = 0; r < 30; ++r) EXPECT_EQ(sel.indices[r], oracle[r].second) << r;
  std::vector<PromptInstance> kept;
  for (size_t i : sel.indices) {
    kept.push_back(make_instance(w.vocab, w.tmpl, w.pairs[i].definition, w.pairs[i].word));
  }
  std::vector<const PromptInstance*> ptrs;
  for (const auto& k : kept) ptrs.push_back(&k);
  EXPECT_EQ(greedy_accuracy(*w.model, checker, ptrs), 1.0);
  const auto all = select_answerable(w.pairs, *w.model, w.vocab, w.tmpl, w.pairs.size() + 1);
  EXPECT_TRUE(all.insufficient);
  EXPECT_EQ(all.indices.size(), oracle.size());
}

TEST(ImportanceTest, SingleWordDefinitionRanksThatWord) {
  const auto& w = TinyWorld::get();
  const auto inst = make_instance(w.vocab, w.tmpl, "swan", "cygnet");
  const auto ranked = importance_rank(w.vocab, inst, *w.model);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].word, 0u);
  EXPECT_GT(ranked[0].score, 0.0);
}

TEST(ImportanceTest, TopWordAgreesWithOcclusion) {
  const auto& w = TinyWorld::get();
  ASSERT_GE(w.clean.size(), 100u);
  int agree = 0;
  for (size_t s = 0; s < 100; ++s) {
    const auto& p = w.clean[s];
    const auto inst = make_instance(w.vocab, w.tmpl, p.definition, p.word);
    const auto ranked = importance_rank(w.vocab, inst, *w.model);
    const double base = w.model->answer_logprob(inst.prompt_tokens(), inst.answer_tokens());
    // Occlusion: delete each word in turn and measure the likelihood drop.
    const auto words = split_words(p.definition, 0);
    size_t best = 0;
    double best_drop = -1e300;
    for (size_t k = 0; k < words.size(); ++k) {
      std::string def;
      for (size_t j = 0; j < words.size(); ++j) {
        if (j == k) continue;
        if (!def.empty()) def += ' ';
        def += p.definition.substr(words[j].begin, words[j].size());
      }
      const auto occ = make_instance(w.vocab, w.tmpl, def, p.word);
      const double drop =
          base - w.model->answer_logprob(occ.prompt_tokens(), occ.answer_tokens());
      if (drop > best_drop) {
        best_drop = drop;
        best = k;
      }
    }
    agree += ranked.front().word == best ? 1 : 0;
  }
  EXPECT_GE(agree, 70) << "top-1 agreement " << agree << "/100";
}

TripletDataset tiny_triplets(size_t t, int jobs) {
  const auto& w = TinyWorld::get();
  TripletOptions opt;
  opt.t = t;
  opt.seed = 21;
  opt.jobs = jobs;
  return build_triplets(w.vocab, w.tmpl, w.clean, *w.model, opt);
}

TEST(TripletTest, InvariantsHoldForEverySample) {
  const auto& w = TinyWorld::get();
  for (size_t t : {1, 3}) {
    const auto ds = tiny_triplets(t, 1);
    EXPECT_EQ(ds.samples.size() + ds.dropped.size(), w.clean.size());
    EXPECT_GT(ds.samples.size(), w.clean.size() / 2);
    for (const auto& s : ds.samples) {
      EXPECT_EQ(s.typo.tokens.size(), s.split.tokens.size());
      EXPECT_EQ(s.split.text, s.clean.text);
      EXPECT_EQ(w.vocab.decode(s.split.tokens.tokens), s.clean.text);
      EXPECT_EQ(s.typo.text.size(), s.clean.text.size() + t);
      EXPECT_EQ(s.insertions.size(), t);
      for (const auto& ins : s.insertions) {
        EXPECT_NE(kDefaultAlphabet.find(s.typo.text[ins.text_pos]), std::string_view::npos);
        EXPECT_NE(s.typo.text[ins.text_pos + 1], ' ');
      }
      for (const auto* x : {&s.clean, &s.typo, &s.split}) {
        EXPECT_EQ(w.vocab.decode(x->answer_tokens()), s.word);
        EXPECT_TRUE(std::is_sorted(x->marked.begin(), x->marked.end()));
        EXPECT_LT(x->marked.back(), x->tokens.size());
        EXPECT_EQ(x->marked, mark_positions(w.vocab, *x, s.selected_words));
      }
    }
    for (const auto& d : ds.dropped) EXPECT_FALSE(d.reason.empty());
  }
}

TEST(TripletTest, ParallelBuildIsIdenticalAndRoundTrips) {
  const auto serial = tiny_triplets(2, 1);
  const auto parallel = tiny_triplets(2, 3);
  EXPECT_EQ(triplets_jsonl(serial), triplets_jsonl(parallel));
  EXPECT_EQ(triplets_meta(serial), triplets_meta(parallel));
  const auto back = parse_triplets(triplets_jsonl(serial), triplets_meta(serial));
  EXPECT_EQ(triplets_jsonl(back), triplets_jsonl(serial));
  ASSERT_EQ(back.samples.size(), serial.samples.size());
  const auto& a = back.samples.front();
  const auto& b = serial.samples.front();
  EXPECT_EQ(a.typo.tokens, b.typo.tokens);
  EXPECT_EQ(a.split.marked, b.split.marked);
  EXPECT_EQ(a.insertions, b.insertions);
  EXPECT_EQ(a.split.answer_begin, b.split.answer_begin);
  const auto path = (std::filesystem::temp_directory_path() / "typolab_triplets.jsonl").string();
  save_triplets(path, serial);
  EXPECT_EQ(triplets_jsonl(load_triplets(path)), triplets_jsonl(serial));
}

TEST(TripletTest, SameSeedSameDrawsAcrossT) {
  // Sample seeds depend only on (seed, index), so the first inserted
  // character of each sample is shared between t=1 and t=2.
  const auto a = tiny_triplets(1, 1);
  const auto b = tiny_triplets(2, 1);
  std::map<size_t, const TripletSample*> by_index;
  for (const auto& s : b.samples) by_index[s.index] = &s;
  int compared = 0;
  for (const auto& s : a.samples) {
    auto it = by_index.find(s.index);
    if (it == by_index.end()) continue;
    EXPECT_EQ(s.seed, it->second->seed);
    EXPECT_EQ(s.insertions[0].ch, it->second->insertions[0].ch);
    EXPECT_EQ(s.insertions[0].word, it->second->insertions[0].word);
    ++compared;
  }
  EXPECT_GT(compared, 10);
}

TEST(AugmentTest, RandomTyposAndResegmentation) {
  Rng rng(4);
  const std::string def = "a young swan on a lake";
  for (int i = 0; i < 50; ++i) {
    const auto out = random_typo_definition(def, rng, 3);
    EXPECT_GE(out.size(), def.size() + 1);
    EXPECT_LE(out.size(), def.size() + 3);
    EXPECT_EQ(split_words(out, 0).size(), split_words(def, 0).size());
  }
  const Vocab v = swan_vocab();
  const PromptTemplate t;
  const auto inst = make_instance(v, t, "a young swan", "cygnet");
  bool grew = false;
  for (int i = 0; i < 20; ++i) {
    const auto toks = random_resegmentation(v, inst, rng, 2);
    EXPECT_EQ(v.decode(toks), v.decode(inst.prompt_tokens()));
    grew = grew || toks.size() > inst.prompt_tokens().size();
  }
  EXPECT_TRUE(grew);
}

}  // namespace
}  // namespace typolab

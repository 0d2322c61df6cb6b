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

#ifndef TYPOLAB_TESTS_TEST_UTIL_HPP_
#define TYPOLAB_TESTS_TEST_UTIL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "typolab/typolab.hpp"

namespace typolab::testing {

// Small config for tests that need real forward/backward passes.
inline ModelConfig tiny_config(int vocab_size = 300, int layers = 2) {
  ModelConfig c;
  c.n_layers = layers;
  c.n_heads = 4;
  c.d_model = 32;
  c.d_ffn = 48;
  c.vocab_size = vocab_size;
  c.max_seq = 64;
  return c;
}

inline std::vector<TokenId> random_tokens(Rng& rng, size_t n, int vocab) {
  std::vector<TokenId> t(n);
  for (auto& id : t) id = static_cast<TokenId>(rng.below(static_cast<uint64_t>(vocab)));
  return t;
}

// A trained miniature of the whole setting: short synthetic definitions, a
// small BPE vocab and a 2-layer model that answers nearly all pairs. Built
// once per test binary.
struct TinyWorld {
  std::vector<WordDef> pairs;
  Vocab vocab = Vocab::byte_level();
  PromptTemplate tmpl;
  Checkpoint ckpt;
  std::unique_ptr<Model<float>> model;
  std::vector<WordDef> clean;  // answerable pairs

  static const TinyWorld& get() {
    static const TinyWorld world = build();
    return world;
  }

  AnswerChecker checker() const { return {&vocab, &tmpl}; }

 private:
  static TinyWorld build() {
    TinyWorld w;
    SynthOptions so;
    so.size = 120;
    so.seed = 3;
    so.min_words = 5;
    so.max_words = 7;
    w.pairs = synthesize_corpus(so);
    w.vocab = Vocab::train(vocab_training_texts(w.pairs, w.tmpl), 400);
    ModelConfig c = tiny_config(static_cast<int>(w.vocab.size()));
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 8;
    tc.learning_rate = 1e-2;
    tc.warmup_steps = 20;
    tc.min_accuracy = 0.0;
    tc.augment_prob = 0.2;
    tc.augment_max_typos = 2;
    const auto samples = training_samples(w.vocab, w.tmpl, w.pairs);
    auto opt = make_train_options(tc, 11, w.vocab, w.tmpl, w.pairs, std::string(kDefaultAlphabet));
    const auto res = train_toy(samples, c, opt);
    w.ckpt = make_checkpoint(res.weights, w.vocab, w.tmpl);
    w.model = std::make_unique<Model<float>>(w.ckpt.weights);
    const auto sel = select_answerable(w.pairs, *w.model, w.vocab, w.tmpl, w.pairs.size());
    for (size_t i : sel.indices) w.clean.push_back(w.pairs[i]);
    return w;
  }
};

}  // namespace typolab::testing

#endif  // TYPOLAB_TESTS_TEST_UTIL_HPP_

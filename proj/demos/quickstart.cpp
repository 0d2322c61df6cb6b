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

// Library walkthrough on a small model: corpus, vocabulary, training, one
// triplet, neuron and head scores, and a typo-neuron ablation. Runs in well
// under a minute.

#include <cstdio>

#include "typolab/typolab.hpp"

using namespace typolab;

int main() {
  // 1. A synthetic word/definition corpus and a byte-pair vocabulary.
  SynthOptions so;
  so.size = 150;
  so.seed = 1;
  so.min_words = 5;
  so.max_words = 7;
  const auto pairs = synthesize_corpus(so);
  const PromptTemplate tmpl;
  const Vocab vocab = Vocab::train(vocab_training_texts(pairs, tmpl), 450);
  std::printf("%zu pairs, %zu tokens; e.g. %s\n", pairs.size(), vocab.size(),
              tmpl.render(pairs[0].definition, pairs[0].word).c_str());

  // 2. Train a 2-layer toy model.
  ModelConfig mc;
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.d_model = 32;
  mc.d_ffn = 64;
  mc.max_seq = 64;
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 8;
  tc.learning_rate = 1e-2;
  tc.warmup_steps = 20;
  tc.min_accuracy = 0;
  tc.augment_prob = 0.2;
  tc.augment_max_typos = 2;
  const auto trained = train_toy(training_samples(vocab, tmpl, pairs), mc,
                                 make_train_options(tc, 5, vocab, tmpl, pairs,
                                                    std::string(kDefaultAlphabet)));
  const Model<float> model(trained.weights);
  std::printf("greedy accuracy after training: %.3f\n", trained.accuracy);

  // 3. Keep answerable pairs, then build t=1 triplets.
  const auto sel = select_answerable(pairs, model, vocab, tmpl, 100);
  std::vector<WordDef> clean;
  for (size_t i : sel.indices) clean.push_back(pairs[i]);
  TripletOptions topt;
  topt.t = 1;
  topt.seed = 3;
  const auto ds = build_triplets(vocab, tmpl, clean, model, topt);
  std::printf("%zu triplets (%zu dropped)\n", ds.samples.size(), ds.dropped.size());
  if (ds.samples.size() < 20) {
    std::printf("too few triplets for the ablation step\n");
    return 1;
  }
  const auto& s = ds.samples.front();
  std::printf("  clean: %s\n  typo:  %s\n  split: %zu tokens, same as typo\n", s.clean.text.c_str(),
              s.typo.text.c_str(), s.split.tokens.size());

  // 4. Score every neuron and head.
  const auto neurons = score_units(ds, model, UnitKind::kNeuron);
  const auto heads = score_units(ds, model, UnitKind::kHead);
  const auto ns = delta_stats(neurons);
  const auto hs = delta_stats(heads);
  std::printf("neuron delta mean %+.4f (max %+.4f), head delta mean %+.4f\n", ns.mean, ns.max,
              hs.mean);
  const auto top = select_top_fraction(neurons, 0.05);
  std::printf("top %zu typo neurons:", top.size());
  for (const auto& u : top.units) std::printf(" L%d/%d", u.layer, u.index);
  std::printf("\n");

  // 5. Identify on a held-out split, ablate, compare with random neurons.
  AblationOptions ao;
  ao.fraction = 0.05;
  ao.identify_n = 20;
  ao.seed = 9;
  ao.random_repeats = 3;
  const auto ab = ablation_experiment(model, AnswerChecker{&vocab, &tmpl}, ds, ao);
  std::printf("%s", ab.report.text_table().c_str());
  return 0;
}

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

#include "typolab/detector.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace typolab {
namespace {

using testing::TinyWorld;

const TripletDataset& tiny_triplets() {
  static const TripletDataset ds = [] {
    const auto& w = TinyWorld::get();
    TripletOptions opt;
    opt.t = 2;
    opt.seed = 5;
    return build_triplets(w.vocab, w.tmpl, w.clean, *w.model, opt);
  }();
  return ds;
}

TEST(NeuronScoreTest, SingleSampleSinglePositionIsThatActivation) {
  const auto& w = TinyWorld::get();
  PromptInstance x = tiny_triplets().samples.front().typo;
  x.marked = {7};
  const auto s = neuron_dataset_score({&x}, *w.model);
  const auto tr = w.model->forward(x.tokens);
  for (int l = 0; l < 2; ++l) {
    for (int n = 0; n < w.model->config().d_ffn; ++n) {
      EXPECT_EQ(s(l, n), static_cast<double>(tr.activation(l, 7, n)));
    }
  }
}

TEST(NeuronScoreTest, DuplicatingSamplesChangesNothing) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  const auto& a = ds.samples[0].split;
  const auto& b = ds.samples[1].split;
  const auto once = neuron_dataset_score({&a, &b}, *w.model);
  const auto twice = neuron_dataset_score({&a, &b, &a, &b}, *w.model);
  EXPECT_LT((once - twice).cwiseAbs().maxCoeff(), 1e-12);
  const auto heads_once = head_dataset_score({&a, &b}, *w.model);
  const auto heads_twice = head_dataset_score({&a, &a, &b, &b}, *w.model);
  EXPECT_LT((heads_once - heads_twice).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NeuronScoreTest, MatchesPrefixRerunOracle) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  std::vector<const PromptInstance*> xs;
  for (size_t i = 0; i < 5; ++i) xs.push_back(&ds.samples[i].typo);
  const auto fast = neuron_dataset_score(xs, *w.model);
  const auto& c = w.model->config();
  ScoreTensor oracle = ScoreTensor::Zero(c.n_layers, c.d_ffn);
  for (const auto* x : xs) {
    ScoreTensor per = ScoreTensor::Zero(c.n_layers, c.d_ffn);
    for (size_t m : x->marked) {
      // Re-run on the prefix ending at m and read its last position.
      const std::vector<TokenId> prefix(x->tokens.tokens.begin(),
                                        x->tokens.tokens.begin() + static_cast<std::ptrdiff_t>(m) + 1);
      const auto tr = w.model->forward(prefix);
      for (int l = 0; l < c.n_layers; ++l) {
        for (int n = 0; n < c.d_ffn; ++n) per(l, n) += tr.activation(l, static_cast<int>(m), n);
      }
    }
    oracle += per / static_cast<double>(x->marked.size());
  }
  oracle /= 5.0;
  EXPECT_LT((fast - oracle).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(NeuronScoreTest, ScoresDoNotDependOnJobs) {
  const auto& w = TinyWorld::get();
  const auto xs = variant_view(tiny_triplets(), Variant::kTypo);
  EXPECT_EQ(neuron_dataset_score(xs, *w.model, 1), neuron_dataset_score(xs, *w.model, 3));
  EXPECT_EQ(head_dataset_score(xs, *w.model, 1), head_dataset_score(xs, *w.model, 3));
}

// KL(p || U_m) / log2(m) written out with natural logs.
double kl_oracle(const std::vector<double>& p) {
  const double m = static_cast<double>(p.size());
  double kl = 0;
  for (double v : p) {
    if (v > 0) kl += v * (std::log(v) - std::log(1.0 / m));
  }
  return kl / std::log(m);
}

TEST(HeadScoreTest, NormalizedKlMatchesDirectSummation) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    // Random 8x8 causal attention map.
    Mat<double> a = Mat<double>::Zero(8, 8);
    for (int i = 0; i < 8; ++i) {
      double z = 0;
      for (int j = 0; j <= i; ++j) z += (a(i, j) = std::exp(3 * rng.normal()));
      a.row(i) /= z;
    }
    for (int i = 1; i < 8; ++i) {
      std::vector<double> p(static_cast<size_t>(i) + 1);
      for (int j = 0; j <= i; ++j) p[static_cast<size_t>(j)] = a(i, j);
      EXPECT_NEAR(normalized_kl_row(a.row(i), i + 1), kl_oracle(p), 1e-6);
    }
    EXPECT_EQ(normalized_kl_row(a.row(0), 1), 0.0);
  }
}

TEST(HeadScoreTest, UniformAndOneHotRowsHitTheBounds) {
  for (int m = 2; m <= 64; ++m) {
    Mat<double> uniform = Mat<double>::Constant(1, m, 1.0 / m);
    EXPECT_NEAR(normalized_kl_row(uniform.row(0), m), 0.0, 1e-9);
    Mat<double> one_hot = Mat<double>::Zero(1, m);
    one_hot(0, m / 2) = 1.0;
    EXPECT_NEAR(normalized_kl_row(one_hot.row(0), m), 1.0, 1e-9);
  }
}

TEST(HeadScoreTest, DatasetScoreSumsPromptRows) {
  const auto& w = TinyWorld::get();
  const auto& x = tiny_triplets().samples.front().clean;
  const auto s = head_dataset_score({&x}, *w.model);
  const auto avg = head_dataset_score({&x}, *w.model, 1, {.per_position_average = true});
  const auto prompt = x.prompt_tokens();
  const auto tr = w.model->forward(prompt);
  for (int l = 0; l < 2; ++l) {
    for (int h = 0; h < 4; ++h) {
      double sum = 0;
      for (size_t q = 1; q < prompt.size(); ++q) {
        std::vector<double> p(q + 1);
        for (size_t j = 0; j <= q; ++j) p[j] = tr.attention_score(l, h, static_cast<int>(q), static_cast<int>(j));
        sum += kl_oracle(p);
      }
      EXPECT_NEAR(s(l, h), sum, 1e-5);
      EXPECT_NEAR(avg(l, h), sum / static_cast<double>(prompt.size()), 1e-6);
      EXPECT_GE(s(l, h), 0.0);
    }
  }
}

TEST(DeltaTest, Arithmetic) {
  ScoreTensor clean(1, 1), typo(1, 1), split(1, 1);
  clean << 0.2;
  typo << 0.9;
  split << 0.5;
  const auto d = neuron_delta(clean, typo, split);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0].delta, 0.4);
  EXPECT_EQ(d[0].delta, d[0].s_typo - std::max(d[0].s_clean, d[0].s_split));
  EXPECT_EQ(head_delta(clean, typo, split)[0].kind, UnitKind::kHead);
  try {
    neuron_delta(clean, ScoreTensor::Zero(1, 2), split);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(DeltaTest, IdenticalVariantsGiveZeroDelta) {
  const auto& w = TinyWorld::get();
  TripletDataset same = tiny_triplets();
  for (auto& s : same.samples) {
    s.typo = s.clean;
    s.split = s.clean;
  }
  for (auto kind : {UnitKind::kNeuron, UnitKind::kHead}) {
    for (const auto& u : score_units(same, *w.model, kind)) EXPECT_EQ(u.delta, 0.0);
  }
}

std::vector<UnitScore> random_scores(Rng& rng, int layers, int per_layer, UnitKind kind) {
  std::vector<UnitScore> out;
  for (int l = 0; l < layers; ++l) {
    for (int i = 0; i < per_layer; ++i) {
      UnitScore s;
      s.kind = kind;
      s.layer = l;
      s.index = i;
      // Coarse values so that ties (including +x/-x under abs) occur.
      s.delta = static_cast<double>(static_cast<int>(rng.below(21)) - 10) / 4.0;
      out.push_back(s);
    }
  }
  // Scores may arrive in any order.
  rng.shuffle(out);
  return out;
}

TEST(SelectionTest, CountUsesFloorWithAMinimumOfOne) {
  EXPECT_EQ(selection_count(0.015, 208), 3u);
  EXPECT_EQ(selection_count(0.015, 672), 10u);
  EXPECT_EQ(selection_count(0.015, 1472), 22u);
  EXPECT_EQ(selection_count(0.005, 1024), 5u);
  EXPECT_EQ(selection_count(0.005, 10), 1u);
  EXPECT_EQ(selection_count(1.0, 17), 17u);
  EXPECT_EQ(selection_count(0.1, 30), 3u);  // 0.1 * 30 is 3.0000000000000004
  for (double bad : {0.0, -0.1, 1.5}) {
    EXPECT_THROW(selection_count(bad, 10), Error);
  }
}

TEST(SelectionTest, TopFractionMatchesFullSortOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scores = random_scores(rng, 1 + static_cast<int>(rng.below(6)),
                                      1 + static_cast<int>(rng.below(40)), UnitKind::kNeuron);
    for (auto by : {RankBy::kDelta, RankBy::kAbsDelta}) {
      const double fraction = 0.01 + 0.99 * rng.uniform();
      const auto sel = select_top_fraction(scores, fraction, by);
      std::vector<std::tuple<double, int, int>> oracle;
      for (const auto& s : scores) {
        oracle.emplace_back(-(by == RankBy::kDelta ? s.delta : std::abs(s.delta)), s.layer, s.index);
      }
      std::sort(oracle.begin(), oracle.end());
      ASSERT_EQ(sel.size(), selection_count(fraction, scores.size()));
      for (size_t i = 0; i < sel.size(); ++i) {
        EXPECT_EQ(sel.units[i].layer, std::get<1>(oracle[i]));
        EXPECT_EQ(sel.units[i].index, std::get<2>(oracle[i]));
        EXPECT_EQ(sel.keys[i], -std::get<0>(oracle[i]));
      }
    }
  }
  const auto all = select_top_fraction(random_scores(rng, 3, 5, UnitKind::kHead), 1.0);
  EXPECT_EQ(all.size(), 15u);
  EXPECT_EQ(all.kind, UnitKind::kHead);
  EXPECT_EQ(all.mask().heads.size(), 15u);
}

TEST(SelectionTest, ThresholdKeepsEveryUnitAtOrAboveIt) {
  Rng rng(2);
  const auto scores = random_scores(rng, 4, 30, UnitKind::kNeuron);
  const auto top = select_top_fraction(scores, 0.05);
  const double thr = top.keys.back();
  const auto sel = select_by_threshold(scores, thr);
  const auto expected = std::count_if(scores.begin(), scores.end(),
                                      [&](const UnitScore& s) { return s.delta >= thr; });
  EXPECT_EQ(static_cast<long>(sel.size()), expected);
  EXPECT_GE(sel.size(), top.size());
  // The threshold selection starts with the top-fraction selection.
  for (size_t i = 0; i < top.size(); ++i) EXPECT_EQ(sel.units[i], top.units[i]);
  EXPECT_TRUE(select_by_threshold(scores, 1e9).units.empty());
  EXPECT_THROW(select_by_threshold(scores, std::nan("")), Error);
}

TEST(SelectionTest, RandomSelectionIsSeededAndUniform) {
  const auto a = select_random(UnitKind::kNeuron, 4, 48, 20, 9);
  const auto b = select_random(UnitKind::kNeuron, 4, 48, 20, 9);
  EXPECT_EQ(a.units, b.units);
  std::set<Unit> distinct(a.units.begin(), a.units.end());
  EXPECT_EQ(distinct.size(), 20u);
  std::vector<int> per_layer(4, 0);
  for (uint64_t seed = 0; seed < 400; ++seed) {
    for (const auto& u : select_random(UnitKind::kNeuron, 4, 48, 5, seed).units) {
      ASSERT_LT(u.index, 48);
      ++per_layer[static_cast<size_t>(u.layer)];
    }
  }
  for (int n : per_layer) EXPECT_NEAR(n, 500, 100);
  EXPECT_THROW(select_random(UnitKind::kHead, 2, 2, 5, 1), Error);
}

TEST(DistributionTest, MatchesRecountOracle) {
  Rng rng(6);
  for (int layers : {1, 2, 5, 8, 26}) {
    for (size_t bins : {1u, 3u, 5u, 10u}) {
      std::vector<Unit> units;
      for (int i = 0; i < 300; ++i) {
        units.push_back({static_cast<int>(rng.below(static_cast<uint64_t>(layers))), i});
      }
      const auto d = layer_distribution(units, layers, bins);
      std::vector<size_t> oracle(bins, 0);
      for (const auto& u : units) {
        const double depth = layers == 1 ? 0.0 : static_cast<double>(u.layer) / (layers - 1);
        ++oracle[std::min(bins - 1, static_cast<size_t>(std::floor(depth * bins + 1e-12)))];
      }
      double pct = 0;
      ASSERT_EQ(d.bins.size(), bins);
      for (size_t b = 0; b < bins; ++b) {
        EXPECT_EQ(d.bins[b].count, oracle[b]) << layers << " layers, bin " << b;
        pct += d.bins[b].percent;
      }
      EXPECT_NEAR(pct, 100.0, 0.1);
    }
  }
  const auto empty = layer_distribution(std::vector<Unit>{}, 4, 5);
  EXPECT_FALSE(empty.percent_defined);
  EXPECT_TRUE(to_json(empty)["bins"][0]["percent"].is_null());
}

TEST(StatsTest, MeanSdAndSkewness) {
  std::vector<UnitScore> s(4);
  const double v[] = {1, 2, 3, 10};
  for (int i = 0; i < 4; ++i) s[static_cast<size_t>(i)].delta = v[i];
  const auto st = delta_stats(s);
  EXPECT_DOUBLE_EQ(st.mean, 4.0);
  EXPECT_DOUBLE_EQ(st.sd, std::sqrt((9 + 4 + 1 + 36) / 4.0));
  EXPECT_GT(st.skewness, 0.0);
  EXPECT_EQ(st.min, 1);
  EXPECT_EQ(st.max, 10);
  EXPECT_EQ(delta_stats({}).count, 0u);
}

TEST(DamageTest, PartitionMatchesRegeneration) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  const auto checker = w.checker();
  const auto p = partition_by_damage(ds, *w.model, checker, 0, 2);
  EXPECT_EQ(p.undamaged.size() + p.damaged.size(), ds.samples.size());
  for (size_t i : p.undamaged) {
    EXPECT_EQ(checker.generate_answer(*w.model, ds.samples[i].typo), ds.samples[i].word);
  }
  for (size_t i : p.damaged) {
    EXPECT_NE(checker.generate_answer(*w.model, ds.samples[i].typo), ds.samples[i].word);
  }
  try {
    partition_by_damage(ds, *w.model, checker, ds.samples.size());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSamples);
  }
}

TEST(SerializationTest, ScoresCsvAndSelectionJsonRoundTrip) {
  Rng rng(3);
  auto scores = random_scores(rng, 2, 3, UnitKind::kHead);
  for (auto& s : scores) {
    s.s_clean = rng.normal();
    s.s_typo = rng.normal();
    s.s_split = rng.normal();
    s.delta = s.s_typo - std::max(s.s_clean, s.s_split);
  }
  const std::string csv = scores_csv(scores);
  const auto back = parse_scores_csv(csv);
  ASSERT_EQ(back.size(), scores.size());
  EXPECT_EQ(scores_csv(back), csv);
  for (size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].layer, scores[i].layer);
    EXPECT_NEAR(back[i].delta, scores[i].delta, 1e-9 * (1 + std::abs(scores[i].delta)));
  }
  EXPECT_THROW(parse_scores_csv("header\nneuron,1,2\n"), Error);
  EXPECT_THROW(parse_scores_csv("header\nneuron,x,2,1,1,1,0\n"), Error);

  const auto sel = select_top_fraction(scores, 0.5, RankBy::kAbsDelta);
  const auto sel2 = selection_from_json(to_json(sel));
  EXPECT_EQ(sel2.units, sel.units);
  EXPECT_EQ(sel2.by, RankBy::kAbsDelta);
  EXPECT_EQ(to_json(sel2), to_json(sel));
  const auto dist = layer_distribution(sel, 2, 5);
  EXPECT_EQ(to_json(layer_distribution_from_json(to_json(dist))), to_json(dist));
  EXPECT_THROW(selection_from_json({{"kind", "neuron"}}), Error);
}

}  // namespace
}  // namespace typolab

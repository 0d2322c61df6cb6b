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

#include "typolab/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "typolab/pipeline.hpp"

namespace typolab {
namespace {

using testing::TinyWorld;

const TripletDataset& tiny_triplets() {
  static const TripletDataset ds = [] {
    const auto& w = TinyWorld::get();
    TripletOptions opt;
    opt.t = 1;
    opt.seed = 8;
    return build_triplets(w.vocab, w.tmpl, w.clean, *w.model, opt);
  }();
  return ds;
}

TEST(SplitSamplesTest, DisjointSortedAndSeeded) {
  const auto s = split_samples(50, 10, true, 4);
  EXPECT_EQ(s.identify.size(), 10u);
  EXPECT_EQ(s.evaluate.size(), 40u);
  EXPECT_TRUE(std::is_sorted(s.identify.begin(), s.identify.end()));
  EXPECT_TRUE(std::is_sorted(s.evaluate.begin(), s.evaluate.end()));
  std::set<size_t> all(s.identify.begin(), s.identify.end());
  for (size_t i : s.evaluate) EXPECT_TRUE(all.insert(i).second) << "overlap at " << i;
  EXPECT_EQ(all.size(), 50u);
  EXPECT_EQ(split_samples(50, 10, true, 4).identify, s.identify);
  EXPECT_NE(split_samples(50, 10, true, 5).identify, s.identify);
  EXPECT_EQ(split_samples(50, 10, false, 4).evaluate.size(), 50u);
  try {
    split_samples(10, 10, true, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSamples);
  }
}

TEST(EvaluateTest, EmptyMaskIsANoOp) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  const auto checker = w.checker();
  std::vector<size_t> all(ds.samples.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto row = evaluate_condition(*w.model, checker, ds, all, "none", {}, 0, 0, 1);
  EXPECT_EQ(row.clean, 1.0);  // clean set is answerable by construction
  EXPECT_EQ(row.typo, greedy_accuracy(*w.model, checker, variant_view(ds, Variant::kTypo)));
  EXPECT_EQ(row.evaluated, ds.samples.size());
}

TEST(AblationTest, ProducesTheThreeConditions) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  AblationOptions opt;
  opt.fraction = 0.05;
  opt.identify_n = 20;
  opt.seed = 3;
  opt.random_repeats = 2;
  const auto res = ablation_experiment(*w.model, w.checker(), ds, opt);
  const auto& rep = res.report;
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].condition, "none");
  EXPECT_EQ(rep.rows[1].condition, "typo_neurons");
  EXPECT_EQ(rep.rows[2].condition, "random_neurons");
  EXPECT_EQ(rep.rows[3].condition, "random_neurons#1");
  const size_t k = selection_count(0.05, 2 * static_cast<size_t>(w.model->config().d_ffn));
  EXPECT_EQ(res.typo_selection.size(), k);
  EXPECT_EQ(rep.row("typo_neurons").units, k);
  EXPECT_EQ(rep.row("random_neurons").units, k);
  EXPECT_NE(res.random_selections[0].units, res.random_selections[1].units);
  EXPECT_EQ(rep.row("none").clean, 1.0);
  for (const auto& r : rep.rows) EXPECT_EQ(r.evaluated, ds.samples.size() - 20);
  // Identification used only the identify split: rescoring it reproduces
  // the scores exactly.
  EXPECT_EQ(scores_csv(score_units(ds, *w.model, UnitKind::kNeuron, &res.split.identify)),
            scores_csv(res.scores));
  // The typo row equals a direct evaluation with the selected mask.
  const auto direct = evaluate_condition(*w.model, w.checker(), ds, res.split.evaluate, "x",
                                         res.typo_selection.mask(), k, 0, 1);
  EXPECT_EQ(direct.typo, rep.row("typo_neurons").typo);
  EXPECT_EQ(direct.clean, rep.row("typo_neurons").clean);
}

TEST(AblationTest, HeadsRankByAbsoluteDelta) {
  const auto& w = TinyWorld::get();
  AblationOptions opt;
  opt.kind = UnitKind::kHead;
  opt.by = RankBy::kAbsDelta;
  opt.fraction = 0.25;
  opt.identify_n = 20;
  const auto res = ablation_experiment(*w.model, w.checker(), tiny_triplets(), opt);
  EXPECT_EQ(res.typo_selection.size(), 2u);
  EXPECT_EQ(res.report.rows[1].condition, "typo_heads");
  const auto oracle = select_top_fraction(res.scores, 0.25, RankBy::kAbsDelta);
  EXPECT_EQ(res.typo_selection.units, oracle.units);
}

TEST(CurveTest, CleanPointIsExactlyOne) {
  const auto& w = TinyWorld::get();
  TripletOptions base;
  base.seed = 8;
  const auto curve = accuracy_curve(*w.model, w.vocab, w.tmpl, w.clean, {0, 1, 3}, base);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0].t, 0u);
  EXPECT_EQ(curve[0].accuracy, 1.0);
  EXPECT_EQ(curve[0].samples, w.clean.size());
  EXPECT_EQ(curve[1].samples, tiny_triplets().samples.size());
  EXPECT_EQ(curve[1].accuracy,
            greedy_accuracy(*w.model, w.checker(), variant_view(tiny_triplets(), Variant::kTypo)));
  EXPECT_THROW(accuracy_curve(*w.model, w.vocab, w.tmpl, w.clean, {1, 2}, base), Error);
}

TEST(DamageComparisonTest, GroupsAndDistributionsRecount) {
  const auto& w = TinyWorld::get();
  const auto& ds = tiny_triplets();
  const auto part = partition_by_damage(ds, *w.model, w.checker());
  const size_t group = std::min(part.damaged.size(), part.undamaged.size());
  ASSERT_GE(group, 3u) << "tiny model needs both damaged and undamaged samples";
  const auto d = damage_comparison(*w.model, w.checker(), ds, group, 0.1, 2);
  EXPECT_EQ(d.undamaged.size(), group);
  EXPECT_EQ(d.damaged.size(), group);
  std::set<size_t> und(part.undamaged.begin(), part.undamaged.end());
  for (size_t i : d.undamaged) EXPECT_TRUE(und.count(i));
  for (size_t i : d.damaged) EXPECT_FALSE(und.count(i));
  // Layer histogram recount over the selected units.
  std::vector<size_t> counts(5, 0);
  for (const auto& u : d.damaged_selection.units) ++counts[depth_bin(u.layer, 2, 5)];
  for (size_t b = 0; b < 5; ++b) {
    EXPECT_EQ(d.damaged_dist.bins[b].count, counts[b]);
    EXPECT_DOUBLE_EQ(d.percent_difference[b],
                     d.damaged_dist.bins[b].percent - d.undamaged_dist.bins[b].percent);
  }
  EXPECT_THROW(damage_comparison(*w.model, w.checker(), ds, ds.samples.size(), 0.1, 2), Error);
}

TEST(ReportTest, ValidatesRowsAndRoundTrips) {
  ExperimentReport r;
  r.config = {{"seed", 7}};
  r.checkpoint_hash = "abc";
  r.add_row({"none", 0, 1.0, 0.8, 90, 1});
  r.add_row({"typo_neurons", 5, 0.95, 0.7, 90, 1});
  EXPECT_THROW(r.add_row({"none", 0, 1.0, 0.8, 90, 1}), Error);
  EXPECT_THROW(r.add_row({"bad", 0, 1.5, 0.8, 90, 1}), Error);
  EXPECT_THROW(r.row("missing"), Error);
  r.curve.push_back({0, 1.0, 90, 0});
  r.distributions.emplace_back("typo_neurons", layer_distribution(std::vector<Unit>{{0, 1}}, 2, 5));
  std::vector<UnitScore> deltas(3);
  deltas[1].delta = 0.5;
  r.delta_summaries.emplace_back("neuron", delta_stats(deltas));
  const auto j = r.to_json();
  EXPECT_FALSE(j.contains("wall_clock_seconds"));
  const auto back = report_from_json(j);
  EXPECT_EQ(back.to_json(), j);
  r.wall_clock_seconds = 1.5;
  EXPECT_TRUE(r.to_json().contains("wall_clock_seconds"));
  EXPECT_EQ(report_from_json(r.to_json()).to_json(), r.to_json());
  const std::string table = r.text_table();
  EXPECT_NE(table.find("typo_neurons"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_THROW(report_from_json({{"rows", {{{"condition", "x"}}}}}), Error);
}

TEST(RunAllTest, WrittenTripletsReloadWithTheirMetadata) {
  PipelineConfig c;
  c.seed = 5;
  c.synth.size = 80;
  c.synth.min_words = 5;
  c.synth.max_words = 7;
  c.vocab_size = 400;
  c.model = testing::tiny_config(400, 2);
  c.train.epochs = 20;
  c.train.batch_size = 8;
  c.train.learning_rate = 1e-2;
  c.train.warmup_steps = 20;
  c.train.min_accuracy = 0;
  c.k = 40;
  c.curve_t = {0, 1};
  c.triplet_t = {1};
  c.identify_n = 10;
  const auto dir = (std::filesystem::temp_directory_path() / "typolab_run_all_test").string();
  std::filesystem::remove_all(dir);
  const auto res = run_all(c, dir);
  const auto ds = load_triplets(dir + "/triplets_t1.jsonl");
  EXPECT_EQ(ds.t, 1u);
  EXPECT_EQ(ds.seed, res.report.seeds.at("triplets").get<uint64_t>());
  EXPECT_EQ(ds.seed, derive_seed(5, 0x71, 0));
  const auto meta = nlohmann::json::parse(read_file(dir + "/triplets_t1.jsonl.meta.json"));
  EXPECT_EQ(ds.dropped.size(), meta.at("dropped").size());
  EXPECT_EQ(ds.samples.size(), meta.at("samples").get<size_t>());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace typolab

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

#ifndef TYPOLAB_HARNESS_HPP_
#define TYPOLAB_HARNESS_HPP_

// Experiments: accuracy against typo count, ablations with random baselines,
// and damaged/undamaged layer distributions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/corpus.hpp"
#include "typolab/detector.hpp"
#include "typolab/error.hpp"
#include "typolab/model.hpp"
#include "typolab/random.hpp"

namespace typolab {

struct CurvePoint {
  size_t t = 0;
  double accuracy = 0.0;
  size_t samples = 0;
  size_t dropped = 0;
};

struct AccuracyRow {
  std::string condition;
  size_t units = 0;
  double clean = 0.0;
  double typo = 0.0;
  size_t evaluated = 0;
  uint64_t seed = 0;
};

struct ExperimentReport {
  nlohmann::json config = nlohmann::json::object();
  std::string checkpoint_hash;
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<AccuracyRow> rows;
  std::vector<CurvePoint> curve;
  std::vector<std::pair<std::string, LayerDistribution>> distributions;
  std::vector<std::pair<std::string, DeltaStats>> delta_summaries;
  std::optional<double> wall_clock_seconds;  // left out of JSON unless set

  void add_row(AccuracyRow row) {
    for (const auto& r : rows) {
      TYPOLAB_REQUIRE(r.condition != row.condition, ErrorCode::kInvalidArgument,
                      "duplicate condition '" + row.condition + "'");
    }
    TYPOLAB_REQUIRE(row.clean >= 0.0 && row.clean <= 1.0 && row.typo >= 0.0 &&
                        row.typo <= 1.0,
                    ErrorCode::kInvalidArgument, "accuracy outside [0, 1]");
    rows.push_back(std::move(row));
  }

  const AccuracyRow& row(const std::string& condition) const {
    for (const auto& r : rows) {
      if (r.condition == condition) return r;
    }
    throw Error(ErrorCode::kInvalidArgument, "no condition '" + condition + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config"] = config;
    j["checkpoint_hash"] = checkpoint_hash;
    j["seeds"] = seeds;
    auto& r = j["rows"] = nlohmann::json::array();
    for (const auto& row : rows) {
      r.push_back({{"condition", row.condition},
                   {"units", row.units},
                   {"clean_accuracy", row.clean},
                   {"typo_accuracy", row.typo},
                   {"evaluated", row.evaluated},
                   {"seed", row.seed}});
    }
    auto& c = j["accuracy_curve"] = nlohmann::json::array();
    for (const auto& p : curve) {
      c.push_back({{"t", p.t}, {"accuracy", p.accuracy}, {"samples", p.samples},
                   {"dropped", p.dropped}});
    }
    auto& d = j["layer_distributions"] = nlohmann::json::object();
    for (const auto& [name, dist] : distributions) d[name] = typolab::to_json(dist);
    auto& s = j["delta_stats"] = nlohmann::json::object();
    for (const auto& [name, st] : delta_summaries) s[name] = typolab::to_json(st);
    if (wall_clock_seconds) j["wall_clock_seconds"] = *wall_clock_seconds;
    return j;
  }

  // Fixed-width table: one line per condition with clean and typo accuracy.
  std::string text_table() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %8s %8s\n", "Condition", "Units",
                  "Clean", "Typo", "N");
    out += buf;
    out += std::string(60, '-') + "\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%-24s %8zu %8.3f %8.3f %8zu\n", r.condition.c_str(),
                    r.units, r.clean, r.typo, r.evaluated);
      out += buf;
    }
    return out;
  }
};

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  try {
    r.config = j.value("config", nlohmann::json::object());
    r.checkpoint_hash = j.value("checkpoint_hash", std::string());
    r.seeds = j.value("seeds", nlohmann::json::object());
    for (const auto& row : j.value("rows", nlohmann::json::array())) {
      r.rows.push_back({row.at("condition").get<std::string>(), row.at("units").get<size_t>(),
                        row.at("clean_accuracy").get<double>(),
                        row.at("typo_accuracy").get<double>(),
                        row.at("evaluated").get<size_t>(), row.at("seed").get<uint64_t>()});
    }
    for (const auto& p : j.value("accuracy_curve", nlohmann::json::array())) {
      r.curve.push_back({p.at("t").get<size_t>(), p.at("accuracy").get<double>(),
                         p.at("samples").get<size_t>(), p.at("dropped").get<size_t>()});
    }
    const auto dists = j.value("layer_distributions", nlohmann::json::object());
    for (const auto& [name, d] : dists.items()) {
      r.distributions.emplace_back(name, layer_distribution_from_json(d));
    }
    const auto stats = j.value("delta_stats", nlohmann::json::object());
    for (const auto& [name, st] : stats.items()) {
      r.delta_summaries.emplace_back(
          name, DeltaStats{st.at("count").get<size_t>(), st.at("mean").get<double>(),
                           st.at("sd").get<double>(), st.at("min").get<double>(),
                           st.at("max").get<double>(), st.at("skewness").get<double>()});
    }
    if (j.contains("wall_clock_seconds")) {
      r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad report JSON: ") + e.what());
  }
  return r;
}

// Typo-variant greedy accuracy for each t, all built from the same clean
// pairs, rankings and seed schedule. t = 0 evaluates the clean prompts.
inline std::vector<CurvePoint> accuracy_curve(
    const Model<float>& model, const Vocab& vocab, const PromptTemplate& tmpl,
    const std::vector<WordDef>& pairs, const std::vector<size_t>& t_values,
    const TripletOptions& base, const std::vector<std::vector<WordImportance>>* rankings = nullptr) {
  TYPOLAB_REQUIRE(std::is_sorted(t_values.begin(), t_values.end()) &&
                      !t_values.empty() && t_values.front() == 0,
                  ErrorCode::kInvalidArgument, "t values must be sorted and start at 0");
  std::vector<std::vector<WordImportance>> own;
  if (rankings == nullptr) {
    own = rank_all(vocab, tmpl, pairs, model, base.aggregate, base.jobs);
    rankings = &own;
  }
  const AnswerChecker checker{&vocab, &tmpl};
  std::vector<CurvePoint> out;
  for (size_t t : t_values) {
    TripletOptions opt = base;
    opt.t = t;
    const auto ds = build_triplets(vocab, tmpl, pairs, model, opt, rankings);
    const auto xs = variant_view(ds, Variant::kTypo);
    out.push_back({t, greedy_accuracy(model, checker, xs, {}, base.jobs), ds.samples.size(),
                   ds.dropped.size()});
  }
  return out;
}

struct SampleSplit {
  std::vector<size_t> identify;
  std::vector<size_t> evaluate;
};

inline constexpr uint64_t kSplitStream = 0x5e1;
inline constexpr uint64_t kRandomUnitStream = 0x7a2d;
inline constexpr uint64_t kDamageStream = 0xda3;

// Seeded identify/evaluate split; both lists sorted. With eval_rest false
// every sample is evaluated.
inline SampleSplit split_samples(size_t n, size_t identify_n, bool eval_rest, uint64_t seed) {
  if (identify_n > n || (eval_rest && identify_n == n)) {
    throw Error(ErrorCode::kInsufficientSamples,
                "cannot identify on " + std::to_string(identify_n) + " of " +
                    std::to_string(n) + " samples and still evaluate");
  }
  Rng rng(derive_seed(seed, kSplitStream, 0));
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  SampleSplit s;
  s.identify.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(identify_n));
  if (eval_rest) {
    s.evaluate.assign(perm.begin() + static_cast<std::ptrdiff_t>(identify_n), perm.end());
  } else {
    s.evaluate = perm;
  }
  std::sort(s.identify.begin(), s.identify.end());
  std::sort(s.evaluate.begin(), s.evaluate.end());
  return s;
}

// Clean and typo accuracy over `subset` under `mask`.
inline AccuracyRow evaluate_condition(const Model<float>& model, const AnswerChecker& checker,
                                      const TripletDataset& ds,
                                      const std::vector<size_t>& subset,
                                      const std::string& condition, const AblationMask& mask,
                                      size_t units, uint64_t seed, int jobs) {
  AccuracyRow row;
  row.condition = condition;
  row.units = units;
  row.seed = seed;
  row.evaluated = subset.size();
  row.clean = greedy_accuracy(model, checker, variant_view(ds, Variant::kClean, &subset), mask, jobs);
  row.typo = greedy_accuracy(model, checker, variant_view(ds, Variant::kTypo, &subset), mask, jobs);
  return row;
}

struct AblationOptions {
  UnitKind kind = UnitKind::kNeuron;
  double fraction = 0.005;
  RankBy by = RankBy::kDelta;
  size_t identify_n = 100;
  bool eval_rest = true;
  uint64_t seed = 0;
  int random_repeats = 1;
  int jobs = 1;
  size_t bins = 5;
};

struct AblationResult {
  SampleSplit split;
  std::vector<UnitScore> scores;
  Selection typo_selection;
  std::vector<Selection> random_selections;
  ExperimentReport report;
};

inline std::string condition_name(UnitKind kind, bool random) {
  return std::string(random ? "random_" : "typo_") + to_string(kind) + "s";
}

// Identifies typo units on a held-out subset, then evaluates the remaining
// samples with no ablation, with the typo units ablated, and with random
// units of the same count ablated.
inline AblationResult ablation_experiment(const Model<float>& model,
                                          const AnswerChecker& checker,
                                          const TripletDataset& ds,
                                          const AblationOptions& opt) {
  AblationResult res;
  res.split = split_samples(ds.samples.size(), opt.identify_n, opt.eval_rest, opt.seed);
  res.scores = score_units(ds, model, opt.kind, &res.split.identify, opt.jobs);
  res.typo_selection = select_top_fraction(res.scores, opt.fraction, opt.by);
  const auto& c = model.config();
  const int per_layer = opt.kind == UnitKind::kNeuron ? c.d_ffn : c.n_heads;
  auto& rep = res.report;
  rep.seeds["experiment"] = opt.seed;
  rep.config["kind"] = to_string(opt.kind);
  rep.config["fraction"] = opt.fraction;
  rep.config["by"] = to_string(opt.by);
  rep.config["identify_n"] = opt.identify_n;
  rep.config["eval_rest"] = opt.eval_rest;
  rep.config["random_repeats"] = opt.random_repeats;
  rep.config["t"] = ds.t;
  rep.config["dataset_seed"] = ds.seed;
  rep.add_row(evaluate_condition(model, checker, ds, res.split.evaluate, "none", {}, 0,
                                 opt.seed, opt.jobs));
  const std::string typo_name = condition_name(opt.kind, false);
  rep.add_row(evaluate_condition(model, checker, ds, res.split.evaluate, typo_name,
                                 res.typo_selection.mask(), res.typo_selection.size(),
                                 opt.seed, opt.jobs));
  for (int r = 0; r < opt.random_repeats; ++r) {
    const uint64_t seed = derive_seed(opt.seed, kRandomUnitStream, static_cast<uint64_t>(r));
    auto sel = select_random(opt.kind, c.n_layers, per_layer, res.typo_selection.size(), seed);
    std::string name = condition_name(opt.kind, true);
    if (r > 0) name += "#" + std::to_string(r);
    rep.add_row(evaluate_condition(model, checker, ds, res.split.evaluate, name, sel.mask(),
                                   sel.size(), seed, opt.jobs));
    res.random_selections.push_back(std::move(sel));
  }
  rep.distributions.emplace_back(typo_name,
                                 layer_distribution(res.typo_selection, c.n_layers, opt.bins));
  rep.delta_summaries.emplace_back(to_string(opt.kind), delta_stats(res.scores));
  return res;
}

struct DamageComparison {
  std::vector<size_t> undamaged;  // the sampled group members
  std::vector<size_t> damaged;
  Selection undamaged_selection;
  Selection damaged_selection;
  LayerDistribution undamaged_dist;
  LayerDistribution damaged_dist;
  std::vector<double> percent_difference;  // damaged minus undamaged, per bin
};

// Scores neurons separately on `group_size` undamaged and damaged samples and
// compares where the selected neurons sit.
inline DamageComparison damage_comparison(const Model<float>& model,
                                          const AnswerChecker& checker,
                                          const TripletDataset& ds, size_t group_size,
                                          double fraction, uint64_t seed, size_t bins = 5,
                                          int jobs = 1) {
  const auto part = partition_by_damage(ds, model, checker, group_size, jobs);
  auto draw = [&](const std::vector<size_t>& group, uint64_t stream) {
    Rng rng(derive_seed(seed, kDamageStream, stream));
    std::vector<size_t> out;
    for (size_t i : rng.sample_without_replacement(group.size(), group_size)) {
      out.push_back(group[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  DamageComparison d;
  d.undamaged = draw(part.undamaged, 0);
  d.damaged = draw(part.damaged, 1);
  const int layers = model.config().n_layers;
  d.undamaged_selection =
      select_top_fraction(score_units(ds, model, UnitKind::kNeuron, &d.undamaged, jobs), fraction);
  d.damaged_selection =
      select_top_fraction(score_units(ds, model, UnitKind::kNeuron, &d.damaged, jobs), fraction);
  d.undamaged_dist = layer_distribution(d.undamaged_selection, layers, bins);
  d.damaged_dist = layer_distribution(d.damaged_selection, layers, bins);
  for (size_t b = 0; b < bins; ++b) {
    d.percent_difference.push_back(d.damaged_dist.bins[b].percent -
                                   d.undamaged_dist.bins[b].percent);
  }
  return d;
}

}  // namespace typolab

#endif  // TYPOLAB_HARNESS_HPP_

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

#ifndef TYPOLAB_DETECTOR_HPP_
#define TYPOLAB_DETECTOR_HPP_

// Neuron and head responsibility scores, selections and layer histograms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/corpus.hpp"
#include "typolab/error.hpp"
#include "typolab/model.hpp"
#include "typolab/parallel.hpp"
#include "typolab/random.hpp"

namespace typolab {

enum class UnitKind { kNeuron, kHead };

inline std::string to_string(UnitKind k) {
  return k == UnitKind::kNeuron ? "neuron" : "head";
}

inline UnitKind unit_kind_from_string(const std::string& s) {
  if (s == "neuron" || s == "neurons") return UnitKind::kNeuron;
  if (s == "head" || s == "heads") return UnitKind::kHead;
  throw Error(ErrorCode::kInvalidArgument, "unknown unit kind '" + s + "'");
}

// Dataset score per unit: rows are layers, columns neurons or heads.
using ScoreTensor = Mat<double>;

struct UnitScore {
  UnitKind kind = UnitKind::kNeuron;
  int layer = 0;
  int index = 0;
  double s_clean = 0.0;
  double s_typo = 0.0;
  double s_split = 0.0;
  double delta = 0.0;
};

using NeuronScore = UnitScore;
using HeadScore = UnitScore;

struct Unit {
  int layer = 0;
  int index = 0;
  auto operator<=>(const Unit&) const = default;
};

// Mean over instances of the mean activation over each instance's marked
// positions. Summation order is fixed, so the result does not depend on
// `jobs`.
inline ScoreTensor neuron_dataset_score(const std::vector<const PromptInstance*>& xs,
                                        const Model<float>& model, int jobs = 1) {
  const auto& c = model.config();
  std::vector<ScoreTensor> per(xs.size());
  parallel_for(xs.size(), jobs, [&](size_t i) {
    const auto& x = *xs[i];
    TYPOLAB_REQUIRE(!x.marked.empty(), ErrorCode::kInvalidArgument,
                    "instance has no marked positions");
    const auto trace = model.forward(x.tokens);
    ScoreTensor s = ScoreTensor::Zero(c.n_layers, c.d_ffn);
    for (int l = 0; l < c.n_layers; ++l) {
      const auto& act = trace.activations[static_cast<size_t>(l)];
      for (size_t m : x.marked) {
        s.row(l) += act.row(static_cast<Eigen::Index>(m)).cast<double>();
      }
    }
    per[i] = s / static_cast<double>(x.marked.size());
  });
  ScoreTensor total = ScoreTensor::Zero(c.n_layers, c.d_ffn);
  for (const auto& s : per) total += s;
  if (!xs.empty()) total /= static_cast<double>(xs.size());
  return total;
}

// D_KL(p || U_m) / log2 m for a row over m keys, in [0, 1]. A single-key row
// contributes 0.
template <class Row>
double normalized_kl_row(const Row& p, Eigen::Index m) {
  if (m <= 1) return 0.0;
  double kl = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double pj = static_cast<double>(p(j));
    if (pj > 0.0) kl += pj * std::log2(pj * static_cast<double>(m));
  }
  return std::clamp(kl / std::log2(static_cast<double>(m)), 0.0, 1.0);
}

struct HeadScoreOptions {
  // Divide each instance's summed contribution by its number of query rows.
  bool per_position_average = false;
};

// Per instance, the sum over prompt query positions (through the delimiter
// before the answer) of the normalized KL between the attention row and the
// uniform distribution over its keys; then the mean over instances.
inline ScoreTensor head_dataset_score(const std::vector<const PromptInstance*>& xs,
                                      const Model<float>& model, int jobs = 1,
                                      HeadScoreOptions opt = {}) {
  const auto& c = model.config();
  std::vector<ScoreTensor> per(xs.size());
  parallel_for(xs.size(), jobs, [&](size_t i) {
    const auto& x = *xs[i];
    const auto prompt = x.prompt_tokens();
    const auto trace = model.forward(std::span<const TokenId>(prompt));
    ScoreTensor s = ScoreTensor::Zero(c.n_layers, c.n_heads);
    const auto rows = static_cast<Eigen::Index>(prompt.size());
    for (int l = 0; l < c.n_layers; ++l) {
      for (int h = 0; h < c.n_heads; ++h) {
        const auto& a = trace.attention[static_cast<size_t>(l)][static_cast<size_t>(h)];
        double sum = 0.0;
        for (Eigen::Index q = 0; q < rows; ++q) sum += normalized_kl_row(a.row(q), q + 1);
        s(l, h) = opt.per_position_average ? sum / static_cast<double>(rows) : sum;
      }
    }
    per[i] = std::move(s);
  });
  ScoreTensor total = ScoreTensor::Zero(c.n_layers, c.n_heads);
  for (const auto& s : per) total += s;
  if (!xs.empty()) total /= static_cast<double>(xs.size());
  return total;
}

// delta = s_typo - max(s_clean, s_split), elementwise.
inline std::vector<UnitScore> unit_delta(UnitKind kind, const ScoreTensor& clean,
                                         const ScoreTensor& typo,
                                         const ScoreTensor& split) {
  if (clean.rows() != typo.rows() || clean.cols() != typo.cols() ||
      clean.rows() != split.rows() || clean.cols() != split.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "score tensors differ in shape");
  }
  std::vector<UnitScore> out;
  out.reserve(static_cast<size_t>(clean.size()));
  for (Eigen::Index l = 0; l < clean.rows(); ++l) {
    for (Eigen::Index n = 0; n < clean.cols(); ++n) {
      UnitScore u;
      u.kind = kind;
      u.layer = static_cast<int>(l);
      u.index = static_cast<int>(n);
      u.s_clean = clean(l, n);
      u.s_typo = typo(l, n);
      u.s_split = split(l, n);
      u.delta = u.s_typo - std::max(u.s_clean, u.s_split);
      out.push_back(u);
    }
  }
  return out;
}

inline std::vector<NeuronScore> neuron_delta(const ScoreTensor& clean,
                                             const ScoreTensor& typo,
                                             const ScoreTensor& split) {
  return unit_delta(UnitKind::kNeuron, clean, typo, split);
}

inline std::vector<HeadScore> head_delta(const ScoreTensor& clean,
                                         const ScoreTensor& typo,
                                         const ScoreTensor& split) {
  return unit_delta(UnitKind::kHead, clean, typo, split);
}

enum class RankBy { kDelta, kAbsDelta };

inline std::string to_string(RankBy b) {
  return b == RankBy::kDelta ? "delta" : "abs_delta";
}

inline RankBy rank_by_from_string(const std::string& s) {
  if (s == "delta") return RankBy::kDelta;
  if (s == "abs_delta") return RankBy::kAbsDelta;
  throw Error(ErrorCode::kInvalidArgument, "unknown ranking '" + s + "'");
}

struct Selection {
  UnitKind kind = UnitKind::kNeuron;
  std::vector<Unit> units;    // best first
  std::vector<double> keys;   // ranking key per unit
  size_t total = 0;           // number of candidate units
  std::string rule;           // "top_fraction", "threshold" or "random"
  double fraction = 0.0;
  double threshold = 0.0;
  RankBy by = RankBy::kDelta;

  size_t size() const { return units.size(); }

  AblationMask mask() const {
    AblationMask m;
    for (const auto& u : units) {
      (kind == UnitKind::kNeuron ? m.neurons : m.heads).insert({u.layer, u.index});
    }
    return m;
  }
};

// Number of units kept by a fraction: floor(fraction * total), at least one.
inline size_t selection_count(double fraction, size_t total) {
  TYPOLAB_REQUIRE(fraction > 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument,
                  "fraction must lie in (0, 1]");
  const auto k = static_cast<size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  return std::min(total, std::max<size_t>(1, k));
}

namespace detail {

inline double rank_key(const UnitScore& s, RankBy by) {
  return by == RankBy::kDelta ? s.delta : std::abs(s.delta);
}

inline std::vector<size_t> ranked_order(const std::vector<UnitScore>& scores, RankBy by) {
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const double ka = rank_key(scores[a], by);
    const double kb = rank_key(scores[b], by);
    if (ka != kb) return ka > kb;
    return std::pair(scores[a].layer, scores[a].index) <
           std::pair(scores[b].layer, scores[b].index);
  });
  return order;
}

inline UnitKind common_kind(const std::vector<UnitScore>& scores) {
  const UnitKind k = scores.empty() ? UnitKind::kNeuron : scores.front().kind;
  for (const auto& s : scores) {
    TYPOLAB_REQUIRE(s.kind == k, ErrorCode::kInvalidArgument, "mixed unit kinds");
  }
  return k;
}

}  // namespace detail

// Top units by delta (or |delta|); ties go to the lower (layer, index).
inline Selection select_top_fraction(const std::vector<UnitScore>& scores,
                                     double fraction, RankBy by = RankBy::kDelta) {
  Selection sel;
  sel.kind = detail::common_kind(scores);
  sel.total = scores.size();
  sel.rule = "top_fraction";
  sel.fraction = fraction;
  sel.by = by;
  const size_t k = selection_count(fraction, scores.size());
  const auto order = detail::ranked_order(scores, by);
  for (size_t i = 0; i < k && i < order.size(); ++i) {
    const auto& s = scores[order[i]];
    sel.units.push_back({s.layer, s.index});
    sel.keys.push_back(detail::rank_key(s, by));
  }
  return sel;
}

// Every unit with delta >= threshold, best first.
inline Selection select_by_threshold(const std::vector<UnitScore>& scores,
                                     double threshold) {
  TYPOLAB_REQUIRE(!std::isnan(threshold), ErrorCode::kInvalidArgument,
                  "threshold is NaN");
  Selection sel;
  sel.kind = detail::common_kind(scores);
  sel.total = scores.size();
  sel.rule = "threshold";
  sel.threshold = threshold;
  for (size_t i : detail::ranked_order(scores, RankBy::kDelta)) {
    if (!(scores[i].delta >= threshold)) break;
    sel.units.push_back({scores[i].layer, scores[i].index});
    sel.keys.push_back(scores[i].delta);
  }
  return sel;
}

// Uniform draw of `count` units out of layers x per_layer, sorted.
inline Selection select_random(UnitKind kind, int layers, int per_layer, size_t count,
                               uint64_t seed) {
  const auto total = static_cast<size_t>(layers) * static_cast<size_t>(per_layer);
  TYPOLAB_REQUIRE(count <= total, ErrorCode::kInvalidArgument,
                  "random selection larger than the unit count");
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(total, count);
  std::sort(picks.begin(), picks.end());
  Selection sel;
  sel.kind = kind;
  sel.total = total;
  sel.rule = "random";
  for (size_t p : picks) {
    sel.units.push_back({static_cast<int>(p / static_cast<size_t>(per_layer)),
                         static_cast<int>(p % static_cast<size_t>(per_layer))});
    sel.keys.push_back(0.0);
  }
  return sel;
}

struct LayerBin {
  double depth_begin = 0.0;
  double depth_end = 0.0;
  size_t count = 0;
  double percent = 0.0;
};

struct LayerDistribution {
  std::vector<LayerBin> bins;
  size_t selected = 0;
  bool percent_defined = true;  // false for an empty selection
};

// Bin index of a layer on relative depth layer / (n_layers - 1).
inline size_t depth_bin(int layer, int n_layers, size_t bins) {
  if (n_layers <= 1) return 0;
  const auto num = static_cast<size_t>(layer) * bins;
  return std::min(bins - 1, num / static_cast<size_t>(n_layers - 1));
}

inline LayerDistribution layer_distribution(const std::vector<Unit>& units, int n_layers,
                                            size_t bins) {
  TYPOLAB_REQUIRE(bins >= 1 && n_layers >= 1, ErrorCode::kInvalidArgument,
                  "bins and n_layers must be positive");
  LayerDistribution d;
  for (size_t b = 0; b < bins; ++b) {
    d.bins.push_back({static_cast<double>(b) / static_cast<double>(bins),
                      static_cast<double>(b + 1) / static_cast<double>(bins), 0, 0.0});
  }
  for (const auto& u : units) {
    TYPOLAB_REQUIRE(u.layer >= 0 && u.layer < n_layers, ErrorCode::kInvalidArgument,
                    "unit layer out of range");
    ++d.bins[depth_bin(u.layer, n_layers, bins)].count;
  }
  d.selected = units.size();
  d.percent_defined = !units.empty();
  if (d.percent_defined) {
    for (auto& b : d.bins) {
      b.percent = 100.0 * static_cast<double>(b.count) / static_cast<double>(units.size());
    }
  }
  return d;
}

inline LayerDistribution layer_distribution(const Selection& sel, int n_layers,
                                            size_t bins) {
  return layer_distribution(sel.units, n_layers, bins);
}

struct DeltaStats {
  size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double skewness = 0.0;
};

inline DeltaStats delta_stats(const std::vector<UnitScore>& scores) {
  DeltaStats st;
  st.count = scores.size();
  if (scores.empty()) return st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -st.min;
  double sum = 0.0;
  for (const auto& s : scores) {
    sum += s.delta;
    st.min = std::min(st.min, s.delta);
    st.max = std::max(st.max, s.delta);
  }
  st.mean = sum / static_cast<double>(scores.size());
  double m2 = 0.0, m3 = 0.0;
  for (const auto& s : scores) {
    const double d = s.delta - st.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(scores.size());
  m3 /= static_cast<double>(scores.size());
  st.sd = std::sqrt(m2);
  st.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return st;
}

struct DamagePartition {
  std::vector<size_t> undamaged;  // sample indices whose typo variant is answered
  std::vector<size_t> damaged;
};

// Splits samples by whether the typo variant is still answered correctly.
// Throws InsufficientSamples if either group is below `min_group`.
inline DamagePartition partition_by_damage(const TripletDataset& ds,
                                           const Model<float>& model,
                                           const AnswerChecker& checker,
                                           size_t min_group = 0, int jobs = 1) {
  std::vector<char> ok(ds.samples.size(), 0);
  parallel_for(ds.samples.size(), jobs, [&](size_t i) {
    ok[i] = checker.correct(model, ds.samples[i].typo) ? 1 : 0;
  });
  DamagePartition p;
  for (size_t i = 0; i < ok.size(); ++i) (ok[i] ? p.undamaged : p.damaged).push_back(i);
  if (p.undamaged.size() < min_group || p.damaged.size() < min_group) {
    throw Error(ErrorCode::kInsufficientSamples,
                "need " + std::to_string(min_group) + " samples per group, have " +
                    std::to_string(p.undamaged.size()) + " undamaged and " +
                    std::to_string(p.damaged.size()) + " damaged");
  }
  return p;
}

// Instances of one variant for a subset of samples (all when `subset` is
// null).
inline std::vector<const PromptInstance*> variant_view(
    const TripletDataset& ds, Variant v, const std::vector<size_t>* subset = nullptr) {
  std::vector<const PromptInstance*> out;
  auto pick = [&](const TripletSample& s) {
    switch (v) {
      case Variant::kClean: return &s.clean;
      case Variant::kTypo: return &s.typo;
      case Variant::kSplit: return &s.split;
    }
    return &s.clean;
  };
  if (subset == nullptr) {
    for (const auto& s : ds.samples) out.push_back(pick(s));
  } else {
    for (size_t i : *subset) out.push_back(pick(ds.samples.at(i)));
  }
  return out;
}

// Scores of every neuron or head over the three variants of a dataset.
inline std::vector<UnitScore> score_units(const TripletDataset& ds, const Model<float>& model,
                                          UnitKind kind,
                                          const std::vector<size_t>* subset = nullptr,
                                          int jobs = 1, HeadScoreOptions head_opt = {}) {
  auto score = [&](Variant v) {
    const auto xs = variant_view(ds, v, subset);
    return kind == UnitKind::kNeuron ? neuron_dataset_score(xs, model, jobs)
                                     : head_dataset_score(xs, model, jobs, head_opt);
  };
  const auto clean = score(Variant::kClean);
  const auto typo = score(Variant::kTypo);
  const auto split = score(Variant::kSplit);
  return unit_delta(kind, clean, typo, split);
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string scores_csv(const std::vector<UnitScore>& scores) {
  std::string out = "kind,layer,index,s_clean,s_typo,s_split,delta\n";
  for (const auto& s : scores) {
    out += to_string(s.kind) + "," + std::to_string(s.layer) + "," +
           std::to_string(s.index) + "," + format_number(s.s_clean) + "," +
           format_number(s.s_typo) + "," + format_number(s.s_split) + "," +
           format_number(s.delta) + "\n";
  }
  return out;
}

// Parses the CSV written by scores_csv.
inline std::vector<UnitScore> parse_scores_csv(std::string_view text) {
  std::vector<UnitScore> out;
  size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    if (++line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    size_t a = 0;
    for (size_t b; (b = line.find(',', a)) != std::string::npos; a = b + 1) {
      f.push_back(line.substr(a, b - a));
    }
    f.push_back(line.substr(a));
    if (f.size() != 7) {
      throw Error(ErrorCode::kParse, "scores line " + std::to_string(line_no) +
                                         ": expected 7 fields");
    }
    try {
      UnitScore s;
      s.kind = unit_kind_from_string(f[0]);
      s.layer = std::stoi(f[1]);
      s.index = std::stoi(f[2]);
      s.s_clean = std::stod(f[3]);
      s.s_typo = std::stod(f[4]);
      s.s_split = std::stod(f[5]);
      s.delta = std::stod(f[6]);
      out.push_back(s);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse,
                  "scores line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::json to_json(const DeltaStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd},
          {"min", s.min},     {"max", s.max},   {"skewness", s.skewness}};
}

inline nlohmann::json to_json(const LayerDistribution& d) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : d.bins) {
    bins.push_back({{"depth_begin", b.depth_begin},
                    {"depth_end", b.depth_end},
                    {"count", b.count},
                    {"percent", d.percent_defined ? nlohmann::json(b.percent)
                                                  : nlohmann::json(nullptr)}});
  }
  return {{"bins", bins}, {"selected", d.selected}, {"percent_defined", d.percent_defined}};
}

inline LayerDistribution layer_distribution_from_json(const nlohmann::json& j) {
  LayerDistribution d;
  d.selected = j.at("selected").get<size_t>();
  d.percent_defined = j.at("percent_defined").get<bool>();
  for (const auto& b : j.at("bins")) {
    d.bins.push_back({b.at("depth_begin").get<double>(), b.at("depth_end").get<double>(),
                      b.at("count").get<size_t>(),
                      b.at("percent").is_null() ? 0.0 : b.at("percent").get<double>()});
  }
  return d;
}

inline nlohmann::json to_json(const Selection& sel) {
  nlohmann::json units = nlohmann::json::array();
  for (size_t i = 0; i < sel.units.size(); ++i) {
    units.push_back({{"layer", sel.units[i].layer},
                     {"index", sel.units[i].index},
                     {"key", sel.keys[i]}});
  }
  nlohmann::json j = {{"kind", to_string(sel.kind)},
                      {"rule", sel.rule},
                      {"total", sel.total},
                      {"count", sel.units.size()},
                      {"units", units}};
  if (sel.rule == "top_fraction") {
    j["fraction"] = sel.fraction;
    j["by"] = to_string(sel.by);
  } else if (sel.rule == "threshold") {
    j["threshold"] = sel.threshold;
  }
  return j;
}

inline Selection selection_from_json(const nlohmann::json& j) {
  try {
    Selection sel;
    sel.kind = unit_kind_from_string(j.at("kind").get<std::string>());
    sel.rule = j.at("rule").get<std::string>();
    sel.total = j.at("total").get<size_t>();
    sel.fraction = j.value("fraction", 0.0);
    sel.threshold = j.value("threshold", 0.0);
    sel.by = rank_by_from_string(j.value("by", std::string("delta")));
    for (const auto& u : j.at("units")) {
      sel.units.push_back({u.at("layer").get<int>(), u.at("index").get<int>()});
      sel.keys.push_back(u.value("key", 0.0));
    }
    return sel;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad selection JSON: ") + e.what());
  }
}

}  // namespace typolab

#endif  // TYPOLAB_DETECTOR_HPP_

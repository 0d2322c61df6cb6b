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

#ifndef TYPOLAB_PIPELINE_HPP_
#define TYPOLAB_PIPELINE_HPP_

// Pipeline stages shared by the command-line tool and the tests, plus a
// config-driven end-to-end run.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/checkpoint.hpp"
#include "typolab/corpus.hpp"
#include "typolab/dataset_io.hpp"
#include "typolab/detector.hpp"
#include "typolab/harness.hpp"
#include "typolab/svg.hpp"
#include "typolab/tokenizer.hpp"
#include "typolab/train.hpp"

namespace typolab {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 3e-3;
  int warmup_steps = 100;
  double weight_decay = 0.0;
  double min_accuracy = 0.95;
  int eval_every = 0;
  double stop_accuracy = 2.0;
  // Each epoch a prompt is swapped for a copy with 1..augment_max_typos random
  // insertions with this probability.
  double augment_prob = 0.0;
  size_t augment_max_typos = 4;
  // Probability of a prompt with 1..resegment_max_words words split into
  // non-canonical tokens.
  double resegment_prob = 0.0;
  size_t resegment_max_words = 4;
};

struct PipelineConfig {
  uint64_t seed = 7;
  std::string corpus_path;  // empty: synthetic corpus
  SynthOptions synth;
  size_t vocab_size = 2048;
  ModelConfig model;
  TrainConfig train;
  std::string prompt_template = std::string(PromptTemplate::kDefault);
  size_t k = 1000;
  std::vector<size_t> curve_t = {0, 1, 2, 4, 8, 16};
  std::vector<size_t> triplet_t = {1, 16};
  std::string alphabet = std::string(kDefaultAlphabet);
  double neuron_fraction = 0.005;
  double head_fraction = 0.015;
  size_t identify_n = 100;
  int random_repeats = 1;
  size_t bins = 5;
  int jobs = 1;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json model;
  to_json(model, c.model);
  return {{"seed", c.seed},
          {"corpus",
           {{"path", c.corpus_path},
            {"synthetic_size", c.synth.size},
            {"min_words", c.synth.min_words},
            {"max_words", c.synth.max_words},
            {"zipf_exponent", c.synth.zipf_exponent}}},
          {"vocab_size", c.vocab_size},
          {"model", model},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"learning_rate", c.train.learning_rate},
            {"warmup_steps", c.train.warmup_steps},
            {"weight_decay", c.train.weight_decay},
            {"min_accuracy", c.train.min_accuracy},
            {"eval_every", c.train.eval_every},
            {"stop_accuracy", c.train.stop_accuracy},
            {"augment_prob", c.train.augment_prob},
            {"augment_max_typos", c.train.augment_max_typos},
            {"resegment_prob", c.train.resegment_prob},
            {"resegment_max_words", c.train.resegment_max_words}}},
          {"template", c.prompt_template},
          {"k", c.k},
          {"curve_t", c.curve_t},
          {"triplet_t", c.triplet_t},
          {"alphabet", c.alphabet},
          {"neuron_fraction", c.neuron_fraction},
          {"head_fraction", c.head_fraction},
          {"identify_n", c.identify_n},
          {"random_repeats", c.random_repeats},
          {"bins", c.bins},
          {"jobs", c.jobs}};
}

// Missing keys keep their defaults.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("corpus")) {
      const auto& k = j.at("corpus");
      c.corpus_path = k.value("path", c.corpus_path);
      c.synth.size = k.value("synthetic_size", c.synth.size);
      c.synth.min_words = k.value("min_words", c.synth.min_words);
      c.synth.max_words = k.value("max_words", c.synth.max_words);
      c.synth.zipf_exponent = k.value("zipf_exponent", c.synth.zipf_exponent);
    }
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    if (j.contains("model")) from_json(j.at("model"), c.model);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.warmup_steps = t.value("warmup_steps", c.train.warmup_steps);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.min_accuracy = t.value("min_accuracy", c.train.min_accuracy);
      c.train.eval_every = t.value("eval_every", c.train.eval_every);
      c.train.stop_accuracy = t.value("stop_accuracy", c.train.stop_accuracy);
      c.train.augment_prob = t.value("augment_prob", c.train.augment_prob);
      c.train.augment_max_typos = t.value("augment_max_typos", c.train.augment_max_typos);
      c.train.resegment_prob = t.value("resegment_prob", c.train.resegment_prob);
      c.train.resegment_max_words =
          t.value("resegment_max_words", c.train.resegment_max_words);
    }
    c.prompt_template = j.value("template", c.prompt_template);
    c.k = j.value("k", c.k);
    c.curve_t = j.value("curve_t", c.curve_t);
    c.triplet_t = j.value("triplet_t", c.triplet_t);
    c.alphabet = j.value("alphabet", c.alphabet);
    c.neuron_fraction = j.value("neuron_fraction", c.neuron_fraction);
    c.head_fraction = j.value("head_fraction", c.head_fraction);
    c.identify_n = j.value("identify_n", c.identify_n);
    c.random_repeats = j.value("random_repeats", c.random_repeats);
    c.bins = j.value("bins", c.bins);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad pipeline config: ") + e.what());
  }
  return c;
}

// Text the vocabulary is trained on: every rendered prompt.
inline std::vector<std::string> vocab_training_texts(const std::vector<WordDef>& pairs,
                                                     const PromptTemplate& tmpl) {
  std::vector<std::string> texts;
  texts.reserve(pairs.size());
  for (const auto& p : pairs) texts.push_back(tmpl.render(p.definition, p.word));
  return texts;
}

// Prompt tokens and the completion (answer plus closing delimiter) per pair.
inline std::vector<TrainSample> training_samples(const Vocab& vocab, const PromptTemplate& tmpl,
                                                 const std::vector<WordDef>& pairs) {
  std::vector<TrainSample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto inst = make_instance(vocab, tmpl, p.definition, p.word);
    out.push_back({inst.prompt_tokens(), inst.completion_tokens()});
  }
  return out;
}

inline TrainOptions make_train_options(const TrainConfig& tc, uint64_t seed, const Vocab& vocab,
                                       const PromptTemplate& tmpl,
                                       const std::vector<WordDef>& pairs,
                                       const std::string& alphabet) {
  TrainOptions o;
  o.epochs = tc.epochs;
  o.seed = seed;
  o.batch_size = tc.batch_size;
  o.learning_rate = tc.learning_rate;
  o.warmup_steps = tc.warmup_steps;
  o.weight_decay = tc.weight_decay;
  o.min_accuracy = tc.min_accuracy;
  o.eval_every = tc.eval_every;
  o.stop_accuracy = tc.stop_accuracy;
  TYPOLAB_REQUIRE(tc.augment_prob >= 0.0 && tc.resegment_prob >= 0.0 &&
                      tc.augment_prob + tc.resegment_prob <= 1.0,
                  ErrorCode::kInvalidArgument, "augmentation probabilities exceed 1");
  o.augment_prob = tc.augment_prob + tc.resegment_prob;
  if (o.augment_prob > 0.0) {
    const double typo_share = tc.augment_prob / o.augment_prob;
    o.augment = [&vocab, &tmpl, &pairs, alphabet, tc, typo_share](size_t i, Rng& rng) {
      if (rng.uniform() < typo_share) {
        const auto def =
            random_typo_definition(pairs[i].definition, rng, tc.augment_max_typos, alphabet);
        return make_instance(vocab, tmpl, def, pairs[i].word).prompt_tokens();
      }
      const auto inst = make_instance(vocab, tmpl, pairs[i].definition, pairs[i].word);
      return random_resegmentation(vocab, inst, rng, tc.resegment_max_words);
    };
  }
  return o;
}

// Checkpoint bundling the weights with the vocabulary and template used.
inline Checkpoint make_checkpoint(Weights<float> weights, const Vocab& vocab,
                                  const PromptTemplate& tmpl, nlohmann::json extra = {}) {
  Checkpoint ckpt;
  ckpt.weights = std::move(weights);
  ckpt.metadata = extra.is_object() ? extra : nlohmann::json::object();
  ckpt.metadata["vocab"] = vocab.serialize();
  ckpt.metadata["template"] = tmpl.pattern();
  return ckpt;
}

inline Vocab checkpoint_vocab(const Checkpoint& ckpt) {
  TYPOLAB_REQUIRE(ckpt.metadata.contains("vocab"), ErrorCode::kBadCheckpoint,
                  "checkpoint carries no vocabulary");
  return Vocab::parse(ckpt.metadata.at("vocab").get<std::string>());
}

inline PromptTemplate checkpoint_template(const Checkpoint& ckpt) {
  return PromptTemplate(
      ckpt.metadata.value("template", std::string(PromptTemplate::kDefault)));
}

struct RunAllResult {
  std::vector<std::string> files;  // data files written, relative to out_dir
  ExperimentReport report;
};

// vocab -> train -> clean set -> triplets -> scores -> ablations -> plots.
// Everything except `report_wall_clock` output is a pure function of the
// config.
// A non-empty `cache_dir` keeps trained checkpoints keyed by everything that
// determines them, so repeated runs skip training.
inline RunAllResult run_all(const PipelineConfig& cfg, const std::string& out_dir,
                            const std::function<void(const std::string&)>& log = {},
                            bool report_wall_clock = false,
                            const std::string& cache_dir = "") {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  RunAllResult res;
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  auto put = [&](const std::string& name, const std::string& contents) {
    write_file((fs::path(out_dir) / name).string(), contents);
    res.files.push_back(name);
  };

  const PromptTemplate tmpl(cfg.prompt_template);
  std::vector<WordDef> pairs;
  if (cfg.corpus_path.empty()) {
    SynthOptions so = cfg.synth;
    so.seed = derive_seed(cfg.seed, 0xc0, 0);
    pairs = synthesize_corpus(so);
  } else {
    pairs = ingest(cfg.corpus_path);
  }
  put("corpus.tsv", format_corpus_tsv(pairs));
  say("corpus: " + std::to_string(pairs.size()) + " pairs");

  const Vocab vocab = Vocab::train(vocab_training_texts(pairs, tmpl), cfg.vocab_size);
  put("vocab.txt", vocab.serialize());
  say("vocab: " + std::to_string(vocab.size()) + " tokens");

  ModelConfig mc = cfg.model;
  mc.vocab_size = static_cast<int>(vocab.size());
  const auto samples = training_samples(vocab, tmpl, pairs);
  auto topt = make_train_options(cfg.train, derive_seed(cfg.seed, 0x7a, 0), vocab, tmpl, pairs,
                                 cfg.alphabet);
  topt.on_epoch = [&](const EpochStats& s) {
    say("epoch " + std::to_string(s.epoch) + " loss " + format_number(s.mean_loss) +
        (s.accuracy ? " acc " + format_number(*s.accuracy) : ""));
  };
  nlohmann::json train_key = to_json(cfg);
  for (const char* k : {"k", "curve_t", "triplet_t", "neuron_fraction", "head_fraction",
                        "identify_n", "random_repeats", "bins", "jobs"}) {
    train_key.erase(k);
  }
  train_key["corpus_hash"] = hash_string(format_corpus_tsv(pairs));
  const std::string cache_file =
      cache_dir.empty() ? ""
                        : (fs::path(cache_dir) / ("ckpt-" + hash_string(train_key.dump()) + ".bin"))
                              .string();
  Checkpoint ckpt;
  if (!cache_file.empty() && fs::exists(cache_file)) {
    ckpt = load_checkpoint(cache_file);
    say("checkpoint from cache " + cache_file);
  } else {
    auto trained = train_toy(samples, mc, topt);
    say("train accuracy " + format_number(trained.accuracy));
    ckpt = make_checkpoint(trained.weights, vocab, tmpl,
                           {{"train_accuracy", trained.accuracy},
                            {"epochs_run", trained.epochs_run}});
    if (!cache_file.empty()) {
      fs::create_directories(cache_dir);
      save_checkpoint(cache_file, ckpt);
    }
  }
  put("model.ckpt", serialize_checkpoint(ckpt));
  const std::string ckpt_hash = checkpoint_hash(ckpt);
  const Model<float> model(ckpt.weights);
  const AnswerChecker checker{&vocab, &tmpl};

  const auto sel = select_answerable(pairs, model, vocab, tmpl, cfg.k, cfg.jobs);
  std::vector<WordDef> clean;
  for (size_t i : sel.indices) clean.push_back(pairs[i]);
  put("clean.tsv", format_corpus_tsv(clean));
  say("answerable: " + std::to_string(sel.answerable) + ", kept " + std::to_string(clean.size()));

  TripletOptions tro;
  tro.seed = derive_seed(cfg.seed, 0x71, 0);
  tro.alphabet = cfg.alphabet;
  tro.jobs = cfg.jobs;
  const auto rankings = rank_all(vocab, tmpl, clean, model, tro.aggregate, cfg.jobs);

  auto& rep = res.report;
  rep.config = to_json(cfg);
  rep.config["model"]["vocab_size"] = mc.vocab_size;
  rep.checkpoint_hash = ckpt_hash;
  rep.seeds = {{"global", cfg.seed}, {"triplets", tro.seed}, {"train", topt.seed}};
  rep.curve = accuracy_curve(model, vocab, tmpl, clean, cfg.curve_t, tro, &rankings);
  {
    const auto p = plot_accuracy_curve({{"toy", rep.curve}});
    put("accuracy_curve.svg", p.svg);
    put("accuracy_curve.csv", p.csv);
  }

  std::vector<std::pair<std::string, LayerDistribution>> hist;
  for (size_t t : cfg.triplet_t) {
    const std::string tag = "t" + std::to_string(t);
    tro.t = t;
    const auto ds = build_triplets(vocab, tmpl, clean, model, tro, &rankings);
    put("triplets_" + tag + ".jsonl", triplets_jsonl(ds));
    put(meta_path_for("triplets_" + tag + ".jsonl"), triplets_meta(ds).dump(2) + "\n");
    say(tag + ": " + std::to_string(ds.samples.size()) + " triplets, " +
        std::to_string(ds.dropped.size()) + " dropped");

    const auto neurons = score_units(ds, model, UnitKind::kNeuron, nullptr, cfg.jobs);
    const auto heads = score_units(ds, model, UnitKind::kHead, nullptr, cfg.jobs);
    put("scores_neurons_" + tag + ".csv", scores_csv(neurons));
    put("scores_heads_" + tag + ".csv", scores_csv(heads));
    const auto nsel = select_top_fraction(neurons, cfg.neuron_fraction, RankBy::kDelta);
    const auto hsel = select_top_fraction(heads, cfg.head_fraction, RankBy::kAbsDelta);
    nlohmann::json meta = {{"t", t}, {"seed", tro.seed}, {"checkpoint_hash", ckpt_hash}};
    auto nj = to_json(nsel);
    auto hj = to_json(hsel);
    nj.update(meta);
    hj.update(meta);
    put("selection_neurons_" + tag + ".json", nj.dump(2) + "\n");
    put("selection_heads_" + tag + ".json", hj.dump(2) + "\n");
    rep.delta_summaries.emplace_back("neurons_" + tag, delta_stats(neurons));
    rep.delta_summaries.emplace_back("heads_" + tag, delta_stats(heads));
    const auto dist = layer_distribution(nsel, mc.n_layers, cfg.bins);
    rep.distributions.emplace_back("neurons_" + tag, dist);
    hist.emplace_back(tag, dist);
    {
      const auto p = plot_delta_heatmap(heads, "Delta per head, t=" + std::to_string(t));
      put("delta_heatmap_" + tag + ".svg", p.svg);
      put("delta_heatmap_" + tag + ".csv", p.csv);
    }

    for (UnitKind kind : {UnitKind::kNeuron, UnitKind::kHead}) {
      AblationOptions ao;
      ao.kind = kind;
      ao.fraction = kind == UnitKind::kNeuron ? cfg.neuron_fraction : cfg.head_fraction;
      ao.by = kind == UnitKind::kNeuron ? RankBy::kDelta : RankBy::kAbsDelta;
      ao.identify_n = cfg.identify_n;
      ao.seed = derive_seed(cfg.seed, 0xab, t);
      ao.random_repeats = cfg.random_repeats;
      ao.jobs = cfg.jobs;
      ao.bins = cfg.bins;
      const auto ab = ablation_experiment(model, checker, ds, ao);
      for (auto row : ab.report.rows) {
        row.condition = tag + "/" + row.condition;
        if (row.condition == tag + "/none" && kind == UnitKind::kHead) continue;
        rep.add_row(row);
      }
    }
  }
  {
    const auto p = plot_layer_hist(hist, "Typo neurons per relative depth");
    put("layer_hist.svg", p.svg);
    put("layer_hist.csv", p.csv);
  }
  if (report_wall_clock) {
    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  put("report.json", rep.to_json().dump(2) + "\n");
  put("report.txt", rep.text_table());
  return res;
}

}  // namespace typolab

#endif  // TYPOLAB_PIPELINE_HPP_

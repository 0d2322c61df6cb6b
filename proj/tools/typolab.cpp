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

// Command-line front end: corpus, vocabulary, training, triplets, scoring,
// ablation and plots.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "typolab/typolab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace typolab;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

// Relative output paths land under TYPOLAB_OUT_DIR when it is set.
std::string out_path(const std::string& p) {
  const std::string root = env_or("TYPOLAB_OUT_DIR", "");
  fs::path path(p);
  if (!root.empty() && path.is_relative()) path = fs::path(root) / path;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  return path.string();
}

void write_out(const std::string& p, const std::string& contents) {
  const auto path = out_path(p);
  write_file(path, contents);
  std::cerr << "wrote " << path << "\n";
}

struct Loaded {
  Checkpoint ckpt;
  Vocab vocab;
  PromptTemplate tmpl;
  std::string hash;
};

Loaded load_model(const std::string& path) {
  Loaded l{load_checkpoint(path), Vocab::byte_level(), PromptTemplate(), ""};
  l.vocab = checkpoint_vocab(l.ckpt);
  l.tmpl = checkpoint_template(l.ckpt);
  l.hash = checkpoint_hash(l.ckpt);
  return l;
}

void print_stats(const std::string& label, const DeltaStats& s) {
  std::printf("%s: units=%zu average=%.6g SD=%.6g min=%.6g max=%.6g\n", label.c_str(),
              s.count, s.mean, s.sd, s.min, s.max);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typolab: typo neurons and typo heads in a toy transformer"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for per-sample work")
      ->check(CLI::PositiveNumber);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic word/definition corpus (TSV)");
  SynthOptions synth;
  std::string gen_out = "corpus.tsv";
  gen->add_option("--size", synth.size, "Number of pairs");
  gen->add_option("--seed", synth.seed, "Seed");
  gen->add_option("--min-words", synth.min_words, "Shortest definition");
  gen->add_option("--max-words", synth.max_words, "Longest definition");
  gen->add_option("--out", gen_out, "Output TSV");

  // build-vocab
  auto* bv = app.add_subcommand("build-vocab", "Train a byte-pair vocabulary on a corpus");
  std::string bv_corpus, bv_out = "vocab.txt", bv_template(PromptTemplate::kDefault);
  size_t bv_size = 2048;
  bv->add_option("--corpus", bv_corpus, "Corpus (TSV or JSONL)")->required();
  bv->add_option("--size", bv_size, "Vocabulary size including <bos> and the 256 bytes");
  bv->add_option("--template", bv_template, "Prompt template");
  bv->add_option("--out", bv_out, "Output vocabulary file");

  // train
  auto* tr = app.add_subcommand("train", "Train the toy model on corpus prompts");
  std::string tr_corpus, tr_vocab, tr_config, tr_out = "model.ckpt",
                                              tr_template(PromptTemplate::kDefault);
  std::string tr_alphabet(kDefaultAlphabet), tr_ffn = "gated";
  ModelConfig mc;
  TrainConfig tc;
  uint64_t tr_seed = 0;
  bool tr_nopos = false;
  tr->add_option("--corpus", tr_corpus, "Corpus (TSV or JSONL)")->required();
  tr->add_option("--vocab", tr_vocab, "Vocabulary file")->required();
  tr->add_option("--config", tr_config, "JSON with \"model\" and \"train\" sections");
  tr->add_option("--layers", mc.n_layers, "Layers");
  tr->add_option("--heads", mc.n_heads, "Heads per layer");
  tr->add_option("--d-model", mc.d_model, "Residual width");
  tr->add_option("--d-ffn", mc.d_ffn, "Neurons per layer");
  tr->add_option("--max-seq", mc.max_seq, "Longest sequence");
  tr->add_option("--ffn", tr_ffn, "gated or plain-gelu");
  tr->add_flag("--no-positional", tr_nopos, "Disable position embeddings");
  tr->add_option("--epochs", tc.epochs, "Epochs");
  tr->add_option("--batch", tc.batch_size, "Batch size");
  tr->add_option("--lr", tc.learning_rate, "Peak learning rate");
  tr->add_option("--min-accuracy", tc.min_accuracy, "Fail below this greedy accuracy");
  tr->add_option("--augment-prob", tc.augment_prob, "Probability of a typo-augmented prompt");
  tr->add_option("--augment-max-typos", tc.augment_max_typos, "Most insertions per augmented prompt");
  tr->add_option("--resegment-prob", tc.resegment_prob,
                 "Probability of a prompt with words split into non-canonical tokens");
  tr->add_option("--eval-every", tc.eval_every, "Greedy evaluation interval in epochs");
  tr->add_option("--seed", tr_seed, "Seed");
  tr->add_option("--template", tr_template, "Prompt template");
  tr->add_option("--alphabet", tr_alphabet, "Augmentation alphabet");
  tr->add_option("--out", tr_out, "Output checkpoint");

  // build-triplets
  auto* bt = app.add_subcommand("build-triplets", "Build clean/typo/split triplets");
  std::string bt_ckpt, bt_corpus, bt_out = "triplets.jsonl", bt_template, bt_clean_out;
  std::string bt_alphabet(kDefaultAlphabet), bt_aggregate = "max";
  size_t bt_t = 1, bt_k = 1000;
  uint64_t bt_seed = 0;
  bt->add_option("--checkpoint", bt_ckpt, "Checkpoint")->required();
  bt->add_option("--corpus", bt_corpus, "Corpus (TSV or JSONL)")->required();
  bt->add_option("--t", bt_t, "Typos per sample");
  bt->add_option("--k", bt_k, "Clean pairs kept (most likely answerable)");
  bt->add_option("--seed", bt_seed, "Seed");
  bt->add_option("--template", bt_template, "Prompt template (default: the checkpoint's)");
  bt->add_option("--alphabet", bt_alphabet, "Insertion alphabet");
  bt->add_option("--aggregate", bt_aggregate, "Word importance from token gradients: max or sum");
  bt->add_option("--clean-out", bt_clean_out, "Also write the selected clean pairs here");
  bt->add_option("--out", bt_out, "Output JSONL (sidecar: <out>.meta.json)");

  // score
  auto* sc = app.add_subcommand("score", "Score neurons or heads and select typo units");
  std::string sc_ckpt, sc_triplets, sc_kind = "neurons", sc_by, sc_out = "scores";
  std::optional<double> sc_fraction, sc_threshold;
  bool sc_average = false;
  sc->add_option("--checkpoint", sc_ckpt, "Checkpoint")->required();
  sc->add_option("--triplets", sc_triplets, "Triplet JSONL")->required();
  sc->add_option("--kind", sc_kind, "neurons or heads");
  auto* fopt = sc->add_option("--fraction", sc_fraction,
                              "Keep the top fraction (default 0.005 neurons, 0.015 heads)");
  sc->add_option("--threshold", sc_threshold, "Keep units with delta >= threshold")
      ->excludes(fopt);
  sc->add_option("--by", sc_by, "delta or abs_delta (default: delta neurons, abs_delta heads)");
  sc->add_flag("--per-position-average", sc_average,
               "Head score averaged over query positions instead of summed");
  sc->add_option("--out", sc_out, "Output prefix: <out>.csv and <out>.selection.json");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Ablate typo or random units and measure accuracy");
  std::string ab_ckpt, ab_triplets, ab_selection, ab_kind = "neurons", ab_out = "report";
  double ab_fraction = 0.0;
  size_t ab_identify = 100;
  bool ab_random = false, ab_all = false;
  int ab_repeats = 1;
  uint64_t ab_seed = 0;
  ab->add_option("--checkpoint", ab_ckpt, "Checkpoint")->required();
  ab->add_option("--triplets", ab_triplets, "Triplet JSONL")->required();
  ab->add_option("--selection", ab_selection,
                 "Selection JSON from `score`; evaluated on every sample");
  ab->add_option("--kind", ab_kind, "neurons or heads (identification mode)");
  ab->add_option("--fraction", ab_fraction, "Top fraction (default 0.005 neurons, 0.015 heads)");
  ab->add_option("--identify-n", ab_identify, "Samples used to identify typo units");
  ab->add_flag("--eval-all", ab_all, "Evaluate on every sample, identify set included");
  ab->add_flag("--random", ab_random, "Add random-unit baseline rows of the same size");
  ab->add_option("--repeats", ab_repeats, "Random baseline draws");
  ab->add_option("--seed", ab_seed, "Seed");
  ab->add_option("--out", ab_out, "Output prefix: <out>.json and <out>.txt");

  // accuracy-curve
  auto* cu = app.add_subcommand("accuracy-curve", "Typo accuracy for several typo counts");
  std::string cu_ckpt, cu_corpus, cu_out = "curve";
  std::vector<size_t> cu_t = {0, 1, 2, 4, 8, 16};
  size_t cu_k = 1000;
  uint64_t cu_seed = 0;
  cu->add_option("--checkpoint", cu_ckpt, "Checkpoint")->required();
  cu->add_option("--corpus", cu_corpus, "Corpus (TSV or JSONL)")->required();
  cu->add_option("--t", cu_t, "Typo counts (sorted, starting at 0)");
  cu->add_option("--k", cu_k, "Clean pairs kept");
  cu->add_option("--seed", cu_seed, "Seed");
  cu->add_option("--out", cu_out, "Output prefix: <out>.json");

  // plot
  auto* pl = app.add_subcommand("plot", "Render SVG charts with matching CSV");
  std::string pl_kind, pl_out = "plot", pl_ckpt, pl_triplets;
  std::vector<std::string> pl_inputs;
  int pl_layers = 0, pl_layer = 0, pl_head = 0;
  size_t pl_bins = 5, pl_sample = 0;
  pl->add_option("--kind", pl_kind, "layer_hist, delta_heatmap, attention_map or accuracy_curve")
      ->required()
      ->check(CLI::IsMember({"layer_hist", "delta_heatmap", "attention_map", "accuracy_curve"}));
  pl->add_option("--input", pl_inputs,
                 "layer_hist: selection JSON(s); delta_heatmap: scores CSV; "
                 "accuracy_curve: report or curve JSON(s)");
  pl->add_option("--layers", pl_layers, "Layer count for layer_hist (default: from selection)");
  pl->add_option("--bins", pl_bins, "Relative-depth bins");
  pl->add_option("--checkpoint", pl_ckpt, "attention_map: checkpoint");
  pl->add_option("--triplets", pl_triplets, "attention_map: triplet JSONL");
  pl->add_option("--sample", pl_sample, "attention_map: sample position in the JSONL");
  pl->add_option("--layer", pl_layer, "attention_map: layer");
  pl->add_option("--head", pl_head, "attention_map: head");
  pl->add_option("--out", pl_out, "Output prefix: <out>.svg and <out>.csv");

  // run-all
  auto* ra = app.add_subcommand("run-all", "Run the whole pipeline from a JSON config");
  std::string ra_config, ra_out = "run";
  bool ra_timing = false;
  ra->add_option("--config", ra_config, "Pipeline config JSON (missing keys use defaults)");
  ra->add_option("--out", ra_out, "Output directory");
  ra->add_flag("--timing", ra_timing, "Record wall-clock seconds in report.json");
  auto* dc = app.add_subcommand("default-config", "Print the default pipeline config");

  app.footer(
      "Exit codes: 0 ok, 2 validation error, 3 data error, 4 model error.\n"
      "Environment: TYPOLAB_OUT_DIR prefixes relative output paths; "
      "TYPOLAB_CACHE_DIR caches trained checkpoints for run-all.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      write_out(gen_out, format_corpus_tsv(synthesize_corpus(synth)));
    } else if (*bv) {
      const auto pairs = ingest(bv_corpus);
      const PromptTemplate tmpl(bv_template);
      const auto vocab = Vocab::train(vocab_training_texts(pairs, tmpl), bv_size);
      write_out(bv_out, vocab.serialize());
      std::printf("vocab: %zu tokens, corpus %s\n", vocab.size(),
                  hash_file(bv_corpus).c_str());
    } else if (*tr) {
      if (!tr_config.empty()) {
        const auto j = json::parse(read_file(tr_config));
        const auto pc = pipeline_config_from_json(j);
        mc = pc.model;
        tc = pc.train;
      } else {
        mc.ffn_kind = ffn_kind_from_string(tr_ffn);
        mc.positional = !tr_nopos;
      }
      const auto pairs = ingest(tr_corpus);
      const auto vocab = Vocab::parse(read_file(tr_vocab));
      const PromptTemplate tmpl(tr_template);
      mc.vocab_size = static_cast<int>(vocab.size());
      mc.validate();
      const auto samples = training_samples(vocab, tmpl, pairs);
      auto opt = make_train_options(tc, tr_seed, vocab, tmpl, pairs, tr_alphabet);
      opt.on_epoch = [](const EpochStats& s) {
        std::fprintf(stderr, "epoch %d loss %.5f%s\n", s.epoch, s.mean_loss,
                     s.accuracy ? (" accuracy " + std::to_string(*s.accuracy)).c_str() : "");
      };
      try {
        const auto res = train_toy(samples, mc, opt);
        const auto ckpt = make_checkpoint(
            res.weights, vocab, tmpl,
            {{"train_accuracy", res.accuracy},
             {"epochs_run", res.epochs_run},
             {"seed", tr_seed},
             {"corpus_hash", hash_file(tr_corpus)},
             {"vocab_hash", hash_file(tr_vocab)}});
        write_out(tr_out, serialize_checkpoint(ckpt));
        std::printf("final greedy accuracy %.4f, checkpoint %s\n", res.accuracy,
                    checkpoint_hash(ckpt).c_str());
      } catch (const DidNotConverge& e) {
        std::printf("final greedy accuracy %.4f (did not converge)\n", e.achieved_accuracy());
        throw;
      }
    } else if (*bt) {
      const auto m = load_model(bt_ckpt);
      const PromptTemplate tmpl = bt_template.empty() ? m.tmpl : PromptTemplate(bt_template);
      const Model<float> model(m.ckpt.weights);
      const auto pairs = ingest(bt_corpus);
      const auto sel = select_answerable(pairs, model, m.vocab, tmpl, bt_k, jobs);
      if (sel.insufficient) {
        std::fprintf(stderr, "warning: InsufficientAnswerable: %zu answerable pairs, %zu requested\n",
                     sel.answerable, bt_k);
      }
      std::vector<WordDef> clean;
      for (size_t i : sel.indices) clean.push_back(pairs[i]);
      if (!bt_clean_out.empty()) write_out(bt_clean_out, format_corpus_tsv(clean));
      TripletOptions opt;
      opt.t = bt_t;
      opt.seed = bt_seed;
      opt.alphabet = bt_alphabet;
      opt.jobs = jobs;
      opt.aggregate = bt_aggregate == "sum" ? WordAggregate::kSum : WordAggregate::kMax;
      TYPOLAB_REQUIRE(bt_aggregate == "sum" || bt_aggregate == "max",
                      ErrorCode::kInvalidArgument, "--aggregate must be max or sum");
      const auto ds = build_triplets(m.vocab, tmpl, clean, model, opt);
      const auto path = out_path(bt_out);
      save_triplets(path, ds,
                    {{"checkpoint_hash", m.hash},
                     {"corpus_hash", hash_file(bt_corpus)},
                     {"k", bt_k},
                     {"answerable", sel.answerable},
                     {"aggregate", bt_aggregate}});
      std::cerr << "wrote " << path << " and " << meta_path_for(path) << "\n";
      std::printf("triplets: %zu kept, %zu dropped\n", ds.samples.size(), ds.dropped.size());
      for (const auto& d : ds.dropped) {
        std::printf("dropped #%zu %s: %s\n", d.index, d.word.c_str(), d.reason.c_str());
      }
    } else if (*sc) {
      const auto m = load_model(sc_ckpt);
      const Model<float> model(m.ckpt.weights);
      const auto ds = load_triplets(sc_triplets);
      const UnitKind kind = unit_kind_from_string(sc_kind);
      HeadScoreOptions ho;
      ho.per_position_average = sc_average;
      const auto scores = score_units(ds, model, kind, nullptr, jobs, ho);
      Selection sel;
      if (sc_threshold) {
        sel = select_by_threshold(scores, *sc_threshold);
      } else {
        const double f = sc_fraction.value_or(kind == UnitKind::kNeuron ? 0.005 : 0.015);
        const RankBy by = sc_by.empty()
                              ? (kind == UnitKind::kNeuron ? RankBy::kDelta : RankBy::kAbsDelta)
                              : rank_by_from_string(sc_by);
        sel = select_top_fraction(scores, f, by);
      }
      auto j = to_json(sel);
      j["t"] = ds.t;
      j["seed"] = ds.seed;
      j["n_layers"] = model.config().n_layers;
      j["checkpoint_hash"] = m.hash;
      j["triplets_hash"] = hash_file(sc_triplets);
      j["per_position_average"] = sc_average;
      write_out(sc_out + ".csv", scores_csv(scores));
      write_out(sc_out + ".selection.json", j.dump(2) + "\n");
      print_stats(std::string("delta ") + to_string(kind), delta_stats(scores));
      std::printf("selected %zu of %zu\n", sel.size(), sel.total);
    } else if (*ab) {
      const auto m = load_model(ab_ckpt);
      const Model<float> model(m.ckpt.weights);
      const auto ds = load_triplets(ab_triplets);
      const AnswerChecker checker{&m.vocab, &m.tmpl};
      ExperimentReport rep;
      if (!ab_selection.empty()) {
        const auto sel = selection_from_json(json::parse(read_file(ab_selection)));
        std::vector<size_t> all(ds.samples.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        TYPOLAB_REQUIRE(!all.empty(), ErrorCode::kInsufficientSamples, "no samples");
        rep.add_row(evaluate_condition(model, checker, ds, all, "none", {}, 0, ab_seed, jobs));
        rep.add_row(evaluate_condition(model, checker, ds, all, condition_name(sel.kind, false),
                                       sel.mask(), sel.size(), ab_seed, jobs));
        const auto& c = model.config();
        for (int r = 0; ab_random && r < ab_repeats; ++r) {
          const uint64_t seed = derive_seed(ab_seed, kRandomUnitStream, static_cast<uint64_t>(r));
          const auto rs = select_random(sel.kind, c.n_layers,
                                        sel.kind == UnitKind::kNeuron ? c.d_ffn : c.n_heads,
                                        sel.size(), seed);
          std::string name = condition_name(sel.kind, true);
          if (r > 0) name += "#" + std::to_string(r);
          rep.add_row(evaluate_condition(model, checker, ds, all, name, rs.mask(), rs.size(),
                                         seed, jobs));
        }
        rep.config = {{"selection", ab_selection}, {"selection_hash", hash_file(ab_selection)}};
      } else {
        AblationOptions o;
        o.kind = unit_kind_from_string(ab_kind);
        o.fraction = ab_fraction > 0 ? ab_fraction : (o.kind == UnitKind::kNeuron ? 0.005 : 0.015);
        o.by = o.kind == UnitKind::kNeuron ? RankBy::kDelta : RankBy::kAbsDelta;
        o.identify_n = ab_identify;
        o.eval_rest = !ab_all;
        o.seed = ab_seed;
        o.random_repeats = ab_random ? ab_repeats : 0;
        o.jobs = jobs;
        rep = ablation_experiment(model, checker, ds, o).report;
      }
      rep.checkpoint_hash = m.hash;
      rep.seeds["ablation"] = ab_seed;
      rep.seeds["triplets"] = ds.seed;
      rep.config["triplets_hash"] = hash_file(ab_triplets);
      write_out(ab_out + ".json", rep.to_json().dump(2) + "\n");
      write_out(ab_out + ".txt", rep.text_table());
      std::cout << rep.text_table();
    } else if (*cu) {
      const auto m = load_model(cu_ckpt);
      const Model<float> model(m.ckpt.weights);
      const auto pairs = ingest(cu_corpus);
      const auto sel = select_answerable(pairs, model, m.vocab, m.tmpl, cu_k, jobs);
      std::vector<WordDef> clean;
      for (size_t i : sel.indices) clean.push_back(pairs[i]);
      TripletOptions opt;
      opt.seed = cu_seed;
      opt.jobs = jobs;
      ExperimentReport rep;
      rep.curve = accuracy_curve(model, m.vocab, m.tmpl, clean, cu_t, opt);
      rep.checkpoint_hash = m.hash;
      rep.seeds["triplets"] = cu_seed;
      rep.config = {{"k", cu_k}, {"corpus_hash", hash_file(cu_corpus)}};
      write_out(cu_out + ".json", rep.to_json().dump(2) + "\n");
      for (const auto& p : rep.curve) {
        std::printf("t=%zu accuracy=%.4f samples=%zu dropped=%zu\n", p.t, p.accuracy, p.samples,
                    p.dropped);
      }
    } else if (*pl) {
      Plot p;
      if (pl_kind == "layer_hist") {
        TYPOLAB_REQUIRE(!pl_inputs.empty(), ErrorCode::kInvalidArgument, "--input required");
        std::vector<std::pair<std::string, LayerDistribution>> series;
        for (const auto& in : pl_inputs) {
          const auto j = json::parse(read_file(in));
          const int layers = pl_layers > 0 ? pl_layers : j.value("n_layers", 0);
          TYPOLAB_REQUIRE(layers > 0, ErrorCode::kInvalidArgument,
                          in + ": layer count unknown, pass --layers");
          series.emplace_back(fs::path(in).stem().string(),
                              layer_distribution(selection_from_json(j), layers, pl_bins));
        }
        p = plot_layer_hist(series);
      } else if (pl_kind == "delta_heatmap") {
        TYPOLAB_REQUIRE(pl_inputs.size() == 1, ErrorCode::kInvalidArgument,
                        "one scores CSV expected");
        p = plot_delta_heatmap(parse_scores_csv(read_file(pl_inputs[0])));
      } else if (pl_kind == "accuracy_curve") {
        TYPOLAB_REQUIRE(!pl_inputs.empty(), ErrorCode::kInvalidArgument, "--input required");
        std::vector<std::pair<std::string, std::vector<CurvePoint>>> series;
        for (const auto& in : pl_inputs) {
          series.emplace_back(fs::path(in).stem().string(),
                              report_from_json(json::parse(read_file(in))).curve);
        }
        p = plot_accuracy_curve(series);
      } else {
        TYPOLAB_REQUIRE(!pl_ckpt.empty() && !pl_triplets.empty(), ErrorCode::kInvalidArgument,
                        "attention_map needs --checkpoint and --triplets");
        const auto m = load_model(pl_ckpt);
        const Model<float> model(m.ckpt.weights);
        const auto ds = load_triplets(pl_triplets);
        TYPOLAB_REQUIRE(pl_sample < ds.samples.size(), ErrorCode::kInvalidArgument,
                        "--sample out of range");
        TYPOLAB_REQUIRE(pl_layer >= 0 && pl_layer < model.config().n_layers && pl_head >= 0 &&
                            pl_head < model.config().n_heads,
                        ErrorCode::kInvalidArgument, "--layer/--head out of range");
        std::vector<AttentionPanel> panels;
        const auto& s = ds.samples[pl_sample];
        for (const PromptInstance* x : {&s.clean, &s.typo, &s.split}) {
          const auto prompt = x->prompt_tokens();
          const auto trace = model.forward(std::span<const TokenId>(prompt));
          AttentionPanel panel;
          panel.name = to_string(x->variant);
          for (TokenId id : prompt) panel.labels.push_back(m.vocab.is_special(id) ? "<bos>" : m.vocab.token(id));
          panel.scores = trace.attention[static_cast<size_t>(pl_layer)][static_cast<size_t>(pl_head)]
                             .cast<double>();
          panels.push_back(std::move(panel));
        }
        p = plot_attention_map(panels, "Attention of layer " + std::to_string(pl_layer) +
                                           " head " + std::to_string(pl_head));
      }
      write_out(pl_out + ".svg", p.svg);
      write_out(pl_out + ".csv", p.csv);
    } else if (*ra) {
      json j = json::object();
      if (!ra_config.empty()) j = json::parse(read_file(ra_config));
      auto cfg = pipeline_config_from_json(j);
      if (app.count("--jobs") > 0) cfg.jobs = jobs;
      const std::string dir = out_path(ra_out);
      const auto res = run_all(
          cfg, dir, [](const std::string& s) { std::cerr << s << "\n"; }, ra_timing,
          env_or("TYPOLAB_CACHE_DIR", ""));
      std::cout << res.report.text_table();
      for (const auto& p : res.report.curve) {
        std::printf("t=%zu accuracy=%.4f\n", p.t, p.accuracy);
      }
      for (const auto& [name, st] : res.report.delta_summaries) print_stats(name, st);
      std::cerr << "outputs in " << dir << "\n";
    } else if (*dc) {
      std::cout << to_json(PipelineConfig{}).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::kValidation: return kExitValidation;
      case ErrorCategory::kData: return kExitData;
      case ErrorCategory::kModel: return kExitModel;
    }
  } catch (const json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

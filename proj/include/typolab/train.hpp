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

#ifndef TYPOLAB_TRAIN_HPP_
#define TYPOLAB_TRAIN_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "typolab/error.hpp"
#include "typolab/model.hpp"
#include "typolab/random.hpp"

namespace typolab {

struct TrainSample {
  std::vector<TokenId> prompt;
  std::vector<TokenId> answer;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> accuracy;
};

struct TrainOptions {
  int epochs = 60;
  uint64_t seed = 0;
  int batch_size = 16;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.05;
  int warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  // Training fails with DidNotConverge when the final held-in greedy accuracy
  // is below this.
  double min_accuracy = 0.0;
  // Evaluate every `eval_every` epochs (0 = only at the end) and stop early
  // once accuracy reaches `stop_accuracy`.
  int eval_every = 0;
  double stop_accuracy = 2.0;
  // Replaces a sample's prompt with probability `augment_prob` each epoch.
  double augment_prob = 0.0;
  std::function<std::vector<TokenId>(size_t index, Rng& rng)> augment;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  Weights<float> weights;
  std::vector<double> epoch_losses;
  double accuracy = 0.0;
  int epochs_run = 0;
};

// Fraction of samples whose greedy continuation reproduces the answer tokens.
template <class T>
double greedy_token_accuracy(const Model<T>& model,
                             const std::vector<TrainSample>& samples) {
  if (samples.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& s : samples) {
    const auto out = model.greedy_generate(s.prompt, s.answer.size());
    if (std::equal(s.answer.begin(), s.answer.end(),
                   out.begin() + static_cast<std::ptrdiff_t>(s.prompt.size()))) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// Mean per-sample cross-entropy of the answer tokens.
template <class T>
double mean_answer_loss(const Model<T>& model,
                        const std::vector<TrainSample>& samples) {
  double total = 0.0;
  for (const auto& s : samples) total -= model.answer_logprob(s.prompt, s.answer);
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

// Trains from a seeded initialization with Adam on the answer tokens only.
// Single-threaded and bit-for-bit deterministic for a fixed seed.
inline TrainResult train_toy(const std::vector<TrainSample>& samples,
                             const ModelConfig& config,
                             const TrainOptions& options) {
  config.validate();
  TYPOLAB_REQUIRE(!samples.empty(), ErrorCode::kInvalidArgument,
                  "training corpus is empty");
  TYPOLAB_REQUIRE(options.epochs >= 0 && options.batch_size >= 1,
                  ErrorCode::kInvalidArgument, "bad epochs or batch size");
  for (const auto& s : samples) {
    TYPOLAB_REQUIRE(!s.prompt.empty() && !s.answer.empty(),
                    ErrorCode::kInvalidArgument, "empty prompt or answer");
    TYPOLAB_REQUIRE(
        s.prompt.size() + s.answer.size() <= static_cast<size_t>(config.max_seq),
        ErrorCode::kSequenceTooLong, "training sample exceeds max_seq");
  }

  TrainResult result;
  result.weights = init_weights<float>(config, options.seed);
  Weights<float> m1 = result.weights.zeros_like();
  Weights<float> m2 = result.weights.zeros_like();
  Weights<float> grads = result.weights.zeros_like();

  const size_t n = samples.size();
  const size_t batch = static_cast<size_t>(options.batch_size);
  const size_t steps_per_epoch = (n + batch - 1) / batch;
  const size_t total_steps = steps_per_epoch * static_cast<size_t>(options.epochs);
  size_t step = 0;
  Rng order_rng(derive_seed(options.seed, 0x5eed, 1));
  Rng augment_rng(derive_seed(options.seed, 0x5eed, 2));

  auto lr_at = [&](size_t s) {
    const double base = options.learning_rate;
    if (s < static_cast<size_t>(options.warmup_steps)) {
      return base * static_cast<double>(s + 1) / options.warmup_steps;
    }
    const double span = std::max<double>(
        1.0, static_cast<double>(total_steps) - options.warmup_steps);
    const double progress =
        std::min(1.0, (static_cast<double>(s) - options.warmup_steps) / span);
    const double lo = base * options.final_lr_fraction;
    return lo + 0.5 * (base - lo) * (1.0 + std::cos(std::numbers::pi * progress));
  };

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<TokenId> seq;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t b = 0; b < n; b += batch) {
      const size_t end = std::min(n, b + batch);
      const Model<float> model(result.weights);
      grads.for_each_tensor([](const std::string&, Mat<float>& g) { g.setZero(); });
      const float weight = 1.0f / static_cast<float>(end - b);
      for (size_t i = b; i < end; ++i) {
        const auto& s = samples[order[i]];
        seq = s.prompt;
        if (options.augment && options.augment_prob > 0.0 &&
            augment_rng.uniform() < options.augment_prob) {
          auto alt = options.augment(order[i], augment_rng);
          if (alt.size() + s.answer.size() <= static_cast<size_t>(config.max_seq)) {
            seq = std::move(alt);
          }
        }
        seq.insert(seq.end(), s.answer.begin(), s.answer.end());
        const size_t target_begin = seq.size() - s.answer.size();
        epoch_loss += model.loss_and_grad(seq, target_begin, seq.size(), grads, weight);
      }

      double norm2 = 0.0;
      grads.for_each_tensor([&](const std::string&, const Mat<float>& g) {
        norm2 += static_cast<double>(g.squaredNorm());
      });
      const double norm = std::sqrt(norm2);
      const float clip = (options.grad_clip > 0.0 && norm > options.grad_clip)
                             ? static_cast<float>(options.grad_clip / norm)
                             : 1.0f;
      ++step;
      const double lr = lr_at(step - 1);
      const float c1 = static_cast<float>(1.0 - std::pow(options.beta1, step));
      const float c2 = static_cast<float>(1.0 - std::pow(options.beta2, step));
      const auto b1 = static_cast<float>(options.beta1);
      const auto b2 = static_cast<float>(options.beta2);
      const auto flr = static_cast<float>(lr);
      const auto wd = static_cast<float>(options.weight_decay * lr);

      std::vector<Mat<float>*> params, firsts, seconds, gs;
      result.weights.for_each_tensor(
          [&](const std::string&, Mat<float>& p) { params.push_back(&p); });
      m1.for_each_tensor([&](const std::string&, Mat<float>& p) { firsts.push_back(&p); });
      m2.for_each_tensor([&](const std::string&, Mat<float>& p) { seconds.push_back(&p); });
      grads.for_each_tensor([&](const std::string&, Mat<float>& p) { gs.push_back(&p); });
      for (size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        auto& a = *firsts[k];
        auto& v = *seconds[k];
        const auto g = gs[k]->array() * clip;
        a.array() = b1 * a.array() + (1.0f - b1) * g;
        v.array() = b2 * v.array() + (1.0f - b2) * g.square();
        if (wd > 0.0f && p.rows() > 1) p.array() -= wd * p.array();
        p.array() -= flr * (a.array() / c1) / ((v.array() / c2).sqrt() + 1e-8f);
      }
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.mean_loss = epoch_loss / static_cast<double>(n);
    result.epoch_losses.push_back(stats.mean_loss);
    result.epochs_run = epoch + 1;
    const bool last = epoch + 1 == options.epochs;
    if (options.eval_every > 0 && (epoch + 1) % options.eval_every == 0 && !last) {
      stats.accuracy = greedy_token_accuracy(Model<float>(result.weights), samples);
    }
    if (options.on_epoch) options.on_epoch(stats);
    if (stats.accuracy && *stats.accuracy >= options.stop_accuracy) break;
  }

  result.accuracy = greedy_token_accuracy(Model<float>(result.weights), samples);
  if (result.accuracy < options.min_accuracy) {
    throw DidNotConverge(result.accuracy, options.min_accuracy);
  }
  return result;
}

}  // namespace typolab

#endif  // TYPOLAB_TRAIN_HPP_

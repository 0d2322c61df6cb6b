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

#ifndef TYPOLAB_MODEL_HPP_
#define TYPOLAB_MODEL_HPP_

// Instrumented decoder-only transformer.
//
// Pre-norm blocks with RMSNorm, multi-head causal attention, and either a
// gated (GeGLU) or plain GELU feed-forward layer. A "neuron" is one column of
// the value that multiplies the FFN down-projection: gelu(gate) * up for the
// gated kind, gelu(pre) for the plain kind. Every forward pass can record
// those values for all positions together with every post-softmax attention
// map, and can run with neurons or heads ablated.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/error.hpp"
#include "typolab/random.hpp"
#include "typolab/tokenizer.hpp"

namespace typolab {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class FfnKind { kPlainGelu, kGated };

inline std::string to_string(FfnKind kind) {
  return kind == FfnKind::kGated ? "gated" : "plain-gelu";
}

inline FfnKind ffn_kind_from_string(const std::string& s) {
  if (s == "gated") return FfnKind::kGated;
  if (s == "plain-gelu") return FfnKind::kPlainGelu;
  throw Error(ErrorCode::kInvalidArgument, "unknown ffn kind '" + s + "'");
}

struct ModelConfig {
  int n_layers = 8;
  int n_heads = 8;
  int d_model = 256;
  int d_ffn = 1024;
  int vocab_size = 2048;
  int max_seq = 128;
  FfnKind ffn_kind = FfnKind::kGated;
  // Learned absolute position embeddings; off makes the network permutation
  // equivariant up to the causal mask.
  bool positional = true;

  int head_dim() const { return d_model / n_heads; }
  int64_t total_neurons() const { return int64_t{n_layers} * d_ffn; }
  int64_t total_heads() const { return int64_t{n_layers} * n_heads; }

  void validate() const {
    auto positive = [](int v, const char* name) {
      TYPOLAB_REQUIRE(v >= 1, ErrorCode::kInvalidArgument,
                      std::string(name) + " must be >= 1");
    };
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(d_model, "d_model");
    positive(d_ffn, "d_ffn");
    positive(vocab_size, "vocab_size");
    positive(max_seq, "max_seq");
    TYPOLAB_REQUIRE(d_model % n_heads == 0, ErrorCode::kInvalidArgument,
                    "d_model " + std::to_string(d_model) +
                        " not divisible by n_heads " + std::to_string(n_heads));
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                     {"d_model", c.d_model},       {"d_ffn", c.d_ffn},
                     {"vocab_size", c.vocab_size}, {"max_seq", c.max_seq},
                     {"ffn_kind", to_string(c.ffn_kind)},
                     {"positional", c.positional}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.d_model = j.value("d_model", d.d_model);
  c.d_ffn = j.value("d_ffn", d.d_ffn);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_seq = j.value("max_seq", d.max_seq);
  c.ffn_kind = ffn_kind_from_string(j.value("ffn_kind", to_string(d.ffn_kind)));
  c.positional = j.value("positional", d.positional);
}

// Units to deactivate. Neurons are zeroed after the nonlinearity; heads have
// their whole post-softmax attention map zeroed, so they emit the zero vector.
struct AblationMask {
  std::set<std::pair<int, int>> neurons;  // (layer, neuron)
  std::set<std::pair<int, int>> heads;    // (layer, head)

  bool empty() const { return neurons.empty() && heads.empty(); }

  void validate(const ModelConfig& c) const {
    for (auto [l, n] : neurons) {
      TYPOLAB_REQUIRE(l >= 0 && l < c.n_layers && n >= 0 && n < c.d_ffn,
                      ErrorCode::kInvalidArgument,
                      "neuron (" + std::to_string(l) + "," + std::to_string(n) +
                          ") out of bounds");
    }
    for (auto [l, h] : heads) {
      TYPOLAB_REQUIRE(l >= 0 && l < c.n_layers && h >= 0 && h < c.n_heads,
                      ErrorCode::kInvalidArgument,
                      "head (" + std::to_string(l) + "," + std::to_string(h) +
                          ") out of bounds");
    }
  }
};

template <class T>
struct LayerWeights {
  Mat<T> attn_norm;  // 1 x d
  Mat<T> wq, wk, wv, wo;  // d x d
  Mat<T> ffn_norm;   // 1 x d
  Mat<T> w_gate;     // d x N, gated kind only (plain kind: 0 x 0)
  Mat<T> w_up;       // d x N
  Mat<T> w_down;     // N x d
};

template <class T>
struct Weights {
  ModelConfig config;
  Mat<T> tok_emb;     // V x d
  Mat<T> pos_emb;     // max_seq x d, 0 x 0 when !positional
  std::vector<LayerWeights<T>> layers;
  Mat<T> final_norm;  // 1 x d
  Mat<T> unembed;     // d x V

  // Visits every tensor in a fixed order with a stable name. Empty tensors
  // are skipped.
  template <class F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  // Same shapes, all zeros.
  Weights zeros_like() const {
    Weights z = *this;
    z.for_each_tensor([](const std::string&, Mat<T>& m) { m.setZero(); });
    return z;
  }

  template <class U>
  Weights<U> cast() const {
    Weights<U> out;
    out.config = config;
    out.tok_emb = tok_emb.template cast<U>();
    out.pos_emb = pos_emb.template cast<U>();
    out.final_norm = final_norm.template cast<U>();
    out.unembed = unembed.template cast<U>();
    out.layers.resize(layers.size());
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& a = layers[i];
      auto& b = out.layers[i];
      b.attn_norm = a.attn_norm.template cast<U>();
      b.wq = a.wq.template cast<U>();
      b.wk = a.wk.template cast<U>();
      b.wv = a.wv.template cast<U>();
      b.wo = a.wo.template cast<U>();
      b.ffn_norm = a.ffn_norm.template cast<U>();
      b.w_gate = a.w_gate.template cast<U>();
      b.w_up = a.w_up.template cast<U>();
      b.w_down = a.w_down.template cast<U>();
    }
    return out;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for_each_tensor([&](const std::string&, const Mat<T>& m) {
      n += static_cast<size_t>(m.size());
    });
    return n;
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    auto emit = [&](const std::string& name, auto& m) {
      if (m.size() > 0) f(name, m);
    };
    emit("tok_emb", self.tok_emb);
    emit("pos_emb", self.pos_emb);
    for (size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      emit(p + "attn_norm", l.attn_norm);
      emit(p + "wq", l.wq);
      emit(p + "wk", l.wk);
      emit(p + "wv", l.wv);
      emit(p + "wo", l.wo);
      emit(p + "ffn_norm", l.ffn_norm);
      emit(p + "w_gate", l.w_gate);
      emit(p + "w_up", l.w_up);
      emit(p + "w_down", l.w_down);
    }
    emit("final_norm", self.final_norm);
    emit("unembed", self.unembed);
  }
};

// Shapes for `config`, all zeros.
template <class T>
Weights<T> zero_weights(const ModelConfig& config) {
  config.validate();
  const int d = config.d_model;
  const int n = config.d_ffn;
  const int v = config.vocab_size;
  Weights<T> w;
  w.config = config;
  w.tok_emb = Mat<T>::Zero(v, d);
  if (config.positional) w.pos_emb = Mat<T>::Zero(config.max_seq, d);
  w.layers.resize(static_cast<size_t>(config.n_layers));
  for (auto& l : w.layers) {
    l.attn_norm = Mat<T>::Zero(1, d);
    l.wq = Mat<T>::Zero(d, d);
    l.wk = Mat<T>::Zero(d, d);
    l.wv = Mat<T>::Zero(d, d);
    l.wo = Mat<T>::Zero(d, d);
    l.ffn_norm = Mat<T>::Zero(1, d);
    if (config.ffn_kind == FfnKind::kGated) l.w_gate = Mat<T>::Zero(d, n);
    l.w_up = Mat<T>::Zero(d, n);
    l.w_down = Mat<T>::Zero(n, d);
  }
  w.final_norm = Mat<T>::Zero(1, d);
  w.unembed = Mat<T>::Zero(d, v);
  return w;
}

// Seeded initialization: unit norm scales, small normal embeddings, fan-in
// scaled projections, residual outputs further scaled by 1/sqrt(2 L).
template <class T>
Weights<T> init_weights(const ModelConfig& config, uint64_t seed) {
  Weights<T> w = zero_weights<T>(config);
  Rng rng(derive_seed(seed, 0x1417, 0));
  const double resid = 1.0 / std::sqrt(2.0 * config.n_layers);
  auto fill = [&](Mat<T>& m, double stddev) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<T>(rng.normal(0.0, stddev));
    }
  };
  const double in_d = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  const double in_n = 1.0 / std::sqrt(static_cast<double>(config.d_ffn));
  fill(w.tok_emb, 0.3);
  if (config.positional) fill(w.pos_emb, 0.1);
  for (auto& l : w.layers) {
    l.attn_norm.setOnes();
    l.ffn_norm.setOnes();
    fill(l.wq, in_d);
    fill(l.wk, in_d);
    fill(l.wv, in_d);
    fill(l.wo, in_d * resid);
    if (config.ffn_kind == FfnKind::kGated) fill(l.w_gate, in_d);
    fill(l.w_up, in_d);
    fill(l.w_down, in_n * resid);
  }
  w.final_norm.setOnes();
  fill(w.unembed, in_d);
  return w;
}

// Recorded internals of one forward pass.
template <class T>
struct ForwardTrace {
  std::vector<Mat<T>> activations;              // [layer] -> positions x d_ffn
  std::vector<std::vector<Mat<T>>> attention;   // [layer][head] -> query x key
  Mat<T> logits;                                // positions x vocab

  T activation(int layer, int pos, int neuron) const {
    return activations[static_cast<size_t>(layer)](pos, neuron);
  }
  T attention_score(int layer, int head, int query, int key) const {
    return attention[static_cast<size_t>(layer)][static_cast<size_t>(head)](
        query, key);
  }
};

namespace detail {

constexpr double kRmsEps = 1e-5;

template <class T>
T gelu(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <class T>
T gelu_grad(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T inner = c * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(inner);
  return T(0.5) * (T(1) + t) +
         T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * x * x);
}

// Vectorized GELU over a matrix; `th` receives the tanh term.
template <class T>
void gelu_forward(const Mat<T>& x, Mat<T>& th, Mat<T>& y) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  th = (c * (x.array() + T(0.044715) * x.array().cube())).tanh().matrix();
  y = (T(0.5) * x.array() * (T(1) + th.array())).matrix();
}

template <class T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& th) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return (T(0.5) * (T(1) + th.array()) +
          T(0.5) * x.array() * (T(1) - th.array().square()) * c *
              (T(1) + T(3 * 0.044715) * x.array().square()))
      .matrix();
}

template <class T>
void rms_norm(const Mat<T>& x, const Mat<T>& scale, Mat<T>& y, ColVec<T>& rinv) {
  rinv = (x.array().square().rowwise().mean() + static_cast<T>(kRmsEps))
             .rsqrt()
             .matrix();
  y = (x.array().colwise() * rinv.array()).rowwise() * scale.row(0).array();
}

// dx += backward of rms_norm; dscale += gradient of the scale when non-null.
template <class T>
void rms_norm_backward(const Mat<T>& x, const Mat<T>& scale,
                       const ColVec<T>& rinv, const Mat<T>& dy, Mat<T>& dx,
                       Mat<T>* dscale) {
  const Mat<T> normed = x.array().colwise() * rinv.array();
  if (dscale != nullptr) {
    dscale->row(0) += (dy.array() * normed.array()).colwise().sum().matrix();
  }
  const Mat<T> dn = dy.array().rowwise() * scale.row(0).array();
  const ColVec<T> dot =
      (dn.array() * normed.array()).rowwise().mean().matrix();
  dx.array() += (dn.array() - normed.array().colwise() * dot.array()).colwise() *
                rinv.array();
}

template <class T>
struct LayerCache {
  Mat<T> x_in;
  ColVec<T> rinv1;
  Mat<T> h1;
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;
  Mat<T> mix;
  Mat<T> x_mid;
  ColVec<T> rinv2;
  Mat<T> h2;
  Mat<T> pre_gate;   // gated: gate pre-activation; plain: FFN pre-activation
  Mat<T> pre_up;     // gated only
  Mat<T> gelu_tanh;  // tanh term of the GELU, reused by the backward pass
  Mat<T> gelu_out;   // GELU of pre_gate
  Mat<T> act;        // neuron values after ablation
  std::vector<char> neuron_off;
};

template <class T>
struct ForwardState {
  Mat<T> x0;
  std::vector<LayerCache<T>> layers;
  Mat<T> x_final;
  ColVec<T> rinv_final;
  Mat<T> h_final;
  Mat<T> logits;
};

}  // namespace detail

template <class T>
class Model {
 public:
  explicit Model(Weights<T> weights) : w_(std::move(weights)) {
    w_.config.validate();
  }

  const ModelConfig& config() const { return w_.config; }
  const Weights<T>& weights() const { return w_; }

  // Input embeddings (token + position) for a token sequence.
  Mat<T> embed(std::span<const TokenId> tokens) const {
    check_length(tokens.size());
    const auto t = static_cast<Eigen::Index>(tokens.size());
    Mat<T> x(t, w_.config.d_model);
    for (Eigen::Index i = 0; i < t; ++i) {
      const TokenId id = tokens[static_cast<size_t>(i)];
      TYPOLAB_REQUIRE(id >= 0 && id < w_.config.vocab_size,
                      ErrorCode::kInvalidArgument,
                      "token id " + std::to_string(id) + " outside vocabulary");
      x.row(i) = w_.tok_emb.row(id);
      if (w_.config.positional) x.row(i) += w_.pos_emb.row(i);
    }
    return x;
  }

  ForwardTrace<T> forward(std::span<const TokenId> tokens,
                          const AblationMask& mask = {}) const {
    return trace_from(run(embed(tokens), mask));
  }

  ForwardTrace<T> forward(const Segmentation& seg,
                          const AblationMask& mask = {}) const {
    return forward(std::span<const TokenId>(seg.tokens), mask);
  }

  // Forward pass from explicit input embeddings (positions x d_model).
  ForwardTrace<T> forward_embedded(const Mat<T>& x0,
                                   const AblationMask& mask = {}) const {
    check_length(static_cast<size_t>(x0.rows()));
    return trace_from(run(x0, mask));
  }

  // Logits only; cheaper than forward() because nothing is recorded.
  Mat<T> logits(std::span<const TokenId> tokens,
                const AblationMask& mask = {}) const {
    return run(embed(tokens), mask).logits;
  }

  // Appends argmax tokens, lowest id on ties. Stops after `max_new` tokens or
  // as soon as `stop` returns true for a generated token (that token is kept).
  std::vector<TokenId> greedy_generate(
      std::span<const TokenId> prompt, size_t max_new,
      const AblationMask& mask = {},
      const std::function<bool(TokenId)>& stop = {}) const {
    TYPOLAB_REQUIRE(
        prompt.size() + max_new <= static_cast<size_t>(w_.config.max_seq),
        ErrorCode::kSequenceTooLong,
        "prompt of " + std::to_string(prompt.size()) + " tokens plus " +
            std::to_string(max_new) + " new exceeds max_seq " +
            std::to_string(w_.config.max_seq));
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    for (size_t step = 0; step < max_new; ++step) {
      const Mat<T> lg = run(embed(seq), mask, static_cast<Eigen::Index>(seq.size()) - 1).logits;
      const TokenId next = argmax_row(lg, lg.rows() - 1);
      seq.push_back(next);
      if (stop && stop(next)) break;
    }
    return seq;
  }

  // Mean log-probability of `answer` under teacher forcing after `prompt`.
  double answer_logprob(std::span<const TokenId> prompt,
                        std::span<const TokenId> answer,
                        const AblationMask& mask = {}) const {
    TYPOLAB_REQUIRE(!prompt.empty() && !answer.empty(),
                    ErrorCode::kInvalidArgument,
                    "prompt and answer must be non-empty");
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    seq.insert(seq.end(), answer.begin(), answer.end());
    const Mat<T> lg =
        run(embed(seq), mask, static_cast<Eigen::Index>(prompt.size()) - 1).logits;
    double total = 0.0;
    for (size_t i = 0; i < answer.size(); ++i) {
      total += log_softmax_at(lg, static_cast<Eigen::Index>(prompt.size() + i - 1),
                              answer[i]);
    }
    return total / static_cast<double>(answer.size());
  }

  // Mean log-probability of tokens[begin, end) given their prefixes, computed
  // from explicit input embeddings.
  double objective_from_embedded(const Mat<T>& x0,
                                 std::span<const TokenId> tokens, size_t begin,
                                 size_t end) const {
    check_target_range(tokens.size(), begin, end);
    const Mat<T> lg = run(x0, {}, static_cast<Eigen::Index>(begin) - 1).logits;
    double total = 0.0;
    for (size_t p = begin; p < end; ++p) {
      total += log_softmax_at(lg, static_cast<Eigen::Index>(p - 1), tokens[p]);
    }
    return total / static_cast<double>(end - begin);
  }

  // Gradient of the mean log-probability of tokens[begin, end) with respect
  // to the input embedding of every position (positions x d_model).
  Mat<T> objective_input_gradient(std::span<const TokenId> tokens, size_t begin,
                                  size_t end,
                                  const AblationMask& mask = {}) const {
    check_target_range(tokens.size(), begin, end);
    const auto state =
        run(embed(tokens), mask, static_cast<Eigen::Index>(begin) - 1);
    Mat<T> dlogits = Mat<T>::Zero(state.logits.rows(), state.logits.cols());
    const T inv = T(1) / static_cast<T>(end - begin);
    for (size_t p = begin; p < end; ++p) {
      const auto row = static_cast<Eigen::Index>(p - 1);
      const ColVec<T> probs = softmax_row(state.logits, row);
      dlogits.row(row) = -inv * probs.transpose();
      dlogits(row, tokens[p]) += inv;
    }
    return backward(state, dlogits, nullptr, static_cast<Eigen::Index>(begin) - 1);
  }

  // Per-prompt-token L2 norm of the gradient of the answer's mean
  // log-likelihood with respect to that token's input embedding.
  std::vector<T> input_gradients(std::span<const TokenId> prompt,
                                 std::span<const TokenId> answer) const {
    TYPOLAB_REQUIRE(!prompt.empty() && !answer.empty(),
                    ErrorCode::kInvalidArgument,
                    "prompt and answer must be non-empty");
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    seq.insert(seq.end(), answer.begin(), answer.end());
    const Mat<T> grad =
        objective_input_gradient(seq, prompt.size(), seq.size());
    std::vector<T> norms(prompt.size());
    for (size_t i = 0; i < prompt.size(); ++i) {
      norms[i] = grad.row(static_cast<Eigen::Index>(i)).norm();
    }
    return norms;
  }

  // Mean cross-entropy of tokens[begin, end); accumulates parameter gradients
  // (scaled by `weight`) into `grads`.
  double loss_and_grad(std::span<const TokenId> tokens, size_t begin,
                       size_t end, Weights<T>& grads, T weight = T(1)) const {
    check_target_range(tokens.size(), begin, end);
    const auto state = run(embed(tokens), {}, static_cast<Eigen::Index>(begin) - 1);
    Mat<T> dlogits = Mat<T>::Zero(state.logits.rows(), state.logits.cols());
    const T inv = weight / static_cast<T>(end - begin);
    double loss = 0.0;
    for (size_t p = begin; p < end; ++p) {
      const auto row = static_cast<Eigen::Index>(p - 1);
      const ColVec<T> probs = softmax_row(state.logits, row);
      loss -= std::log(std::max(static_cast<double>(probs(tokens[p])), 1e-300));
      dlogits.row(row) = inv * probs.transpose();
      dlogits(row, tokens[p]) -= inv;
    }
    const Mat<T> dx0 =
        backward(state, dlogits, &grads, static_cast<Eigen::Index>(begin) - 1);
    for (size_t i = 0; i < tokens.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      grads.tok_emb.row(tokens[i]) += dx0.row(r);
      if (w_.config.positional) grads.pos_emb.row(r) += dx0.row(r);
    }
    return loss / static_cast<double>(end - begin);
  }

  static TokenId argmax_row(const Mat<T>& m, Eigen::Index row) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(row, j) > m(row, best)) best = j;
    }
    return static_cast<TokenId>(best);
  }

 private:
  void check_length(size_t n) const {
    TYPOLAB_REQUIRE(n >= 1, ErrorCode::kInvalidArgument, "empty token sequence");
    TYPOLAB_REQUIRE(n <= static_cast<size_t>(w_.config.max_seq),
                    ErrorCode::kSequenceTooLong,
                    "sequence of " + std::to_string(n) +
                        " tokens exceeds max_seq " +
                        std::to_string(w_.config.max_seq));
  }

  static void check_target_range(size_t n, size_t begin, size_t end) {
    TYPOLAB_REQUIRE(begin >= 1 && begin < end && end <= n,
                    ErrorCode::kInvalidArgument, "bad target token range");
  }

  static ColVec<T> softmax_row(const Mat<T>& m, Eigen::Index row) {
    const T mx = m.row(row).maxCoeff();
    ColVec<T> e = (m.row(row).array() - mx).exp().matrix().transpose();
    return e / e.sum();
  }

  static double log_softmax_at(const Mat<T>& m, Eigen::Index row, TokenId id) {
    const double mx = static_cast<double>(m.row(row).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      sum += std::exp(static_cast<double>(m(row, j)) - mx);
    }
    return static_cast<double>(m(row, id)) - mx - std::log(sum);
  }

  // Logits are computed for rows >= logits_from only; earlier rows are zero.
  detail::ForwardState<T> run(const Mat<T>& x0, const AblationMask& mask,
                              Eigen::Index logits_from = 0) const {
    const ModelConfig& c = w_.config;
    mask.validate(c);
    const Eigen::Index t = x0.rows();
    const int dh = c.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    detail::ForwardState<T> s;
    s.x0 = x0;
    s.layers.resize(static_cast<size_t>(c.n_layers));
    Mat<T> x = x0;
    for (int l = 0; l < c.n_layers; ++l) {
      const auto& lw = w_.layers[static_cast<size_t>(l)];
      auto& lc = s.layers[static_cast<size_t>(l)];
      lc.x_in = x;
      detail::rms_norm(x, lw.attn_norm, lc.h1, lc.rinv1);
      lc.q.noalias() = lc.h1 * lw.wq;
      lc.k.noalias() = lc.h1 * lw.wk;
      lc.v.noalias() = lc.h1 * lw.wv;
      lc.mix = Mat<T>::Zero(t, c.d_model);
      lc.probs.resize(static_cast<size_t>(c.n_heads));
      for (int h = 0; h < c.n_heads; ++h) {
        Mat<T>& p = lc.probs[static_cast<size_t>(h)];
        if (mask.heads.count({l, h}) != 0) {
          p = Mat<T>::Zero(t, t);
          continue;
        }
        const auto qh = lc.q.middleCols(h * dh, dh);
        const auto kh = lc.k.middleCols(h * dh, dh);
        p.noalias() = (qh * kh.transpose()) * scale;
        for (Eigen::Index i = 0; i < t; ++i) {
          const T mx = p.row(i).head(i + 1).maxCoeff();
          T sum = 0;
          for (Eigen::Index j = 0; j <= i; ++j) {
            const T e = std::exp(p(i, j) - mx);
            p(i, j) = e;
            sum += e;
          }
          p.row(i).head(i + 1) /= sum;
          p.row(i).tail(t - i - 1).setZero();
        }
        lc.mix.middleCols(h * dh, dh).noalias() = p * lc.v.middleCols(h * dh, dh);
      }
      x.noalias() += lc.mix * lw.wo;
      lc.x_mid = x;
      detail::rms_norm(x, lw.ffn_norm, lc.h2, lc.rinv2);
      lc.neuron_off.assign(static_cast<size_t>(c.d_ffn), 0);
      for (auto [ml, mn] : mask.neurons) {
        if (ml == l) lc.neuron_off[static_cast<size_t>(mn)] = 1;
      }
      if (c.ffn_kind == FfnKind::kGated) {
        lc.pre_gate.noalias() = lc.h2 * lw.w_gate;
        lc.pre_up.noalias() = lc.h2 * lw.w_up;
        detail::gelu_forward(lc.pre_gate, lc.gelu_tanh, lc.gelu_out);
        lc.act = lc.gelu_out.cwiseProduct(lc.pre_up);
      } else {
        lc.pre_gate.noalias() = lc.h2 * lw.w_up;
        detail::gelu_forward(lc.pre_gate, lc.gelu_tanh, lc.gelu_out);
        lc.act = lc.gelu_out;
      }
      for (int n = 0; n < c.d_ffn; ++n) {
        if (lc.neuron_off[static_cast<size_t>(n)]) lc.act.col(n).setZero();
      }
      x.noalias() += lc.act * lw.w_down;
    }
    s.x_final = x;
    detail::rms_norm(x, w_.final_norm, s.h_final, s.rinv_final);
    if (logits_from <= 0) {
      s.logits.noalias() = s.h_final * w_.unembed;
    } else {
      const Eigen::Index rows = t - logits_from;
      s.logits = Mat<T>::Zero(t, c.vocab_size);
      s.logits.bottomRows(rows).noalias() = s.h_final.bottomRows(rows) * w_.unembed;
    }
    return s;
  }

  static ForwardTrace<T> trace_from(detail::ForwardState<T>&& s) {
    ForwardTrace<T> tr;
    tr.logits = std::move(s.logits);
    tr.activations.reserve(s.layers.size());
    tr.attention.reserve(s.layers.size());
    for (auto& lc : s.layers) {
      tr.activations.push_back(std::move(lc.act));
      tr.attention.push_back(std::move(lc.probs));
    }
    return tr;
  }

  // Reverse pass. Returns d(objective)/d(x0); accumulates parameter
  // gradients (except embeddings) into `grads` when non-null.
  // Rows of `dlogits` before `logits_from` must be zero.
  Mat<T> backward(const detail::ForwardState<T>& s, const Mat<T>& dlogits,
                  Weights<T>* grads, Eigen::Index logits_from = 0) const {
    const ModelConfig& c = w_.config;
    const Eigen::Index t = s.x0.rows();
    const int dh = c.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    const Eigen::Index rows = t - std::max<Eigen::Index>(0, logits_from);
    if (grads) {
      grads->unembed.noalias() +=
          s.h_final.bottomRows(rows).transpose() * dlogits.bottomRows(rows);
    }
    Mat<T> dh_final = Mat<T>::Zero(t, c.d_model);
    dh_final.bottomRows(rows).noalias() =
        dlogits.bottomRows(rows) * w_.unembed.transpose();
    Mat<T> dx = Mat<T>::Zero(t, c.d_model);
    detail::rms_norm_backward(s.x_final, w_.final_norm, s.rinv_final, dh_final,
                              dx, grads ? &grads->final_norm : nullptr);

    for (int l = c.n_layers - 1; l >= 0; --l) {
      const auto& lw = w_.layers[static_cast<size_t>(l)];
      const auto& lc = s.layers[static_cast<size_t>(l)];
      LayerWeights<T>* lg = grads ? &grads->layers[static_cast<size_t>(l)] : nullptr;

      // FFN.
      if (lg) lg->w_down.noalias() += lc.act.transpose() * dx;
      Mat<T> dact = dx * lw.w_down.transpose();
      for (int n = 0; n < c.d_ffn; ++n) {
        if (lc.neuron_off[static_cast<size_t>(n)]) dact.col(n).setZero();
      }
      Mat<T> dh2;
      if (c.ffn_kind == FfnKind::kGated) {
        const Mat<T> dup = dact.cwiseProduct(lc.gelu_out);
        const Mat<T> dgate = dact.cwiseProduct(lc.pre_up).cwiseProduct(
            detail::gelu_backward(lc.pre_gate, lc.gelu_tanh));
        if (lg) {
          lg->w_gate.noalias() += lc.h2.transpose() * dgate;
          lg->w_up.noalias() += lc.h2.transpose() * dup;
        }
        dh2.noalias() = dgate * lw.w_gate.transpose();
        dh2.noalias() += dup * lw.w_up.transpose();
      } else {
        const Mat<T> dpre =
            dact.cwiseProduct(detail::gelu_backward(lc.pre_gate, lc.gelu_tanh));
        if (lg) lg->w_up.noalias() += lc.h2.transpose() * dpre;
        dh2.noalias() = dpre * lw.w_up.transpose();
      }
      detail::rms_norm_backward(lc.x_mid, lw.ffn_norm, lc.rinv2, dh2, dx,
                                lg ? &lg->ffn_norm : nullptr);

      // Attention.
      if (lg) lg->wo.noalias() += lc.mix.transpose() * dx;
      const Mat<T> dmix = dx * lw.wo.transpose();
      Mat<T> dq = Mat<T>::Zero(t, c.d_model);
      Mat<T> dk = Mat<T>::Zero(t, c.d_model);
      Mat<T> dv = Mat<T>::Zero(t, c.d_model);
      for (int h = 0; h < c.n_heads; ++h) {
        const Mat<T>& p = lc.probs[static_cast<size_t>(h)];
        const auto dout = dmix.middleCols(h * dh, dh);
        dv.middleCols(h * dh, dh).noalias() += p.transpose() * dout;
        Mat<T> dp = dout * lc.v.middleCols(h * dh, dh).transpose();
        const ColVec<T> rowdot = (dp.array() * p.array()).rowwise().sum().matrix();
        Mat<T> ds = p.array() * (dp.array().colwise() - rowdot.array());
        ds *= scale;
        dq.middleCols(h * dh, dh).noalias() += ds * lc.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh).noalias() +=
            ds.transpose() * lc.q.middleCols(h * dh, dh);
      }
      if (lg) {
        lg->wq.noalias() += lc.h1.transpose() * dq;
        lg->wk.noalias() += lc.h1.transpose() * dk;
        lg->wv.noalias() += lc.h1.transpose() * dv;
      }
      Mat<T> dh1 = dq * lw.wq.transpose();
      dh1.noalias() += dk * lw.wk.transpose();
      dh1.noalias() += dv * lw.wv.transpose();
      detail::rms_norm_backward(lc.x_in, lw.attn_norm, lc.rinv1, dh1, dx,
                                lg ? &lg->attn_norm : nullptr);
    }
    return dx;
  }

  Weights<T> w_;
};

}  // namespace typolab

#endif  // TYPOLAB_MODEL_HPP_

/*
 * Copyright 2026 The chronolm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/common.hpp"

namespace chronolm {

/// Activations are stored one token per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Llama-style decoder: RMS pre-norm, rotary positions, grouped-query
/// attention, SwiGLU feed-forward, untied output head.
struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t n_kv_heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 1024;
  std::size_t context_length = 512;
  double rope_theta = 10000.0;
  double norm_eps = 1e-5;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t kv_dim() const { return head_dim() * n_kv_heads; }

  /// Every violated constraint, not just the first.
  std::vector<std::string> diagnostics() const;
  /// Throws InvalidArgument listing diagnostics().
  void validate() const;
  /// Closed-form count of all trainable scalars.
  std::size_t parameter_count() const;

  /// The 345M-parameter architecture the recipe was published with.
  static ModelConfig published_scale();

  bool operator==(const ModelConfig&) const = default;
};

/// Anything that yields next-token logits for a token prefix.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context_length() const = 0;

  /// Row t holds the logits for the token following tokens[0..t].
  virtual Matrix logits(std::span<const TokenId> tokens) const = 0;

  /// Logits after the last token of each sequence, one row per sequence.
  virtual Matrix next_logits(std::span<const std::vector<TokenId>> sequences) const;
};

struct LayerWeights {
  Matrix attn_norm;  // 1 x d
  Matrix wq;         // d x d
  Matrix wk;         // d x kv
  Matrix wv;         // d x kv
  Matrix wo;         // d x d
  Matrix mlp_norm;   // 1 x d
  Matrix w_gate;     // d x ff
  Matrix w_up;       // d x ff
  Matrix w_down;     // ff x d
};

struct TransformerWeights {
  Matrix embed;  // vocab x d
  std::vector<LayerWeights> layers;
  Matrix final_norm;  // 1 x d
  Matrix lm_head;     // d x vocab

  static TransformerWeights zeros(const ModelConfig& config);

  /// Visits every tensor in a fixed order with its canonical name.
  template <class F>
  void for_each(F&& f) {
    f(std::string("embed"), embed);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      auto& l = layers[i];
      f(p + "attn_norm", l.attn_norm);
      f(p + "wq", l.wq);
      f(p + "wk", l.wk);
      f(p + "wv", l.wv);
      f(p + "wo", l.wo);
      f(p + "mlp_norm", l.mlp_norm);
      f(p + "w_gate", l.w_gate);
      f(p + "w_up", l.w_up);
      f(p + "w_down", l.w_down);
    }
    f(std::string("final_norm"), final_norm);
    f(std::string("lm_head"), lm_head);
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<TransformerWeights*>(this)->for_each(
        [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  void set_zero();
  std::size_t size() const;
};

/// Activations kept by Transformer::forward for the backward pass.
struct ForwardCache {
  struct Layer {
    Matrix x_in, xhat1, h1, q, k, v, attn, x_mid, xhat2, h2, gate, up, act, mix;
    Vector inv_rms1, inv_rms2;
    std::vector<Matrix> probs;  // batch * n_heads matrices, seq x seq
  };
  std::vector<TokenId> tokens;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<Layer> layers;
  Matrix x_out, xhat_final, h_final;
  Vector inv_rms_final;
};

class Transformer : public LanguageModel {
 public:
  /// Seeded initialization from config.seed.
  explicit Transformer(ModelConfig config);
  Transformer(ModelConfig config, TransformerWeights weights);

  const ModelConfig& config() const noexcept { return config_; }
  TransformerWeights& weights() noexcept { return weights_; }
  const TransformerWeights& weights() const noexcept { return weights_; }

  std::size_t vocab_size() const override { return config_.vocab_size; }
  std::size_t context_length() const override { return config_.context_length; }
  Matrix logits(std::span<const TokenId> tokens) const override;
  Matrix next_logits(std::span<const std::vector<TokenId>> sequences) const override;

  /// tokens holds `batch` sequences of equal length back to back. Returns
  /// (batch * seq_len) x vocab logits; fills cache when non-null.
  Matrix forward(std::span<const TokenId> tokens, std::size_t batch,
                 ForwardCache* cache = nullptr) const;

  /// Accumulates d(loss)/d(weights) into grads given d(loss)/d(logits).
  void backward(const ForwardCache& cache, const Matrix& dlogits,
                TransformerWeights& grads) const;

 private:
  Matrix final_hidden(std::span<const TokenId> tokens, std::size_t batch,
                      ForwardCache* cache) const;
  void check_tokens(std::span<const TokenId> tokens, std::size_t seq_len) const;

  ModelConfig config_;
  TransformerWeights weights_;
  Matrix rope_cos_;  // context x head_dim/2
  Matrix rope_sin_;
};

/// Zero-layer model whose logits are identically zero: every next-token
/// distribution is uniform over the vocabulary.
Transformer make_uniform_transformer(std::size_t vocab_size, std::size_t context_length);

/// Zero-layer model reproducing a bigram table exactly: the next-token
/// log-probabilities after token i are row i of `log_probs` (rows must be
/// normalized log-distributions).
Transformer make_bigram_transformer(const Matrix& log_probs, std::size_t context_length);

/// Numerically stable log-softmax of one row.
Vector log_softmax(const Vector& logits);
/// Row-wise stable log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace chronolm

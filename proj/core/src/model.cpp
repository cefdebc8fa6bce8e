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

#include "chronolm/model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace chronolm {
namespace {

void rms_norm(const Matrix& x, const Matrix& gain, double eps, Matrix& xhat, Vector& inv_rms,
              Matrix& y) {
  const auto d = static_cast<double>(x.cols());
  inv_rms.resize(x.rows());
  xhat.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    inv_rms(i) = 1.0 / std::sqrt(x.row(i).squaredNorm() / d + eps);
    xhat.row(i) = x.row(i) * inv_rms(i);
  }
  y = xhat.array().rowwise() * gain.row(0).array();
}

// dx = inv_rms * (dxhat - xhat * mean(dxhat . xhat)), dxhat = dy * gain.
void rms_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& inv_rms,
                       const Matrix& gain, Matrix& dgain, Matrix& dx) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  dx.resize(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double proj = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = (dxhat.row(i) - xhat.row(i) * proj) * inv_rms(i);
  }
}

// Rotates (even, odd) column pairs of every head in place. sign=-1 applies
// the inverse rotation (used by the backward pass).
void apply_rope(Matrix& m, std::size_t batch, std::size_t seq_len, std::size_t n_heads,
                std::size_t head_dim, const Matrix& cos, const Matrix& sin, double sign) {
  const std::size_t half = head_dim / 2;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      const auto row = static_cast<Eigen::Index>(b * seq_len + t);
      for (std::size_t h = 0; h < n_heads; ++h) {
        for (std::size_t i = 0; i < half; ++i) {
          const auto c0 = static_cast<Eigen::Index>(h * head_dim + 2 * i);
          const double c = cos(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
          const double s = sign * sin(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
          const double x0 = m(row, c0);
          const double x1 = m(row, c0 + 1);
          m(row, c0) = x0 * c - x1 * s;
          m(row, c0 + 1) = x0 * s + x1 * c;
        }
      }
    }
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_normal(Matrix& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

}  // namespace

std::vector<std::string> ModelConfig::diagnostics() const {
  std::vector<std::string> out;
  if (n_heads == 0) out.emplace_back("n_heads must be >= 1");
  if (n_kv_heads == 0) out.emplace_back("n_kv_heads must be >= 1");
  if (d_model == 0) out.emplace_back("d_model must be >= 1");
  if (n_heads != 0 && d_model % n_heads != 0) out.emplace_back("d_model must be divisible by n_heads");
  if (n_kv_heads != 0 && n_heads % n_kv_heads != 0) {
    out.emplace_back("n_heads must be divisible by n_kv_heads");
  }
  if (n_layers > 0 && n_heads != 0 && d_model % n_heads == 0 && head_dim() % 2 != 0) {
    out.emplace_back("head dimension must be even for rotary positions");
  }
  if (n_layers > 0 && d_ff == 0) out.emplace_back("d_ff must be >= 1");
  if (vocab_size < 2) out.emplace_back("vocab_size must be >= 2");
  if (context_length < 2) out.emplace_back("context_length must be >= 2");
  if (!(norm_eps > 0.0)) out.emplace_back("norm_eps must be > 0");
  if (!(rope_theta > 0.0)) out.emplace_back("rope_theta must be > 0");
  return out;
}

void ModelConfig::validate() const {
  const auto diags = diagnostics();
  if (diags.empty()) return;
  std::ostringstream msg;
  msg << "invalid model config:";
  for (const auto& d : diags) msg << ' ' << d << ';';
  throw InvalidArgument(msg.str());
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = d_model;
  const std::size_t per_layer = 2 * d + 2 * d * d + 2 * d * kv_dim() + 3 * d * d_ff;
  return 2 * vocab_size * d + n_layers * per_layer + d;
}

ModelConfig ModelConfig::published_scale() {
  ModelConfig c;
  c.n_layers = 32;
  c.n_heads = 15;
  c.n_kv_heads = 5;
  c.d_model = 960;
  c.d_ff = 2560;
  c.vocab_size = 16000;
  c.context_length = 512;
  return c;
}

Matrix LanguageModel::next_logits(std::span<const std::vector<TokenId>> sequences) const {
  Matrix out(static_cast<Eigen::Index>(sequences.size()), static_cast<Eigen::Index>(vocab_size()));
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const Matrix l = logits(sequences[i]);
    out.row(static_cast<Eigen::Index>(i)) = l.row(l.rows() - 1);
  }
  return out;
}

TransformerWeights TransformerWeights::zeros(const ModelConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto kv = static_cast<Eigen::Index>(c.kv_dim());
  const auto ff = static_cast<Eigen::Index>(c.d_ff);
  const auto v = static_cast<Eigen::Index>(c.vocab_size);
  TransformerWeights w;
  w.embed = Matrix::Zero(v, d);
  w.layers.resize(c.n_layers);
  for (auto& l : w.layers) {
    l.attn_norm = Matrix::Zero(1, d);
    l.wq = Matrix::Zero(d, d);
    l.wk = Matrix::Zero(d, kv);
    l.wv = Matrix::Zero(d, kv);
    l.wo = Matrix::Zero(d, d);
    l.mlp_norm = Matrix::Zero(1, d);
    l.w_gate = Matrix::Zero(d, ff);
    l.w_up = Matrix::Zero(d, ff);
    l.w_down = Matrix::Zero(ff, d);
  }
  w.final_norm = Matrix::Zero(1, d);
  w.lm_head = Matrix::Zero(d, v);
  return w;
}

void TransformerWeights::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

std::size_t TransformerWeights::size() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

Transformer::Transformer(ModelConfig config)
    : Transformer(config, TransformerWeights::zeros(config)) {
  std::mt19937_64 rng(config_.seed);
  const double std = config_.init_std;
  const double out_std =
      config_.n_layers > 0 ? std / std::sqrt(2.0 * static_cast<double>(config_.n_layers)) : std;
  fill_normal(weights_.embed, rng, std);
  for (auto& l : weights_.layers) {
    l.attn_norm.setOnes();
    fill_normal(l.wq, rng, std);
    fill_normal(l.wk, rng, std);
    fill_normal(l.wv, rng, std);
    fill_normal(l.wo, rng, out_std);
    l.mlp_norm.setOnes();
    fill_normal(l.w_gate, rng, std);
    fill_normal(l.w_up, rng, std);
    fill_normal(l.w_down, rng, out_std);
  }
  weights_.final_norm.setOnes();
  fill_normal(weights_.lm_head, rng, std);
}

Transformer::Transformer(ModelConfig config, TransformerWeights weights)
    : config_(config), weights_(std::move(weights)) {
  config_.validate();
  const TransformerWeights shape = TransformerWeights::zeros(config_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> expected;
  shape.for_each([&](const std::string&, const Matrix& m) { expected.emplace_back(m.rows(), m.cols()); });
  if (weights_.layers.size() != config_.n_layers) throw InvalidArgument("layer count does not match config");
  std::size_t i = 0;
  weights_.for_each([&](const std::string& name, const Matrix& m) {
    if (m.rows() != expected[i].first || m.cols() != expected[i].second) {
      throw InvalidArgument("tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", config expects " +
                            std::to_string(expected[i].first) + "x" + std::to_string(expected[i].second));
    }
    ++i;
  });

  if (config_.n_layers > 0) {
    const std::size_t half = config_.head_dim() / 2;
    rope_cos_.resize(static_cast<Eigen::Index>(config_.context_length), static_cast<Eigen::Index>(half));
    rope_sin_.resizeLike(rope_cos_);
    for (std::size_t t = 0; t < config_.context_length; ++t) {
      for (std::size_t j = 0; j < half; ++j) {
        const double freq = std::pow(config_.rope_theta,
                                     -2.0 * static_cast<double>(j) / static_cast<double>(config_.head_dim()));
        const double angle = static_cast<double>(t) * freq;
        rope_cos_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = std::cos(angle);
        rope_sin_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = std::sin(angle);
      }
    }
  }
}

void Transformer::check_tokens(std::span<const TokenId> tokens, std::size_t seq_len) const {
  if (seq_len == 0) throw InvalidArgument("empty token sequence");
  if (seq_len > config_.context_length) {
    throw InvalidArgument("sequence of " + std::to_string(seq_len) + " tokens exceeds context length " +
                          std::to_string(config_.context_length));
  }
  for (TokenId id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

Matrix Transformer::final_hidden(std::span<const TokenId> tokens, std::size_t batch,
                                 ForwardCache* cache) const {
  if (batch == 0 || tokens.size() % batch != 0) throw InvalidArgument("tokens do not divide into batch");
  const std::size_t T = tokens.size() / batch;
  check_tokens(tokens, T);
  const auto N = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const std::size_t H = config_.n_heads;
  const std::size_t hd = config_.head_dim();
  const std::size_t group = config_.n_heads / config_.n_kv_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double eps = config_.norm_eps;

  Matrix x(N, d);
  for (Eigen::Index i = 0; i < N; ++i) x.row(i) = weights_.embed.row(tokens[static_cast<std::size_t>(i)]);

  if (cache != nullptr) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->batch = batch;
    cache->seq_len = T;
    cache->layers.resize(config_.n_layers);
  }

  ForwardCache::Layer scratch;
  for (std::size_t li = 0; li < config_.n_layers; ++li) {
    const LayerWeights& w = weights_.layers[li];
    ForwardCache::Layer& c = cache != nullptr ? cache->layers[li] : scratch;
    c.x_in = x;
    rms_norm(c.x_in, w.attn_norm, eps, c.xhat1, c.inv_rms1, c.h1);
    c.q.noalias() = c.h1 * w.wq;
    c.k.noalias() = c.h1 * w.wk;
    c.v.noalias() = c.h1 * w.wv;
    apply_rope(c.q, batch, T, H, hd, rope_cos_, rope_sin_, 1.0);
    apply_rope(c.k, batch, T, config_.n_kv_heads, hd, rope_cos_, rope_sin_, 1.0);

    c.attn.resize(N, d);
    if (cache != nullptr) c.probs.resize(batch * H);
    const auto Ti = static_cast<Eigen::Index>(T);
    const auto hdi = static_cast<Eigen::Index>(hd);
    Matrix scores(Ti, Ti);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto r0 = static_cast<Eigen::Index>(b * T);
      for (std::size_t h = 0; h < H; ++h) {
        const auto qc = static_cast<Eigen::Index>(h * hd);
        const auto kc = static_cast<Eigen::Index>((h / group) * hd);
        Matrix& probs = cache != nullptr ? c.probs[b * H + h] : scores;
        probs.resize(Ti, Ti);
        probs.noalias() = c.q.block(r0, qc, Ti, hdi) * c.k.block(r0, kc, Ti, hdi).transpose();
        for (Eigen::Index i = 0; i < Ti; ++i) {
          auto live = probs.row(i).head(i + 1).array();
          live *= scale;
          live = (live - live.maxCoeff()).exp();
          live /= live.sum();
          probs.row(i).tail(Ti - i - 1).setZero();
        }
        c.attn.block(r0, qc, Ti, hdi).noalias() = probs * c.v.block(r0, kc, Ti, hdi);
      }
    }
    c.x_mid = c.x_in;
    c.x_mid.noalias() += c.attn * w.wo;

    rms_norm(c.x_mid, w.mlp_norm, eps, c.xhat2, c.inv_rms2, c.h2);
    c.gate.noalias() = c.h2 * w.w_gate;
    c.up.noalias() = c.h2 * w.w_up;
    c.act = c.gate.unaryExpr([](double a) { return a * sigmoid(a); });
    c.mix = c.act.cwiseProduct(c.up);
    x = c.x_mid;
    x.noalias() += c.mix * w.w_down;
  }

  Matrix h;
  if (cache != nullptr) {
    cache->x_out = x;
    rms_norm(x, weights_.final_norm, eps, cache->xhat_final, cache->inv_rms_final, h);
    cache->h_final = h;
  } else {
    Matrix xhat;
    Vector inv;
    rms_norm(x, weights_.final_norm, eps, xhat, inv, h);
  }
  return h;
}

Matrix Transformer::forward(std::span<const TokenId> tokens, std::size_t batch,
                            ForwardCache* cache) const {
  const Matrix h = final_hidden(tokens, batch, cache);
  Matrix out;
  out.noalias() = h * weights_.lm_head;
  return out;
}

Matrix Transformer::logits(std::span<const TokenId> tokens) const { return forward(tokens, 1); }

Matrix Transformer::next_logits(std::span<const std::vector<TokenId>> sequences) const {
  Matrix out(static_cast<Eigen::Index>(sequences.size()), static_cast<Eigen::Index>(config_.vocab_size));
  // Sequences of equal length share one batched forward pass.
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < sequences.size(); ++i) by_length[sequences[i].size()].push_back(i);
  constexpr std::size_t kMaxBatch = 64;
  for (const auto& [len, members] : by_length) {
    for (std::size_t start = 0; start < members.size(); start += kMaxBatch) {
      const std::size_t n = std::min(kMaxBatch, members.size() - start);
      std::vector<TokenId> flat;
      flat.reserve(n * len);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& s = sequences[members[start + j]];
        flat.insert(flat.end(), s.begin(), s.end());
      }
      const Matrix h = final_hidden(flat, n, nullptr);
      Matrix last(static_cast<Eigen::Index>(n), h.cols());
      for (std::size_t j = 0; j < n; ++j) {
        last.row(static_cast<Eigen::Index>(j)) = h.row(static_cast<Eigen::Index>((j + 1) * len - 1));
      }
      const Matrix l = last * weights_.lm_head;
      for (std::size_t j = 0; j < n; ++j) {
        out.row(static_cast<Eigen::Index>(members[start + j])) = l.row(static_cast<Eigen::Index>(j));
      }
    }
  }
  return out;
}

void Transformer::backward(const ForwardCache& cache, const Matrix& dlogits,
                           TransformerWeights& grads) const {
  const std::size_t batch = cache.batch;
  const std::size_t T = cache.seq_len;
  const std::size_t H = config_.n_heads;
  const std::size_t hd = config_.head_dim();
  const std::size_t group = config_.n_heads / config_.n_kv_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto Ti = static_cast<Eigen::Index>(T);
  const auto hdi = static_cast<Eigen::Index>(hd);

  grads.lm_head.noalias() += cache.h_final.transpose() * dlogits;
  Matrix dh;
  dh.noalias() = dlogits * weights_.lm_head.transpose();
  Matrix dx;
  rms_norm_backward(dh, cache.xhat_final, cache.inv_rms_final, weights_.final_norm, grads.final_norm, dx);

  for (std::size_t li = config_.n_layers; li-- > 0;) {
    const LayerWeights& w = weights_.layers[li];
    LayerWeights& g = grads.layers[li];
    const ForwardCache::Layer& c = cache.layers[li];

    // Feed-forward block: x_out = x_mid + (silu(gate) * up) w_down.
    g.w_down.noalias() += c.mix.transpose() * dx;
    Matrix dmix;
    dmix.noalias() = dx * w.w_down.transpose();
    Matrix dgate(dmix.rows(), dmix.cols());
    for (Eigen::Index i = 0; i < dmix.size(); ++i) {
      const double a = c.gate.data()[i];
      const double s = sigmoid(a);
      dgate.data()[i] = dmix.data()[i] * c.up.data()[i] * s * (1.0 + a * (1.0 - s));
    }
    const Matrix dup = dmix.cwiseProduct(c.act);
    g.w_gate.noalias() += c.h2.transpose() * dgate;
    g.w_up.noalias() += c.h2.transpose() * dup;
    Matrix dh2;
    dh2.noalias() = dgate * w.w_gate.transpose();
    dh2.noalias() += dup * w.w_up.transpose();
    Matrix dnorm;
    rms_norm_backward(dh2, c.xhat2, c.inv_rms2, w.mlp_norm, g.mlp_norm, dnorm);
    Matrix dx_mid = dx + dnorm;

    // Attention block: x_mid = x_in + attn wo.
    g.wo.noalias() += c.attn.transpose() * dx_mid;
    Matrix dattn;
    dattn.noalias() = dx_mid * w.wo.transpose();
    Matrix dq = Matrix::Zero(c.q.rows(), c.q.cols());
    Matrix dk = Matrix::Zero(c.k.rows(), c.k.cols());
    Matrix dv = Matrix::Zero(c.v.rows(), c.v.cols());
    Matrix dp(Ti, Ti);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto r0 = static_cast<Eigen::Index>(b * T);
      for (std::size_t h = 0; h < H; ++h) {
        const auto qc = static_cast<Eigen::Index>(h * hd);
        const auto kc = static_cast<Eigen::Index>((h / group) * hd);
        const Matrix& p = c.probs[b * H + h];
        const auto dout = dattn.block(r0, qc, Ti, hdi);
        dv.block(r0, kc, Ti, hdi).noalias() += p.transpose() * dout;
        dp.noalias() = dout * c.v.block(r0, kc, Ti, hdi).transpose();
        // Softmax backward, row-wise; masked entries have p = 0.
        for (Eigen::Index i = 0; i < Ti; ++i) {
          const double dot = p.row(i).dot(dp.row(i));
          dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix() * scale;
        }
        dq.block(r0, qc, Ti, hdi).noalias() += dp * c.k.block(r0, kc, Ti, hdi);
        dk.block(r0, kc, Ti, hdi).noalias() += dp.transpose() * c.q.block(r0, qc, Ti, hdi);
      }
    }
    apply_rope(dq, batch, T, H, hd, rope_cos_, rope_sin_, -1.0);
    apply_rope(dk, batch, T, config_.n_kv_heads, hd, rope_cos_, rope_sin_, -1.0);
    g.wq.noalias() += c.h1.transpose() * dq;
    g.wk.noalias() += c.h1.transpose() * dk;
    g.wv.noalias() += c.h1.transpose() * dv;
    Matrix dh1;
    dh1.noalias() = dq * w.wq.transpose();
    dh1.noalias() += dk * w.wk.transpose();
    dh1.noalias() += dv * w.wv.transpose();
    rms_norm_backward(dh1, c.xhat1, c.inv_rms1, w.attn_norm, g.attn_norm, dnorm);
    dx = dx_mid + dnorm;
  }

  for (std::size_t i = 0; i < cache.tokens.size(); ++i) {
    grads.embed.row(cache.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));
  }
}

Transformer make_uniform_transformer(std::size_t vocab_size, std::size_t context_length) {
  ModelConfig c;
  c.n_layers = 0;
  c.n_heads = 1;
  c.n_kv_heads = 1;
  c.d_model = 1;
  c.d_ff = 1;
  c.vocab_size = vocab_size;
  c.context_length = context_length;
  TransformerWeights w = TransformerWeights::zeros(c);
  w.embed.setOnes();
  w.final_norm.setOnes();
  return Transformer(c, std::move(w));
}

Transformer make_bigram_transformer(const Matrix& log_probs, std::size_t context_length) {
  if (log_probs.rows() != log_probs.cols() || log_probs.rows() < 2) {
    throw InvalidArgument("bigram table must be square with at least two tokens");
  }
  const auto v = static_cast<std::size_t>(log_probs.rows());
  ModelConfig c;
  c.n_layers = 0;
  c.n_heads = 1;
  c.n_kv_heads = 1;
  c.d_model = v;
  c.d_ff = 1;
  c.vocab_size = v;
  c.context_length = context_length;
  TransformerWeights w = TransformerWeights::zeros(c);
  // One-hot embeddings; the final-norm gain undoes the RMS scaling so the
  // normalized hidden state is the exact one-hot row.
  w.embed = Matrix::Identity(log_probs.rows(), log_probs.cols());
  const double rms = std::sqrt(1.0 / static_cast<double>(v) + c.norm_eps);
  w.final_norm.setConstant(rms);
  w.lm_head = log_probs;
  return Transformer(c, std::move(w));
}

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace chronolm

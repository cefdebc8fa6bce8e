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

#include "chronolm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace chronolm {
namespace {

// Upper bound on tokens per forward pass; larger batches are split and their
// gradients accumulated.
constexpr std::size_t kMaxChunkTokens = 4096;

bool is_decayed(const std::string& name) {
  static const char* const kSuffixes[] = {".wq", ".wk", ".wv", ".wo", ".w_gate", ".w_up", ".w_down"};
  if (name == "lm_head") return true;
  for (const char* s : kSuffixes) {
    const std::string_view sv(s);
    if (name.size() > sv.size() && name.compare(name.size() - sv.size(), sv.size(), sv) == 0) return true;
  }
  return false;
}

std::vector<Matrix*> tensors(TransformerWeights& w) {
  std::vector<Matrix*> out;
  w.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

// Sum over positions of alpha * CE + (1 - alpha) * T^2 * KL, with the
// gradient of (sum / denom) accumulated into *grads.
double objective_sum(const Transformer& model, const std::vector<Matrix>* teacher_logits,
                     std::span<const TokenId> blocks, std::size_t batch, double alpha,
                     double temperature, KlAggregation aggregation, double denom,
                     TransformerWeights* grads) {
  const std::size_t seq = blocks.size() / batch;
  const auto V = static_cast<Eigen::Index>(model.vocab_size());
  ForwardCache cache;
  const Matrix logits = model.forward(blocks, batch, grads != nullptr ? &cache : nullptr);
  Matrix dlogits;
  if (grads != nullptr) dlogits = Matrix::Zero(logits.rows(), logits.cols());

  const bool use_kl = teacher_logits != nullptr && alpha < 1.0;
  const double kl_weight = (1.0 - alpha) * temperature * temperature;
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t + 1 < seq; ++t) {
      const auto r = static_cast<Eigen::Index>(b * seq + t);
      const TokenId target = blocks[b * seq + t + 1];
      const Vector lp = log_softmax(logits.row(r).transpose());
      double row_loss = 0.0;
      Vector g;
      if (grads != nullptr) {
        g = lp.array().exp().matrix();
        g(target) -= 1.0;
        g *= alpha;
      }
      row_loss += alpha * -lp(target);
      if (use_kl) {
        const Vector lps = log_softmax(logits.row(r).transpose() / temperature);
        const Vector ps = lps.array().exp().matrix();
        const auto n_teachers = static_cast<double>(teacher_logits->size());
        Vector pt_mean = Vector::Zero(V);
        double kl = 0.0;
        if (aggregation == KlAggregation::kMeanOfKl) {
          for (const Matrix& tl : *teacher_logits) {
            const Vector lpt = log_softmax(tl.row(r).transpose() / temperature);
            const Vector pt = lpt.array().exp().matrix();
            kl += (pt.array() * (lpt - lps).array()).sum();
            pt_mean += pt;
          }
          kl /= n_teachers;
          pt_mean /= n_teachers;
        } else {
          for (const Matrix& tl : *teacher_logits) {
            pt_mean += log_softmax(tl.row(r).transpose() / temperature).array().exp().matrix();
          }
          pt_mean /= n_teachers;
          for (Eigen::Index v = 0; v < V; ++v) {
            if (pt_mean(v) > 0.0) kl += pt_mean(v) * (std::log(pt_mean(v)) - lps(v));
          }
        }
        row_loss += kl_weight * kl;
        // d(T^2 KL)/dz = T (p_s - p_t); the mean over teachers is linear.
        if (grads != nullptr) g += (1.0 - alpha) * temperature * (ps - pt_mean);
      }
      total += row_loss;
      if (grads != nullptr) dlogits.row(r) = g.transpose() / denom;
    }
  }
  if (grads != nullptr) model.backward(cache, dlogits, *grads);
  return total;
}

std::size_t positions(std::size_t n_tokens, std::size_t batch) {
  const std::size_t seq = n_tokens / batch;
  return batch * (seq - 1);
}

void check_blocks(std::span<const TokenId> blocks, std::size_t batch) {
  if (batch == 0 || blocks.empty() || blocks.size() % batch != 0) {
    throw InvalidArgument("blocks must hold `batch` equal-length sequences");
  }
  if (blocks.size() / batch < 2) throw InvalidArgument("blocks need at least two tokens each");
}

double learning_rate_at(const TrainConfig& c, std::size_t step, std::size_t total_steps) {
  if (c.schedule == LrSchedule::kConstant) return c.learning_rate;
  const auto warmup = static_cast<std::size_t>(
      std::ceil(c.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) {
    return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return c.learning_rate;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return c.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

class AdamW {
 public:
  AdamW(const TrainConfig& c, TransformerWeights& params)
      : config_(c), m_(params), v_(params) {
    m_.set_zero();
    v_.set_zero();
    params.for_each([&](const std::string& name, Matrix&) { decay_.push_back(is_decayed(name)); });
  }

  void step(TransformerWeights& params, TransformerWeights& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    auto p = tensors(params);
    auto g = tensors(grads);
    auto m = tensors(m_);
    auto v = tensors(v_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i]->array() = config_.beta1 * m[i]->array() + (1.0 - config_.beta1) * g[i]->array();
      v[i]->array() = config_.beta2 * v[i]->array() + (1.0 - config_.beta2) * g[i]->array().square();
      if (decay_[i]) p[i]->array() *= 1.0 - lr * config_.weight_decay;
      p[i]->array() -= lr * (m[i]->array() / bc1) /
                       ((v[i]->array() / bc2).sqrt() + config_.adam_eps);
    }
  }

 private:
  TrainConfig config_;
  TransformerWeights m_;
  TransformerWeights v_;
  std::vector<bool> decay_;
  std::size_t t_ = 0;
};

double clip_gradients(TransformerWeights& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    grads.for_each([&](const std::string&, Matrix& m) { m *= s; });
  }
  return norm;
}

TrainResult run_training(const ModelConfig& model_config, const TrainConfig& config,
                         std::span<const Transformer* const> teachers,
                         std::span<const TokenId> train_stream, std::span<const TokenId> val_stream,
                         const EvalHook& on_eval) {
  model_config.validate();
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Transformer model(model_config);
  const std::size_t L = model_config.context_length;
  const std::vector<TokenId> blocks = pack_blocks(train_stream, L);
  const std::size_t n_blocks = blocks.size() / L;
  if (n_blocks == 0) {
    throw InvalidArgument("training stream has fewer tokens than one context-length block");
  }
  const std::size_t steps_per_epoch = (n_blocks + config.batch_size - 1) / config.batch_size;
  std::size_t total_steps = config.epochs * steps_per_epoch;
  if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);

  TrainResult result{model, {}};
  TrainingLog& log = result.log;
  TransformerWeights best = model.weights();
  double best_loss = 0.0;
  std::size_t n_evals = 0;
  std::size_t step = 0;
  std::size_t epoch = 0;

  const auto evaluate = [&] {
    LogRow row{step, epoch, std::nullopt, validation_loss(model, val_stream), elapsed()};
    if (!std::isfinite(*row.val_loss)) throw TrainingDiverged(step, *row.val_loss);
    log.rows.push_back(row);
    if (n_evals == 0 || *row.val_loss < best_loss) {
      best_loss = *row.val_loss;
      best = model.weights();
      log.selected_eval = n_evals;
      log.selected_step = step;
    }
    ++n_evals;
    if (on_eval) on_eval(model, row);
  };

  evaluate();
  AdamW optimizer(config, model.weights());
  TransformerWeights grads = TransformerWeights::zeros(model_config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n_blocks);
  std::vector<TokenId> chunk_tokens;
  std::vector<Matrix> teacher_logits;

  for (epoch = 0; epoch < config.epochs && step < total_steps; ++epoch) {
    for (std::size_t i = 0; i < n_blocks; ++i) order[i] = i;
    for (std::size_t i = n_blocks; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    for (std::size_t b0 = 0; b0 < n_blocks && step < total_steps; b0 += config.batch_size) {
      const std::size_t nb = std::min(config.batch_size, n_blocks - b0);
      const double denom = static_cast<double>(nb * (L - 1));
      const std::size_t per_chunk = std::max<std::size_t>(1, kMaxChunkTokens / L);
      grads.set_zero();
      double loss = 0.0;
      for (std::size_t c0 = 0; c0 < nb; c0 += per_chunk) {
        const std::size_t nc = std::min(per_chunk, nb - c0);
        chunk_tokens.clear();
        for (std::size_t j = 0; j < nc; ++j) {
          const auto* src = blocks.data() + order[b0 + c0 + j] * L;
          chunk_tokens.insert(chunk_tokens.end(), src, src + L);
        }
        teacher_logits.clear();
        for (const Transformer* t : teachers) teacher_logits.push_back(t->forward(chunk_tokens, nc));
        loss += objective_sum(model, teachers.empty() ? nullptr : &teacher_logits, chunk_tokens, nc,
                              teachers.empty() ? 1.0 : config.distillation_alpha,
                              config.temperature, config.kl_aggregation, denom, &grads);
      }
      loss /= denom;
      if (!std::isfinite(loss)) throw TrainingDiverged(step, loss);
      clip_gradients(grads, config.grad_clip);
      optimizer.step(model.weights(), grads, learning_rate_at(config, step, total_steps));
      ++step;
      log.rows.push_back({step, epoch, loss, std::nullopt, elapsed()});
      if (config.eval_interval > 0 && step % config.eval_interval == 0) evaluate();
    }
    if (config.eval_interval == 0) evaluate();
  }
  if (!log.rows.back().val_loss) evaluate();

  log.best_val_loss = best_loss;
  result.model = Transformer(model_config, std::move(best));
  return result;
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::size_t s, double l)
    : Error("training diverged at step " + std::to_string(s) + ": loss " + std::to_string(l)),
      step(s),
      loss(l) {}

std::vector<std::string> TrainConfig::diagnostics() const {
  std::vector<std::string> out;
  if (!(learning_rate > 0.0)) out.push_back("learning_rate must be positive");
  if (batch_size == 0) out.push_back("batch_size must be at least 1");
  if (!(weight_decay >= 0.0)) out.push_back("weight_decay must be non-negative");
  if (!(distillation_alpha >= 0.0 && distillation_alpha <= 1.0)) {
    out.push_back("distillation_alpha must lie in [0, 1]");
  }
  if (!(temperature > 0.0)) out.push_back("temperature must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) out.push_back("warmup_fraction must lie in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    out.push_back("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) out.push_back("adam_eps must be positive");
  if (!(grad_clip >= 0.0)) out.push_back("grad_clip must be non-negative");
  return out;
}

void TrainConfig::validate() const {
  const auto d = diagnostics();
  if (!d.empty()) throw InvalidArgument("invalid training config: " + d.front());
}

std::vector<double> TrainingLog::val_losses() const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.val_loss) out.push_back(*r.val_loss);
  }
  return out;
}

std::string TrainingLog::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "step,epoch,loss,val_loss,seconds\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.epoch << ',';
    if (r.loss) os << *r.loss;
    os << ',';
    if (r.val_loss) os << *r.val_loss;
    os << ',' << r.seconds << '\n';
  }
  return os.str();
}

std::size_t select_best(std::span<const double> val_losses) {
  if (val_losses.empty()) throw InvalidArgument("select_best needs at least one checkpoint");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_losses.size(); ++i) {
    if (val_losses[i] < val_losses[best]) best = i;
  }
  return best;
}

std::vector<TokenId> pack_blocks(std::span<const TokenId> stream, std::size_t block_len) {
  if (block_len < 2) throw InvalidArgument("block length must be at least 2");
  const std::size_t n = stream.size() / block_len;
  return {stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(n * block_len)};
}

double lm_loss(const Transformer& model, std::span<const TokenId> blocks, std::size_t batch,
               TransformerWeights* grads) {
  check_blocks(blocks, batch);
  const double denom = static_cast<double>(positions(blocks.size(), batch));
  return objective_sum(model, nullptr, blocks, batch, 1.0, 1.0, KlAggregation::kMeanOfKl, denom,
                       grads) / denom;
}

double distillation_loss(const Transformer& student, std::span<const Matrix> teacher_logits,
                         std::span<const TokenId> blocks, std::size_t batch, double alpha,
                         double temperature, KlAggregation aggregation, TransformerWeights* grads) {
  check_blocks(blocks, batch);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (teacher_logits.empty()) throw InvalidArgument("distillation needs at least one teacher");
  for (const Matrix& t : teacher_logits) {
    if (static_cast<std::size_t>(t.rows()) != blocks.size() ||
        static_cast<std::size_t>(t.cols()) != student.vocab_size()) {
      throw InvalidArgument("teacher logits do not match the student's batch or vocabulary");
    }
  }
  const std::vector<Matrix> teachers(teacher_logits.begin(), teacher_logits.end());
  const double denom = static_cast<double>(positions(blocks.size(), batch));
  return objective_sum(student, &teachers, blocks, batch, alpha, temperature, aggregation, denom,
                       grads) / denom;
}

double validation_loss(const Transformer& model, std::span<const TokenId> stream) {
  if (stream.size() < 2) throw InvalidArgument("validation stream needs at least two tokens");
  const std::size_t L = std::min(model.context_length(), stream.size());
  const std::vector<TokenId> blocks = pack_blocks(stream, L);
  const std::size_t n_blocks = blocks.size() / L;
  const std::size_t per_chunk = std::max<std::size_t>(1, kMaxChunkTokens / L);
  double total = 0.0;
  for (std::size_t b0 = 0; b0 < n_blocks; b0 += per_chunk) {
    const std::size_t nb = std::min(per_chunk, n_blocks - b0);
    total += objective_sum(model, nullptr, std::span(blocks).subspan(b0 * L, nb * L), nb, 1.0, 1.0,
                           KlAggregation::kMeanOfKl, 1.0, nullptr);
  }
  return total / static_cast<double>(n_blocks * (L - 1));
}

TrainResult train_teacher(const ModelConfig& model_config, const TrainConfig& config,
                          std::span<const TokenId> train_stream, std::span<const TokenId> val_stream,
                          const EvalHook& on_eval) {
  return run_training(model_config, config, {}, train_stream, val_stream, on_eval);
}

TrainResult distill_student(std::span<const Transformer* const> teachers,
                            const ModelConfig& student_config, const TrainConfig& config,
                            std::span<const TokenId> train_stream, std::span<const TokenId> val_stream,
                            const EvalHook& on_eval) {
  if (teachers.empty()) throw InvalidArgument("distillation needs at least one teacher");
  for (const Transformer* t : teachers) {
    if (t == nullptr) throw InvalidArgument("null teacher");
    if (t->vocab_size() != student_config.vocab_size) {
      throw InvalidArgument("teacher vocabulary size " + std::to_string(t->vocab_size()) +
                            " differs from the student's " +
                            std::to_string(student_config.vocab_size));
    }
    if (t->context_length() < student_config.context_length) {
      throw InvalidArgument("teacher context is shorter than the student's");
    }
  }
  return run_training(student_config, config, teachers, train_stream, val_stream, on_eval);
}

}  // namespace chronolm

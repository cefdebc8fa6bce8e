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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chronolm/model.hpp"

namespace chronolm {

enum class LrSchedule { kCosine, kConstant };

/// How the two teachers' soft targets enter the KL term.
enum class KlAggregation {
  kMeanOfKl,  // mean over teachers of KL(teacher || student)
  kKlToMean,  // KL(mean teacher distribution || student)
};

struct TrainConfig {
  double learning_rate = 7e-4;
  std::size_t epochs = 8;
  std::size_t batch_size = 128;
  double weight_decay = 5.0;
  double distillation_alpha = 0.5;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Optimizer steps between validation passes; 0 evaluates once per epoch.
  std::size_t eval_interval = 0;
  LrSchedule schedule = LrSchedule::kCosine;
  double warmup_fraction = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 1.0;
  /// Hard cap on optimizer steps; 0 means no cap.
  std::size_t max_steps = 0;
  KlAggregation kl_aggregation = KlAggregation::kMeanOfKl;

  std::vector<std::string> diagnostics() const;
  void validate() const;
};

/// Raised when the training loss stops being finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, double loss);
  std::size_t step;
  double loss;
};

struct LogRow {
  std::size_t step = 0;  // optimizer steps completed
  std::size_t epoch = 0;
  std::optional<double> loss;      // training loss of the step
  std::optional<double> val_loss;  // present on evaluation rows
  double seconds = 0.0;            // wall time since training started
};

struct TrainingLog {
  std::vector<LogRow> rows;
  /// Index into the evaluation rows (rows with val_loss) of the returned model.
  std::size_t selected_eval = 0;
  std::size_t selected_step = 0;
  double best_val_loss = 0.0;

  std::vector<double> val_losses() const;
  /// step,epoch,loss,val_loss,seconds
  std::string to_csv() const;
};

struct TrainResult {
  Transformer model;
  TrainingLog log;
};

/// Called at each evaluation with the current weights, e.g. to persist them.
using EvalHook = std::function<void(const Transformer&, const LogRow&)>;

/// argmin; ties resolve to the earliest index. Throws on an empty list.
std::size_t select_best(std::span<const double> val_losses);

/// Splits a token stream into consecutive non-overlapping blocks of
/// block_len tokens, dropping the incomplete tail.
std::vector<TokenId> pack_blocks(std::span<const TokenId> stream, std::size_t block_len);

/// Mean next-token cross-entropy over every block position that has a
/// successor inside its block. `blocks` holds `batch` equal-length blocks.
/// Gradients are accumulated into *grads when given.
double lm_loss(const Transformer& model, std::span<const TokenId> blocks, std::size_t batch,
               TransformerWeights* grads = nullptr);

/// alpha * CE + (1 - alpha) * T^2 * KL term, averaged over the same positions
/// as lm_loss. teacher_logits[i] is teacher i's forward output on `blocks`.
double distillation_loss(const Transformer& student, std::span<const Matrix> teacher_logits,
                         std::span<const TokenId> blocks, std::size_t batch, double alpha,
                         double temperature, KlAggregation aggregation,
                         TransformerWeights* grads = nullptr);

/// Mean cross-entropy of the stream, packed into context-length blocks.
double validation_loss(const Transformer& model, std::span<const TokenId> stream);

TrainResult train_teacher(const ModelConfig& model_config, const TrainConfig& config,
                          std::span<const TokenId> train_stream, std::span<const TokenId> val_stream,
                          const EvalHook& on_eval = {});

TrainResult distill_student(std::span<const Transformer* const> teachers,
                            const ModelConfig& student_config, const TrainConfig& config,
                            std::span<const TokenId> train_stream, std::span<const TokenId> val_stream,
                            const EvalHook& on_eval = {});

}  // namespace chronolm

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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/attribution.hpp"
#include "chronolm/corpus.hpp"
#include "chronolm/decoding.hpp"
#include "chronolm/discovery.hpp"
#include "chronolm/evaluation.hpp"
#include "chronolm/model.hpp"
#include "chronolm/tokenizer.hpp"
#include "chronolm/training.hpp"

namespace chronolm {

struct CorpusSection {
  std::vector<std::filesystem::path> paths;
  RecordSchema schema;
  YearRange range{1750, 1940};
};

struct SlicingSection {
  std::size_t n_slices = 5;
  SplitBudgets budgets;
};

struct SeedSection {
  std::uint64_t split = 0;
  std::vector<std::uint64_t> teachers = {1, 2};
  std::uint64_t student = 3;
};

struct EvaluationSection {
  std::optional<std::filesystem::path> cloze_inventory;
  std::optional<std::filesystem::path> minimal_pairs;
  DecodeOptions decode;
  ClozeBuildOptions cloze;
  std::size_t perplexity_stride = 0;
  /// Which model of each slice forms the evaluated battery.
  std::string battery_role = "student";
  bool filter_pairs = true;
  bool per_token_pairs = false;
};

struct DiscoverySection {
  /// Baseline slice label; empty selects the last slice.
  std::string baseline;
  DiscoveryOptions options;
  std::size_t sample_sentences = 2000;
  /// Words that always get an occurrence table.
  std::vector<std::string> words;
  /// Top trajectory candidates that also get one.
  std::size_t occurrence_tables = 3;
};

struct AttributionSection {
  bool enabled = false;
  std::optional<std::filesystem::path> authority;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> works;
  HttpClientConfig endpoint;
  MatchThresholds thresholds;
  std::vector<int> tolerances = {1, 10};
  std::optional<int> dq_delta = 50;
  std::size_t max_in_flight = 4;
  double requests_per_second = 0.0;
  std::size_t max_retries = 3;
  double backoff_seconds = 1.0;
};

struct PipelineConfig {
  std::filesystem::path output_dir = "out";
  CorpusSection corpus;
  SlicingSection slicing;
  BpeTrainOptions tokenizer;
  ModelConfig model;
  /// Defaults to `model` when absent.
  std::optional<ModelConfig> student_model;
  TrainConfig training;
  TrainConfig distillation;
  SeedSection seeds;
  EvaluationSection evaluation;
  DiscoverySection discovery;
  AttributionSection attribution;

  /// Relative paths in `text` are resolved against base_dir.
  static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  /// Pretty-printed JSON; parse(to_json()) reproduces the config.
  std::string to_json() const;

  /// Every violated cross-field invariant, not just the first.
  std::vector<std::string> diagnostics() const;

  ModelConfig student() const { return student_model.value_or(model); }
};

/// Raised with every diagnostic when a config fails validation.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

/// Raised when a stage cannot complete, including missing upstream output.
class StageError : public Error {
 public:
  using Error::Error;
};

struct ValidationResult {
  std::optional<PipelineConfig> config;
  std::vector<std::string> diagnostics;
  bool ok() const noexcept { return diagnostics.empty(); }
};

/// Parse and check a config file, collecting all problems.
ValidationResult validate_config(const std::filesystem::path& path);

struct StageOutcome {
  std::string stage;
  std::optional<std::string> slice;
  bool skipped = false;
  double seconds = 0.0;
  std::vector<std::string> outputs;  // relative to the output directory
  std::vector<std::string> notes;
};

/// Runs stages against one output directory. Each stage records a manifest
/// (input hash, outputs with hashes, duration) under manifests/ and is
/// skipped when its inputs and outputs are unchanged.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  static const std::vector<std::string>& stages();

  /// `stage` may be "all". `slice` restricts per-slice stages to one label.
  std::vector<StageOutcome> run(const std::string& stage, const std::optional<std::string>& slice = {});

  /// Replaces the HTTP client used by the attribute stage.
  void set_client(std::shared_ptr<TextGenerationClient> client);

  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path out() const { return config_.output_dir; }

 private:
  struct Impl;
  PipelineConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// Pipeline config for a generated synthetic corpus: budgets are set from
/// the realized per-slice token counts so slices follow the generator's eras.
PipelineConfig synthetic_pipeline_config(const std::vector<std::uint64_t>& slice_tokens, YearRange range,
                                         const std::filesystem::path& data_dir,
                                         const std::filesystem::path& output_dir);

}  // namespace chronolm

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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/corpus.hpp"
#include "chronolm/decoding.hpp"
#include "chronolm/model.hpp"
#include "chronolm/tokenizer.hpp"

namespace chronolm {

/// One dated sense of a word with example sentences.
struct SenseRecord {
  std::string word;
  std::string sense_id;
  std::optional<int> year;
  std::string definition;
  std::vector<std::string> examples;
  std::optional<double> frequency_per_million;
};

/// Reads newline-delimited records with fields word, sense_id, year,
/// definition, examples (array or single string) and frequency.
std::vector<SenseRecord> read_sense_inventory(const std::filesystem::path& path);
SenseRecord parse_sense_record(std::string_view json_line);
std::string to_json_line(const SenseRecord& record);

struct ClozeTask {
  std::string id;  // sense_id#example_index
  std::string sense_id;
  std::string sentence;
  std::string prefix;  // sentence up to the first byte of the target
  std::string target;  // lowercased
  int sense_year = 0;
  double frequency_per_million = 0.0;
  std::optional<std::string> definition;
};

struct ClozeBuildOptions {
  double tail_fraction = 0.10;
  double min_frequency = 1.0;  // per million, inclusive
  double max_frequency = 1000.0;
  std::uint64_t min_count = 2;
};

struct ClozeSkip {
  std::string record;  // sense id, with #index for a single example
  std::string reason;
};

struct ClozeBuildResult {
  std::vector<ClozeTask> tasks;
  std::vector<ClozeSkip> skipped;
  std::size_t candidates = 0;          // examples passing the tail and band rules
  bool vocabulary_filter_applied = false;
  FilterResult filter;
};

/// A candidate example must end with the target as its last word, that word
/// must start in the final tail_fraction of the sentence's characters, and
/// the sense frequency must lie in the band. Survivors are then kept only if
/// every word occurs at least min_count times in every vocabulary; with no
/// vocabularies that step is skipped and reported.
ClozeBuildResult build_cloze_set(std::span<const SenseRecord> records,
                                 std::span<const WordCounts> vocabularies,
                                 const ClozeBuildOptions& options = {});

/// Character (code point) offset of a byte offset in UTF-8 text.
std::size_t char_offset(std::string_view text, std::size_t byte_offset);

/// A model together with its tokenizer, addressed by label.
struct BatteryMember {
  std::string id;
  const LanguageModel* model = nullptr;
  const BpeTokenizer* tokenizer = nullptr;
};

struct ClozeRanking {
  std::string task_id;
  std::string model_id;
  std::size_t rank = 0;  // 0-based; k + 1 when absent from the top k
  std::size_t k = 0;

  bool hit() const noexcept { return rank < k; }
};

struct RankingFailure {
  std::string task_id;
  std::string model_id;
  std::string message;
};

struct RankResult {
  std::vector<ClozeRanking> rankings;
  std::vector<RankingFailure> failures;
};

/// Position of the target among decoded completions, case-insensitive.
std::size_t rank_of(const DecodeResult& result, std::string_view target, std::size_t k);

RankResult rank_cloze(std::span<const BatteryMember> battery, std::span<const ClozeTask> tasks,
                      const DecodeOptions& options);

struct LeakageReport {
  std::string model_id;
  int cutoff_year = 0;
  std::size_t k = 0;
  std::size_t n_true = 0;     // |T|, sense year <= cutoff
  std::size_t n_future = 0;   // |F|, sense year > cutoff
  std::size_t hits_true = 0;  // |C ∩ T|
  std::size_t hits_future = 0;
  std::optional<double> recall;   // undefined when T is empty
  std::optional<double> leakage;  // undefined when F is empty
  std::optional<double> rnl;      // undefined unless recall > 0 and leakage defined
};

/// Rankings must belong to one model; every ranked task must be in `tasks`.
LeakageReport leakage_report(std::span<const ClozeRanking> rankings, std::span<const ClozeTask> tasks,
                             int cutoff_year, std::size_t k);

double reciprocal_rank(const ClozeRanking& r);
/// Throws on an empty list.
double mrr(std::span<const ClozeRanking> rankings);

struct GroupAccuracy {
  std::string label;
  std::size_t n = 0;
  std::size_t hits = 0;
  double accuracy = 0.0;
};

struct GroupedAccuracy {
  std::vector<GroupAccuracy> groups;  // non-empty groups, in the given order
  std::vector<std::string> notes;     // one per omitted empty group
  std::size_t ungrouped = 0;          // rankings whose sense year fits no group
};

/// Groups rankings by the slice containing their task's sense year.
GroupedAccuracy grouped_accuracy(std::span<const ClozeRanking> rankings,
                                 std::span<const ClozeTask> tasks,
                                 std::span<const TimeSlice> groups);

struct MinimalPair {
  std::string good;
  std::string bad;
  std::string subtask;
};

std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path);
MinimalPair parse_minimal_pair(std::string_view json_line);

/// Sum of log p over the sentence's tokens after <bos>, no <eos>. With
/// per_token the sum is divided by the token count.
double sentence_log_prob(const LanguageModel& model, const BpeTokenizer& tokenizer,
                         std::string_view sentence, bool per_token = false);

struct PairTally {
  std::size_t n = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // undefined when n == 0
};

struct PairAccuracy {
  PairTally overall;
  std::map<std::string, PairTally> by_subtask;
};

/// A pair counts as correct only when the good sentence scores strictly higher.
PairAccuracy minimal_pair_accuracy(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                   std::span<const MinimalPair> pairs, bool per_token = false);

struct TestSet {
  std::string label;
  std::vector<std::string> texts;
};

struct PerplexityMatrix {
  std::vector<std::string> row_labels;  // models
  std::vector<std::string> col_labels;  // test sets
  std::vector<std::vector<double>> values;

  /// model,test_set,perplexity rows in matrix order.
  std::string to_csv() const;
};

/// Entry (i, j) is model i's perplexity on test set j. Every model label
/// must have a test set with the same label.
PerplexityMatrix cross_time_matrix(std::span<const BatteryMember> battery,
                                   std::span<const TestSet> test_sets, std::size_t stride = 0);

}  // namespace chronolm
